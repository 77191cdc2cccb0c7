//! Working-precision real numbers.
//!
//! Every value taking part in one solve is an MPFR float carrying the same
//! binary precision. At 53 bits the arithmetic rounds exactly like IEEE
//! doubles (the exponent range is wider).

use std::fmt;

use rug::Float;
use thiserror::Error;

/// A real number at a configurable binary precision.
pub type Real = Float;

/// Smallest supported precision, matching an IEEE double mantissa.
pub const MIN_PRECISION_BITS: u32 = 53;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RealError {
    #[error("precision of {0} bits is below the minimum of {MIN_PRECISION_BITS}")]
    PrecisionTooLow(u32),
    #[error("cannot parse `{0}` as a real number")]
    Parse(String),
    #[error("`{0}` is not a finite real number")]
    NonFinite(String),
}

/// Binary precision shared by all values of one computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Precision(u32);

impl Precision {
    pub const DOUBLE: Precision = Precision(53);

    pub fn new(bits: u32) -> Result<Self, RealError> {
        if bits < MIN_PRECISION_BITS {
            return Err(RealError::PrecisionTooLow(bits));
        }
        Ok(Precision(bits))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn zero(self) -> Real {
        Float::new(self.0)
    }

    pub fn one(self) -> Real {
        Float::with_val(self.0, 1)
    }

    pub fn int(self, v: i64) -> Real {
        Float::with_val(self.0, v)
    }

    /// Converts an `f64` exactly (every double is representable at >= 53 bits).
    pub fn from_f64(self, v: f64) -> Real {
        Float::with_val(self.0, v)
    }

    /// Parses a decimal string, correctly rounded to this precision.
    pub fn parse(self, s: &str) -> Result<Real, RealError> {
        let parsed = Float::parse(s.trim()).map_err(|_| RealError::Parse(s.to_string()))?;
        let v = Float::with_val(self.0, parsed);
        if !v.is_finite() {
            return Err(RealError::NonFinite(s.to_string()));
        }
        Ok(v)
    }

    /// `2^exp` at this precision.
    pub fn pow2(self, exp: i32) -> Real {
        let one = self.one();
        if exp >= 0 {
            one << exp as u32
        } else {
            one >> exp.unsigned_abs()
        }
    }

    /// Unit roundoff `2^-bits`.
    pub fn epsilon(self) -> Real {
        self.pow2(-(self.0 as i32))
    }

    /// Number of significant decimal digits used when serializing values,
    /// enough for a lossless round trip at this precision.
    pub fn decimal_digits(self) -> usize {
        (f64::from(self.0) * 0.302).ceil() as usize + 3
    }

    /// Decimal rendering with [`Precision::decimal_digits`] significant digits.
    pub fn format(self, v: &Real) -> String {
        v.to_string_radix(10, Some(self.decimal_digits()))
    }

    pub fn pi(self) -> Real {
        Float::with_val(self.0, rug::float::Constant::Pi)
    }
}

impl Default for Precision {
    fn default() -> Self {
        Precision::DOUBLE
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} bits", self.0)
    }
}

/// `|a - b|` at the precision of `a`.
pub fn abs_diff(a: &Real, b: &Real) -> Real {
    Float::with_val(a.prec(), a - b).abs()
}

/// Largest of a non-empty iterator of reals; `None` when empty.
pub fn max_of<'a>(values: impl IntoIterator<Item = &'a Real>) -> Option<Real> {
    values
        .into_iter()
        .fold(None, |acc: Option<Real>, v| match acc {
            Some(m) if m >= *v => Some(m),
            _ => Some(v.clone()),
        })
}
