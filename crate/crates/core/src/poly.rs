//! The three polynomial families and their evaluation.
//!
//! * algebraic: `x^n + a_1 x^(n-1) + ... + a_n` (monic);
//! * trigonometric: `a_0/2 + sum_l (a_l cos lx + b_l sin lx)`;
//! * exponential: `a_0/2 + sum_l (a_l ch lx + b_l sh lx)`.
//!
//! Each family also has a factored form built from a [`RootConfiguration`]:
//! `scale * prod (x - x_j)^a_j`, `scale * prod sin^a_j((x - x_j)/2)` and
//! `scale * prod sh^a_j((x - x_j)/2)` respectively. Factored forms are a
//! first-class representation and can be expanded to coefficient form with
//! [`expand_from_roots`].

use std::fmt;

use rug::ops::Pow;
use rug::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::real::{Precision, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Algebraic,
    Trigonometric,
    Exponential,
}

impl Family {
    /// Degree implied by a total root multiplicity, or `None` when the
    /// trigonometric/exponential parity requirement fails.
    pub fn degree_for_multiplicity(self, total: u32) -> Option<usize> {
        match self {
            Family::Algebraic => Some(total as usize),
            Family::Trigonometric | Family::Exponential => {
                total.is_multiple_of(2).then_some((total / 2) as usize)
            }
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Algebraic => "algebraic",
            Family::Trigonometric => "trigonometric",
            Family::Exponential => "exponential",
        })
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "algebraic" => Ok(Family::Algebraic),
            "trigonometric" => Ok(Family::Trigonometric),
            "exponential" => Ok(Family::Exponential),
            other => Err(format!(
                "unknown family `{other}` (expected algebraic, trigonometric or exponential)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    #[error("{family} polynomial is not finite at x = {x}")]
    Overflow { family: Family, x: String },
    #[error("invalid polynomial: {0}")]
    InvalidPolynomial(String),
    #[error("invalid root configuration: {0}")]
    InvalidConfiguration(String),
    #[error("approximations {i} and {j} collide (|x_i - x_j| = {gap})")]
    Collision { i: usize, j: usize, gap: String },
    #[error("expanded {family} polynomial disagrees with its factored form at x = {x}")]
    ExpansionMismatch { family: Family, x: String },
}

/// Monic algebraic polynomial, stored as `(a_1, ..., a_n)` with implicit
/// leading coefficient 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraicPoly {
    coeffs: Vec<Real>,
    /// Coefficientwise magnitudes of the intermediate sums that produced
    /// `coeffs`, when they came out of an expansion with cancellation.
    magnitudes: Option<Vec<Real>>,
}

impl AlgebraicPoly {
    pub fn monic(coeffs: Vec<Real>) -> Result<Self, PolyError> {
        if coeffs.is_empty() {
            return Err(PolyError::InvalidPolynomial(
                "algebraic polynomial needs degree >= 1".into(),
            ));
        }
        check_finite(&coeffs)?;
        Ok(AlgebraicPoly {
            coeffs,
            magnitudes: None,
        })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    /// `(a_1, ..., a_n)`.
    pub fn coefficients(&self) -> &[Real] {
        &self.coeffs
    }

    pub fn precision(&self) -> u32 {
        self.coeffs[0].prec()
    }

    /// Coefficient of `x^k`, `k = 0..=n`.
    fn power_coeff(coeffs: &[Real], k: usize) -> Real {
        let n = coeffs.len();
        if k == n {
            Float::with_val(coeffs[0].prec(), 1)
        } else {
            coeffs[n - 1 - k].clone()
        }
    }

    /// `f^(order)(x)` by Horner evaluation of the differentiated coefficients.
    /// With `absolute` set, sums absolute values of the terms instead.
    /// When the coefficients carry expansion magnitudes, the absolute sum is
    /// the larger of the two bounds.
    fn derivative_at(&self, order: usize, x: &Real, absolute: bool) -> Real {
        let own = Self::horner_derivative(&self.coeffs, order, x, absolute);
        match &self.magnitudes {
            Some(m) if absolute => own.max(&Self::horner_derivative(m, order, x, true)),
            _ => own,
        }
    }

    fn horner_derivative(coeffs: &[Real], order: usize, x: &Real, absolute: bool) -> Real {
        let prec = coeffs[0].prec();
        let n = coeffs.len();
        let mut acc = Float::new(prec);
        if order > n {
            return acc;
        }
        let xv = if absolute { x.clone().abs() } else { x.clone() };
        for k in (order..=n).rev() {
            let mut c = Self::power_coeff(coeffs, k);
            // falling factorial k (k-1) ... (k-order+1)
            for f in (k + 1 - order)..=k {
                c *= f as u32;
            }
            if absolute {
                c.abs_mut();
            }
            acc *= &xv;
            acc += &c;
        }
        acc
    }
}

/// Coefficients shared by the trigonometric and exponential families:
/// `a_0/2 + sum_l (a_l C(lx) + b_l S(lx))` with `(C, S)` being `(cos, sin)` or
/// `(ch, sh)`.
#[derive(Debug, Clone, PartialEq)]
struct HarmonicCoeffs {
    a0: Real,
    even: Vec<Real>,
    odd: Vec<Real>,
    /// Absolute coefficient bounds left by an expansion, if any.
    magnitudes: Option<Box<HarmonicCoeffs>>,
}

impl HarmonicCoeffs {
    fn new(a0: Real, even: Vec<Real>, odd: Vec<Real>, family: Family) -> Result<Self, PolyError> {
        if even.len() != odd.len() {
            return Err(PolyError::InvalidPolynomial(format!(
                "{family} polynomial needs as many a_l as b_l ({} vs {})",
                even.len(),
                odd.len()
            )));
        }
        if even.is_empty() {
            return Err(PolyError::InvalidPolynomial(format!(
                "{family} polynomial needs degree >= 1"
            )));
        }
        check_finite(std::slice::from_ref(&a0))?;
        check_finite(&even)?;
        check_finite(&odd)?;
        let n = even.len();
        if even[n - 1].is_zero() && odd[n - 1].is_zero() {
            return Err(PolyError::InvalidPolynomial(format!(
                "{family} polynomial has both leading coefficients a_{n} and b_{n} equal to zero"
            )));
        }
        Ok(HarmonicCoeffs {
            a0,
            even,
            odd,
            magnitudes: None,
        })
    }

    fn degree(&self) -> usize {
        self.even.len()
    }

    fn precision(&self) -> u32 {
        self.a0.prec()
    }

    /// Term-by-term `order`-th derivative. `basis(l, x, order)` returns the
    /// pair `(C^(order)(lx)/l^order, S^(order)(lx)/l^order)`.
    fn derivative_at(
        &self,
        order: usize,
        x: &Real,
        absolute: bool,
        basis: impl Fn(&Real, usize) -> (Real, Real) + Copy,
    ) -> Real {
        let own = self.own_derivative_at(order, x, absolute, basis);
        match &self.magnitudes {
            Some(m) if absolute => own.max(&m.own_derivative_at(order, x, true, basis)),
            _ => own,
        }
    }

    fn own_derivative_at(
        &self,
        order: usize,
        x: &Real,
        absolute: bool,
        basis: impl Fn(&Real, usize) -> (Real, Real),
    ) -> Real {
        let prec = self.precision();
        let mut acc = Float::new(prec);
        if order == 0 {
            acc = Float::with_val(prec, &self.a0 / 2u32);
            if absolute {
                acc.abs_mut();
            }
        }
        for (idx, (a, b)) in self.even.iter().zip(&self.odd).enumerate() {
            let l = (idx + 1) as u32;
            let lx = Float::with_val(prec, x * l);
            let (c, s) = basis(&lx, order);
            let mut ta = Float::with_val(prec, a * &c);
            let mut tb = Float::with_val(prec, b * &s);
            if absolute {
                ta.abs_mut();
                tb.abs_mut();
            }
            let mut term = ta + tb;
            if order > 0 {
                term *= Float::with_val(prec, l).pow(order as u32);
            }
            acc += term;
        }
        acc
    }
}

/// `(cos^(k)(t), sin^(k)(t))`.
fn trig_basis(t: &Real, order: usize) -> (Real, Real) {
    let prec = t.prec();
    let c = Float::with_val(prec, t.cos_ref());
    let s = Float::with_val(prec, t.sin_ref());
    match order % 4 {
        0 => (c, s),
        1 => (-s, c),
        2 => (-c, -s),
        _ => (s, -c),
    }
}

/// `(ch^(k)(t), sh^(k)(t))`.
fn hyperbolic_basis(t: &Real, order: usize) -> (Real, Real) {
    let prec = t.prec();
    let c = Float::with_val(prec, t.cosh_ref());
    let s = Float::with_val(prec, t.sinh_ref());
    if order.is_multiple_of(2) {
        (c, s)
    } else {
        (s, c)
    }
}

/// Trigonometric polynomial `a_0/2 + sum (a_l cos lx + b_l sin lx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly(HarmonicCoeffs);

impl TrigPoly {
    pub fn new(a0: Real, cos_coeffs: Vec<Real>, sin_coeffs: Vec<Real>) -> Result<Self, PolyError> {
        HarmonicCoeffs::new(a0, cos_coeffs, sin_coeffs, Family::Trigonometric).map(TrigPoly)
    }

    pub fn degree(&self) -> usize {
        self.0.degree()
    }

    pub fn a0(&self) -> &Real {
        &self.0.a0
    }

    pub fn cos_coeffs(&self) -> &[Real] {
        &self.0.even
    }

    pub fn sin_coeffs(&self) -> &[Real] {
        &self.0.odd
    }
}

/// Exponential polynomial `a_0/2 + sum (a_l ch lx + b_l sh lx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpPoly(HarmonicCoeffs);

impl ExpPoly {
    pub fn new(a0: Real, ch_coeffs: Vec<Real>, sh_coeffs: Vec<Real>) -> Result<Self, PolyError> {
        HarmonicCoeffs::new(a0, ch_coeffs, sh_coeffs, Family::Exponential).map(ExpPoly)
    }

    pub fn degree(&self) -> usize {
        self.0.degree()
    }

    pub fn a0(&self) -> &Real {
        &self.0.a0
    }

    pub fn ch_coeffs(&self) -> &[Real] {
        &self.0.even
    }

    pub fn sh_coeffs(&self) -> &[Real] {
        &self.0.odd
    }
}

/// Distinct roots paired with their multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct RootConfiguration {
    roots: Vec<Real>,
    multiplicities: Vec<u32>,
}

impl RootConfiguration {
    pub fn new(roots: Vec<Real>, multiplicities: Vec<u32>) -> Result<Self, PolyError> {
        if roots.is_empty() {
            return Err(PolyError::InvalidConfiguration("no roots given".into()));
        }
        if roots.len() != multiplicities.len() {
            return Err(PolyError::InvalidConfiguration(format!(
                "{} roots but {} multiplicities",
                roots.len(),
                multiplicities.len()
            )));
        }
        check_finite(&roots)?;
        if let Some(i) = multiplicities.iter().position(|&a| a == 0) {
            return Err(PolyError::InvalidConfiguration(format!(
                "multiplicity of root {i} must be at least 1"
            )));
        }
        for i in 0..roots.len() {
            for j in (i + 1)..roots.len() {
                if roots[i] == roots[j] {
                    return Err(PolyError::InvalidConfiguration(format!(
                        "roots {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(RootConfiguration {
            roots,
            multiplicities,
        })
    }

    /// Builds a configuration from `f64` roots at the given precision.
    pub fn from_f64(
        prec: Precision,
        roots: &[f64],
        multiplicities: &[u32],
    ) -> Result<Self, PolyError> {
        Self::new(
            roots.iter().map(|&r| prec.from_f64(r)).collect(),
            multiplicities.to_vec(),
        )
    }

    pub fn roots(&self) -> &[Real] {
        &self.roots
    }

    pub fn multiplicities(&self) -> &[u32] {
        &self.multiplicities
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn total_multiplicity(&self) -> u32 {
        self.multiplicities.iter().sum()
    }

    pub fn precision(&self) -> u32 {
        self.roots[0].prec()
    }

    /// Degree of the family polynomial with these roots.
    pub fn degree(&self, family: Family) -> Result<usize, PolyError> {
        let total = self.total_multiplicity();
        family.degree_for_multiplicity(total).ok_or_else(|| {
            PolyError::InvalidConfiguration(format!(
                "{family} polynomials need an even multiplicity sum, got {total}"
            ))
        })
    }

    /// `min_{i != j} |x_i - x_j|`, `None` for a single root.
    pub fn min_gap(&self) -> Option<Real> {
        self.pairwise_gaps()
            .min_by(|a, b| a.partial_cmp(b).unwrap())
    }

    /// `max_{i != j} |x_i - x_j|`, `None` for a single root.
    pub fn max_gap(&self) -> Option<Real> {
        self.pairwise_gaps()
            .max_by(|a, b| a.partial_cmp(b).unwrap())
    }

    fn pairwise_gaps(&self) -> impl Iterator<Item = Real> + '_ {
        let r = &self.roots;
        (0..r.len())
            .flat_map(move |i| ((i + 1)..r.len()).map(move |j| crate::real::abs_diff(&r[i], &r[j])))
    }
}

/// A polynomial given by its roots.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredForm {
    pub family: Family,
    pub config: RootConfiguration,
    pub scale: Real,
}

impl FactoredForm {
    /// Unit-scale factored form; checks the family's multiplicity-sum rule.
    pub fn new(family: Family, config: RootConfiguration) -> Result<Self, PolyError> {
        let scale = Float::with_val(config.precision(), 1);
        Self::with_scale(family, config, scale)
    }

    pub fn with_scale(
        family: Family,
        config: RootConfiguration,
        scale: Real,
    ) -> Result<Self, PolyError> {
        config.degree(family)?;
        if scale.is_zero() || !scale.is_finite() {
            return Err(PolyError::InvalidConfiguration(
                "scale must be finite and nonzero".into(),
            ));
        }
        Ok(FactoredForm {
            family,
            config,
            scale,
        })
    }

    fn precision(&self) -> u32 {
        self.config.precision()
    }

    /// `(g(x - r), g'(x - r))` for the family's elementary factor `g`.
    fn factor(&self, x: &Real, r: &Real) -> (Real, Real) {
        let prec = self.precision();
        let t = Float::with_val(prec, x - r);
        match self.family {
            Family::Algebraic => (t, Float::with_val(prec, 1)),
            Family::Trigonometric => {
                let h = t / 2u32;
                let g = Float::with_val(prec, h.sin_ref());
                let dg = Float::with_val(prec, h.cos_ref()) / 2u32;
                (g, dg)
            }
            Family::Exponential => {
                let h = t / 2u32;
                let g = Float::with_val(prec, h.sinh_ref());
                let dg = Float::with_val(prec, h.cosh_ref()) / 2u32;
                (g, dg)
            }
        }
    }

    fn eval_raw(&self, x: &Real) -> Real {
        let mut acc = self.scale.clone();
        for (r, &a) in self.config.roots.iter().zip(&self.config.multiplicities) {
            let (g, _) = self.factor(x, r);
            acc *= g.pow(a);
        }
        acc
    }

    /// Product rule: `sum_j a_j g_j^(a_j - 1) g_j' prod_{k != j} g_k^(a_k)`.
    fn eval_derivative_raw(&self, x: &Real) -> Real {
        let prec = self.precision();
        let factors: Vec<(Real, Real)> = self
            .config
            .roots
            .iter()
            .map(|r| self.factor(x, r))
            .collect();
        let alphas = &self.config.multiplicities;
        let mut total = Float::new(prec);
        for j in 0..factors.len() {
            let (gj, dgj) = &factors[j];
            let mut term = Float::with_val(prec, dgj * alphas[j]);
            term *= gj.clone().pow(alphas[j] - 1);
            for (k, (gk, _)) in factors.iter().enumerate() {
                if k != j {
                    term *= gk.clone().pow(alphas[k]);
                }
            }
            total += term;
        }
        total * &self.scale
    }

    /// Upper bound on `sum |term|` of the expanded coefficient form at `x`:
    /// the natural scale for its rounding error.
    pub fn magnitude_bound(&self, x: &Real) -> Result<Real, PolyError> {
        let prec = self.precision();
        match self.family {
            Family::Algebraic => {
                let ax = x.clone().abs();
                let mut acc = self.scale.clone().abs();
                for (r, &a) in self.config.roots.iter().zip(&self.config.multiplicities) {
                    let f = Float::with_val(prec, &ax + r.clone().abs());
                    acc *= f.pow(a);
                }
                Ok(acc)
            }
            Family::Trigonometric | Family::Exponential => {
                let h = expand_harmonic(self, true);
                let mut acc = Float::with_val(prec, &h.even[0]);
                for l in 1..h.even.len() {
                    let w = if self.family == Family::Exponential {
                        Float::with_val(prec, x * l as u32).cosh()
                    } else {
                        Float::with_val(prec, 1)
                    };
                    acc += Float::with_val(prec, &h.even[l] + &h.odd[l]) * w;
                }
                finite_or_overflow(acc, self.family, x)
            }
        }
    }
}

/// Any of the supported polynomial representations.
#[derive(Debug, Clone, PartialEq)]
pub enum PolyFamily {
    Algebraic(AlgebraicPoly),
    Trigonometric(TrigPoly),
    Exponential(ExpPoly),
    Factored(FactoredForm),
}

impl PolyFamily {
    pub fn family(&self) -> Family {
        match self {
            PolyFamily::Algebraic(_) => Family::Algebraic,
            PolyFamily::Trigonometric(_) => Family::Trigonometric,
            PolyFamily::Exponential(_) => Family::Exponential,
            PolyFamily::Factored(f) => f.family,
        }
    }

    pub fn precision(&self) -> u32 {
        match self {
            PolyFamily::Algebraic(p) => p.precision(),
            PolyFamily::Trigonometric(p) => p.0.precision(),
            PolyFamily::Exponential(p) => p.0.precision(),
            PolyFamily::Factored(f) => f.precision(),
        }
    }

    /// Degree `n` (half the root count for trigonometric/exponential).
    pub fn degree(&self) -> usize {
        match self {
            PolyFamily::Algebraic(p) => p.degree(),
            PolyFamily::Trigonometric(p) => p.degree(),
            PolyFamily::Exponential(p) => p.degree(),
            PolyFamily::Factored(f) => f.config.degree(f.family).unwrap_or(0),
        }
    }

    pub fn is_factored(&self) -> bool {
        matches!(self, PolyFamily::Factored(_))
    }

    pub fn eval(&self, x: &Real) -> Result<Real, PolyError> {
        let v = match self {
            PolyFamily::Factored(f) => f.eval_raw(x),
            _ => self.coefficient_derivative(0, x, false),
        };
        finite_or_overflow(v, self.family(), x)
    }

    pub fn eval_derivative(&self, x: &Real) -> Result<Real, PolyError> {
        let v = match self {
            PolyFamily::Factored(f) => f.eval_derivative_raw(x),
            _ => self.coefficient_derivative(1, x, false),
        };
        finite_or_overflow(v, self.family(), x)
    }

    /// `f^(order)(x)` by analytic differentiation of the coefficient form.
    /// Factored forms are expanded first.
    pub fn nth_derivative(&self, order: usize, x: &Real) -> Result<Real, PolyError> {
        if let PolyFamily::Factored(f) = self {
            return expand_from_roots(f)?.nth_derivative(order, x);
        }
        finite_or_overflow(
            self.coefficient_derivative(order, x, false),
            self.family(),
            x,
        )
    }

    /// `sum |term|` of the `order`-th derivative at `x`: the scale against
    /// which rounding errors in that derivative are measured. Polynomials
    /// produced by [`expand_from_roots`] also account for cancellation during
    /// the expansion itself.
    pub fn term_magnitude(&self, order: usize, x: &Real) -> Result<Real, PolyError> {
        if let PolyFamily::Factored(f) = self {
            return expand_from_roots(f)?.term_magnitude(order, x);
        }
        finite_or_overflow(
            self.coefficient_derivative(order, x, true),
            self.family(),
            x,
        )
    }

    fn coefficient_derivative(&self, order: usize, x: &Real, absolute: bool) -> Real {
        match self {
            PolyFamily::Algebraic(p) => p.derivative_at(order, x, absolute),
            PolyFamily::Trigonometric(p) => p.0.derivative_at(order, x, absolute, trig_basis),
            PolyFamily::Exponential(p) => p.0.derivative_at(order, x, absolute, hyperbolic_basis),
            PolyFamily::Factored(_) => unreachable!("factored forms are handled by the caller"),
        }
    }
}

fn check_finite(values: &[Real]) -> Result<(), PolyError> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(PolyError::InvalidPolynomial(format!(
            "non-finite coefficient {v}"
        ))),
        None => Ok(()),
    }
}

fn finite_or_overflow(v: Real, family: Family, x: &Real) -> Result<Real, PolyError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(PolyError::Overflow {
            family,
            x: x.to_string_radix(10, Some(20)),
        })
    }
}

/// `Q_i'(x)/Q_i(x)` for `Q_i = prod_{j != exclude} g(x - x_j)^a_j`, as a sum
/// of per-root terms (`Q_i` itself is never formed):
///
/// * algebraic: `sum a_j / (x - x_j)`
/// * trigonometric: `sum (a_j/2) cot((x - x_j)/2)`
/// * exponential: `sum (a_j/2) coth((x - x_j)/2)`
///
/// An approximation closer to `x` than `2^-(prec/2)` is reported as a
/// collision between `exclude` and that index.
pub fn log_derivative_q(
    family: Family,
    approximations: &[Real],
    multiplicities: &[u32],
    exclude: usize,
    x: &Real,
) -> Result<Real, PolyError> {
    let prec = x.prec();
    let threshold = Precision::new(prec)
        .map(|p| p.pow2(-((prec / 2) as i32)))
        .unwrap_or_else(|_| Float::with_val(prec, f64::EPSILON));
    let mut sum = Float::new(prec);
    for (j, (xj, &a)) in approximations.iter().zip(multiplicities).enumerate() {
        if j == exclude {
            continue;
        }
        let t = Float::with_val(prec, x - xj);
        if Float::with_val(prec, t.abs_ref()) < threshold {
            return Err(PolyError::Collision {
                i: exclude,
                j,
                gap: t.abs().to_string_radix(10, Some(6)),
            });
        }
        let term = match family {
            Family::Algebraic => Float::with_val(prec, a) / t,
            Family::Trigonometric => (t / 2u32).cot() * a / 2u32,
            Family::Exponential => (t / 2u32).coth() * a / 2u32,
        };
        sum += term;
    }
    Ok(sum)
}

/// Cos/sin (or ch/sh) coefficient arrays indexed by frequency `0..=n`;
/// `even[0]` is the plain constant term and `odd[0]` is always zero.
#[derive(Debug, Clone)]
struct Harmonics {
    even: Vec<Real>,
    odd: Vec<Real>,
}

impl Harmonics {
    fn zeros(prec: u32, n: usize) -> Self {
        Harmonics {
            even: vec![Float::new(prec); n + 1],
            odd: vec![Float::new(prec); n + 1],
        }
    }

    fn degree(&self) -> usize {
        self.even.len() - 1
    }

    /// Product via product-to-sum identities. The only family difference is
    /// the sign of the `S(l) S(m)` identity:
    /// `sin l sin m = (cos(l-m) - cos(l+m))/2`, `sh l sh m = (ch(l+m) - ch(l-m))/2`.
    /// With `absolute`, every contribution is added with a plus sign on
    /// absolute values, giving a coefficientwise bound of the exact product.
    fn mul(&self, other: &Harmonics, family: Family, absolute: bool) -> Harmonics {
        let prec = self.even[0].prec();
        let n = self.degree() + other.degree();
        let mut out = Harmonics::zeros(prec, n);
        let half = |a: &Real, b: &Real| -> Real {
            let mut p = Float::with_val(prec, a * b) / 2u32;
            if absolute {
                p.abs_mut();
            }
            p
        };
        let sign = |v: Real, negative: bool| if negative && !absolute { -v } else { v };
        for l in 0..=self.degree() {
            for m in 0..=other.degree() {
                let sum = l + m;
                let diff = l.abs_diff(m);
                // C(l) C(m) = (C(l+m) + C(|l-m|)) / 2
                if !self.even[l].is_zero() && !other.even[m].is_zero() {
                    let p = half(&self.even[l], &other.even[m]);
                    out.even[sum] += &p;
                    out.even[diff] += p;
                }
                // S(l) S(m)
                if !self.odd[l].is_zero() && !other.odd[m].is_zero() {
                    let p = half(&self.odd[l], &other.odd[m]);
                    let sum_negative = family == Family::Trigonometric;
                    out.even[sum] += sign(p.clone(), sum_negative);
                    out.even[diff] += sign(p, !sum_negative);
                }
                // C(l) S(m) = (S(l+m) - S(l-m)) / 2,  S(l) C(m) = (S(l+m) + S(l-m)) / 2
                if !self.even[l].is_zero() && !other.odd[m].is_zero() {
                    let p = half(&self.even[l], &other.odd[m]);
                    out.odd[sum] += &p;
                    out.add_odd(l as isize - m as isize, sign(p, true), absolute);
                }
                if !self.odd[l].is_zero() && !other.even[m].is_zero() {
                    let p = half(&self.odd[l], &other.even[m]);
                    out.odd[sum] += &p;
                    out.add_odd(l as isize - m as isize, p, absolute);
                }
            }
        }
        out
    }

    /// Adds `v * S(k)` using `S(-k) = -S(k)` and `S(0) = 0`.
    fn add_odd(&mut self, k: isize, v: Real, absolute: bool) {
        match k.cmp(&0) {
            std::cmp::Ordering::Greater => self.odd[k as usize] += v,
            std::cmp::Ordering::Less if absolute => self.odd[k.unsigned_abs()] += v,
            std::cmp::Ordering::Less => self.odd[k.unsigned_abs()] -= v,
            std::cmp::Ordering::Equal => {}
        }
    }
}

/// Degree-1 harmonic polynomial equal to `g((x - a)/2) g((x - b)/2)`:
///
/// * `sin u sin v = cos((a-b)/2)/2 - cos(s) cos x / 2 - sin(s) sin x / 2`
/// * `sh u sh v = -ch((a-b)/2)/2 + ch(s) ch x / 2 - sh(s) sh x / 2`
///
/// with `s = (a+b)/2`.
fn pair_factor(family: Family, a: &Real, b: &Real, absolute: bool) -> Harmonics {
    let prec = a.prec();
    let mut h = Harmonics::zeros(prec, 1);
    let s = Float::with_val(prec, a + b) / 2u32;
    let d = Float::with_val(prec, a - b) / 2u32;
    match family {
        Family::Trigonometric => {
            h.even[0] = d.cos() / 2u32;
            h.even[1] = -Float::with_val(prec, s.cos_ref()) / 2u32;
            h.odd[1] = -s.sin() / 2u32;
        }
        Family::Exponential => {
            h.even[0] = -d.cosh() / 2u32;
            h.even[1] = Float::with_val(prec, s.cosh_ref()) / 2u32;
            h.odd[1] = -s.sinh() / 2u32;
        }
        Family::Algebraic => unreachable!("pair factors are harmonic only"),
    }
    if absolute {
        for v in h.even.iter_mut().chain(h.odd.iter_mut()) {
            v.abs_mut();
        }
    }
    h
}

fn expand_harmonic(form: &FactoredForm, absolute: bool) -> Harmonics {
    let prec = form.precision();
    let flat: Vec<&Real> = form
        .config
        .roots
        .iter()
        .zip(&form.config.multiplicities)
        .flat_map(|(r, &a)| std::iter::repeat_n(r, a as usize))
        .collect();
    let mut acc = Harmonics::zeros(prec, 0);
    acc.even[0] = if absolute {
        form.scale.clone().abs()
    } else {
        form.scale.clone()
    };
    for pair in flat.chunks(2) {
        let factor = pair_factor(form.family, pair[0], pair[1], absolute);
        acc = acc.mul(&factor, form.family, absolute);
    }
    acc
}

/// Expands a factored form into coefficient form.
///
/// Algebraic forms are expanded by repeated convolution with `(x - x_j)`;
/// trigonometric and exponential forms by pairing half-angle factors and
/// multiplying with product-to-sum identities. The result is accepted only if
/// it reproduces the factored values at a set of probe points.
pub fn expand_from_roots(form: &FactoredForm) -> Result<PolyFamily, PolyError> {
    let prec = form.precision();
    form.config.degree(form.family)?;
    let expanded = match form.family {
        Family::Algebraic => {
            // power coefficients, highest degree first
            let mut c: Vec<Real> = vec![form.scale.clone()];
            for (r, &a) in form.config.roots.iter().zip(&form.config.multiplicities) {
                for _ in 0..a {
                    let mut next = c.clone();
                    next.push(Float::new(prec));
                    for k in 0..c.len() {
                        next[k + 1] -= Float::with_val(prec, &c[k] * r);
                    }
                    c = next;
                }
            }
            let lead = c[0].clone();
            if lead != 1 {
                return Err(PolyError::InvalidConfiguration(
                    "algebraic expansion requires unit scale (monic form)".into(),
                ));
            }
            // same convolution with |x_j| and plus signs
            let mut m: Vec<Real> = vec![Float::with_val(prec, 1)];
            for (r, &a) in form.config.roots.iter().zip(&form.config.multiplicities) {
                let r_abs = Float::with_val(prec, r.abs_ref());
                for _ in 0..a {
                    let mut next = m.clone();
                    next.push(Float::new(prec));
                    for k in 0..m.len() {
                        next[k + 1] += Float::with_val(prec, &m[k] * &r_abs);
                    }
                    m = next;
                }
            }
            let mut poly = AlgebraicPoly::monic(c.into_iter().skip(1).collect())?;
            poly.magnitudes = Some(m.into_iter().skip(1).collect());
            PolyFamily::Algebraic(poly)
        }
        Family::Trigonometric | Family::Exponential => {
            let to_coeffs = |h: Harmonics| {
                let a0 = Float::with_val(prec, &h.even[0] * 2u32);
                HarmonicCoeffs::new(a0, h.even[1..].to_vec(), h.odd[1..].to_vec(), form.family)
            };
            let mut coeffs = to_coeffs(expand_harmonic(form, false))?;
            coeffs.magnitudes = Some(Box::new(to_coeffs(expand_harmonic(form, true))?));
            if form.family == Family::Trigonometric {
                PolyFamily::Trigonometric(TrigPoly(coeffs))
            } else {
                PolyFamily::Exponential(ExpPoly(coeffs))
            }
        }
    };
    certify_expansion(form, &expanded)?;
    Ok(expanded)
}

fn certify_expansion(form: &FactoredForm, expanded: &PolyFamily) -> Result<(), PolyError> {
    let prec = form.precision();
    let p = Precision::new(prec).unwrap_or(Precision::DOUBLE);
    let roots = form.config.roots();
    let lo = roots
        .iter()
        .min_by(|a, b| a.partial_cmp(b).unwrap())
        .unwrap()
        .clone()
        - 1u32;
    let hi = roots
        .iter()
        .max_by(|a, b| a.partial_cmp(b).unwrap())
        .unwrap()
        .clone()
        + 1u32;
    let tol = p.pow2(24 - prec as i32);
    const PROBES: u32 = 7;
    for k in 0..PROBES {
        // irregular interior points so probes never land on a root by design
        let frac = (f64::from(k) + 0.377_215_6) / f64::from(PROBES);
        let x = Float::with_val(prec, &hi - &lo) * frac + &lo;
        let want = form.eval_raw(&x);
        let got = expanded.eval(&x)?;
        let bound = form.magnitude_bound(&x)? * &tol;
        if Float::with_val(prec, &got - &want).abs() > bound {
            return Err(PolyError::ExpansionMismatch {
                family: form.family,
                x: x.to_string_radix(10, Some(12)),
            });
        }
    }
    Ok(())
}
