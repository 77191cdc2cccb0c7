//! Convergence hypotheses and empirical order estimation.
//!
//! The three `check_theorem*` predicates evaluate the sufficient conditions
//! under which the iteration started within `c*q` of the roots keeps every
//! iterate within `c*q^(3^k)`. They return every clause with its evaluated
//! sides so callers can see the margin, not just a boolean.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;

use rug::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{Family, PolyError, PolyFamily, RootConfiguration};
use crate::real::{max_of, Precision, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TheoryError {
    #[error("theorem parameters need at least two distinct roots")]
    TooFewRoots,
    #[error("kappa must be given for trigonometric polynomials and only for them")]
    KappaMismatch,
    #[error("non-finite theorem parameter `{0}`")]
    NonFinite(&'static str),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("no window of at least {MIN_WINDOW} strictly decreasing errors above the floor")]
    InsufficientData,
}

/// Constants feeding the convergence hypotheses of one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremParams {
    pub family: Family,
    pub c: f64,
    pub q: f64,
    /// `min_{i != j} |x_i - x_j|` of the true roots.
    pub d: f64,
    /// `max_{i != j} |x_i - x_j|` of the true roots.
    pub max_gap: f64,
    /// Separation constant of the trigonometric hypothesis.
    pub kappa: Option<f64>,
    pub n: usize,
    pub multiplicities: Vec<u32>,
}

impl TheoremParams {
    /// Derives `d`, the maximal gap and `n` from the true root configuration.
    pub fn new(
        family: Family,
        roots: &RootConfiguration,
        c: f64,
        q: f64,
        kappa: Option<f64>,
    ) -> Result<Self, TheoryError> {
        if roots.len() < 2 {
            return Err(TheoryError::TooFewRoots);
        }
        if kappa.is_some() != (family == Family::Trigonometric) {
            return Err(TheoryError::KappaMismatch);
        }
        for (name, v) in [("c", c), ("q", q), ("kappa", kappa.unwrap_or(0.0))] {
            if !v.is_finite() {
                return Err(TheoryError::NonFinite(name));
            }
        }
        let n = roots.degree(family)?;
        Ok(TheoremParams {
            family,
            c,
            q,
            d: roots.min_gap().expect("two roots").to_f64(),
            max_gap: roots.max_gap().expect("two roots").to_f64(),
            kappa,
            n,
            multiplicities: roots.multiplicities().to_vec(),
        })
    }

    /// Same configuration with a different `c`.
    pub fn with_c(&self, c: f64) -> Self {
        TheoremParams { c, ..self.clone() }
    }

    pub fn with_kappa(&self, kappa: f64) -> Self {
        TheoremParams {
            kappa: Some(kappa),
            ..self.clone()
        }
    }
}

/// One strict inequality `lhs < rhs` of a hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub label: String,
    /// Root index for the per-root inequalities.
    pub root: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl Clause {
    fn less(label: impl Into<String>, root: Option<usize>, lhs: f64, rhs: f64) -> Self {
        Clause {
            label: label.into(),
            root,
            lhs,
            rhs,
            holds: lhs < rhs,
        }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.holds { "ok  " } else { "FAIL" };
        write!(f, "{mark} {}", self.label)?;
        if let Some(i) = self.root {
            write!(f, " [i={i}]")?;
        }
        write!(f, ": {:.6e} < {:.6e}", self.lhs, self.rhs)
    }
}

/// Per-clause outcome of a hypothesis check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub family: Family,
    pub clauses: Vec<Clause>,
    /// Derived quantities such as `A` or `S`.
    pub derived: Vec<(String, f64)>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.holds)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter().filter(|c| !c.holds)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} hypothesis: {}",
            self.family,
            if self.passed() { "pass" } else { "fail" }
        )?;
        for (name, v) in &self.derived {
            writeln!(f, "  {name} = {v:.6e}")?;
        }
        for c in &self.clauses {
            writeln!(f, "  {c}")?;
        }
        Ok(())
    }
}

fn common_clauses(p: &TheoremParams) -> Vec<Clause> {
    vec![
        Clause::less("q > 0", None, 0.0, p.q),
        Clause::less("q < 1", None, p.q, 1.0),
        Clause::less("c > 0", None, 0.0, p.c),
        Clause::less("d - 2c > 0", None, 0.0, p.d - 2.0 * p.c),
    ]
}

/// Algebraic hypothesis: `0 < q < 1`, `c > 0`, `d - 2c > 0` and for every root
/// `0 < c^2 (n - 3a_i) + c (n + (3d - 1) a_i) < d^2 a_i`.
pub fn check_theorem1(p: &TheoremParams) -> Verdict {
    let n = p.n as f64;
    let (c, d) = (p.c, p.d);
    let mut clauses = common_clauses(p);
    for (i, &a) in p.multiplicities.iter().enumerate() {
        let a = f64::from(a);
        let middle = c * c * (n - 3.0 * a) + c * (n + (3.0 * d - 1.0) * a);
        clauses.push(Clause::less(
            "0 < c^2(n - 3a_i) + c(n + (3d - 1)a_i)",
            Some(i),
            0.0,
            middle,
        ));
        clauses.push(Clause::less(
            "c^2(n - 3a_i) + c(n + (3d - 1)a_i) < d^2 a_i",
            Some(i),
            middle,
            d * d * a,
        ));
    }
    Verdict {
        family: Family::Algebraic,
        clauses,
        derived: vec![],
    }
}

/// Trigonometric hypothesis with `A = min{|sin(kappa/2)|, |sin(d/2 - c)|}`:
/// `0 < q < 1`, `c > 0`, `2c < kappa`, `d - 2c > 0`,
/// `max gap < 2pi - 2kappa` and `c^2 (4n + a_i (9A^2/8 - 2)) < A^2 a_i`.
pub fn check_theorem2(p: &TheoremParams) -> Verdict {
    let kappa = p.kappa.unwrap_or(f64::NAN);
    let n = p.n as f64;
    let c = p.c;
    let a_const = (kappa / 2.0).sin().abs().min((p.d / 2.0 - c).sin().abs());
    let mut clauses = common_clauses(p);
    clauses.push(Clause::less("kappa > 0", None, 0.0, kappa));
    clauses.push(Clause::less("2c < kappa", None, 2.0 * c, kappa));
    clauses.push(Clause::less(
        "max gap < 2pi - 2kappa",
        None,
        p.max_gap,
        2.0 * PI - 2.0 * kappa,
    ));
    let a2 = a_const * a_const;
    for (i, &a) in p.multiplicities.iter().enumerate() {
        let a = f64::from(a);
        clauses.push(Clause::less(
            "c^2(4n + a_i(9A^2/8 - 2)) < A^2 a_i",
            Some(i),
            c * c * (4.0 * n + a * (9.0 * a2 / 8.0 - 2.0)),
            a2 * a,
        ));
    }
    Verdict {
        family: Family::Trigonometric,
        clauses,
        derived: vec![("A".into(), a_const)],
    }
}

/// Exponential hypothesis with `S = sh((d - 2c)/2)`: `0 < q < 1`, `c > 0`,
/// `d - 2c > 0` and `c^2 (4n + (S^2 - 2) a_i) < S^2 a_i`.
pub fn check_theorem3(p: &TheoremParams) -> Verdict {
    let n = p.n as f64;
    let c = p.c;
    let s = ((p.d - 2.0 * c) / 2.0).sinh();
    let s2 = s * s;
    let mut clauses = common_clauses(p);
    for (i, &a) in p.multiplicities.iter().enumerate() {
        let a = f64::from(a);
        clauses.push(Clause::less(
            "c^2(4n + (S^2 - 2)a_i) < S^2 a_i",
            Some(i),
            c * c * (4.0 * n + (s2 - 2.0) * a),
            s2 * a,
        ));
    }
    Verdict {
        family: Family::Exponential,
        clauses,
        derived: vec![("S".into(), s)],
    }
}

/// Dispatches on `params.family`.
pub fn check_theorem(params: &TheoremParams) -> Verdict {
    match params.family {
        Family::Algebraic => check_theorem1(params),
        Family::Trigonometric => check_theorem2(params),
        Family::Exponential => check_theorem3(params),
    }
}

/// The conclusion `c * q^(3^k)` bounding the error of iterate `k`.
pub fn cubic_error_bound(c: f64, q: f64, k: u32) -> f64 {
    c * q.powf(3f64.powi(k as i32))
}

/// Minimum number of consecutive decreasing errors needed for an estimate.
pub const MIN_WINDOW: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderEstimate {
    /// Last per-step order in the window.
    pub order: f64,
    /// Indices of the error entries used.
    pub window: Range<usize>,
    /// `p_k = log(e_{k+1}/e_k) / log(e_k/e_{k-1})` across the window.
    pub per_step_orders: Vec<f64>,
}

/// Order estimate from a sequence of error magnitudes, using every positive
/// entry.
pub fn estimate_order(errors: &[Real]) -> Result<OrderEstimate, TheoryError> {
    estimate_order_above(errors, None)
}

/// Order estimate ignoring entries at or below `floor` (round-off saturated).
///
/// The window is the last run of at least [`MIN_WINDOW`] consecutive,
/// strictly decreasing entries above the floor.
pub fn estimate_order_above(
    errors: &[Real],
    floor: Option<&Real>,
) -> Result<OrderEstimate, TheoryError> {
    let usable = |e: &Real| e.is_finite() && *e > 0 && floor.is_none_or(|f| e > f);
    let mut best: Option<Range<usize>> = None;
    let mut start = 0;
    while start < errors.len() {
        if !usable(&errors[start]) {
            start += 1;
            continue;
        }
        let mut end = start + 1;
        while end < errors.len() && usable(&errors[end]) && errors[end] < errors[end - 1] {
            end += 1;
        }
        if end - start >= MIN_WINDOW {
            best = Some(start..end);
        }
        start = end;
    }
    let window = best.ok_or(TheoryError::InsufficientData)?;
    let w = &errors[window.clone()];
    let per_step_orders: Vec<f64> = w
        .windows(3)
        .map(|t| {
            let prec = t[0].prec().max(t[1].prec()).max(t[2].prec());
            let num = Float::with_val(prec, &t[2] / &t[1]).ln();
            let den = Float::with_val(prec, &t[1] / &t[0]).ln();
            (num / den).to_f64()
        })
        .collect();
    Ok(OrderEstimate {
        order: *per_step_orders
            .last()
            .expect("window has at least three entries"),
        window,
        per_step_orders,
    })
}

/// Accuracy below which an approximation of a root of multiplicity `alpha`
/// cannot be resolved, because evaluation round-off swamps `f` there.
///
/// For coefficient forms this is `(2^8 eps M / |f^(alpha)(x)/alpha!|)^(1/alpha)`
/// with `M` the sum of absolute term values at `x`. Factored forms evaluate
/// with small relative error, so their floor is `2^8 eps max(1, |x|)`.
pub fn attainable_accuracy(poly: &PolyFamily, x: &Real, alpha: u32) -> Result<Real, PolyError> {
    let prec = poly.precision();
    let p = Precision::new(prec).unwrap_or(Precision::DOUBLE);
    let noise = p.pow2(8 - prec as i32);
    let scale = Float::with_val(prec, x.abs_ref()).max(&p.one());
    if poly.is_factored() {
        return Ok(noise * scale);
    }
    let magnitude = poly.term_magnitude(0, x)?;
    let mut leading = poly.nth_derivative(alpha as usize, x)?.abs();
    for f in 2..=alpha {
        leading /= f;
    }
    let relative_floor = noise.clone() * scale;
    if leading.is_zero() {
        return Ok(relative_floor);
    }
    let floor = (noise * magnitude / leading).root(alpha);
    Ok(floor.max(&relative_floor))
}

/// Largest [`attainable_accuracy`] over a set of roots: errors at or below it
/// are round-off saturated.
pub fn error_floor(
    poly: &PolyFamily,
    roots: &[Real],
    multiplicities: &[u32],
) -> Result<Real, PolyError> {
    let floors = roots
        .iter()
        .zip(multiplicities)
        .map(|(x, &a)| attainable_accuracy(poly, x, a))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(max_of(&floors).unwrap_or_else(|| Float::new(poly.precision())))
}
