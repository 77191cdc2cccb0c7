//! Independent verification paths: a Newton-with-multiplicity baseline, a
//! separately written classical Ehrlich step, and a derivative-based root
//! certificate.

use std::fmt;

use rug::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ehrlich::{residual_noise, SolveSettings, StepError, SweepMode};
use crate::poly::{expand_from_roots, Family, PolyError, PolyFamily, RootConfiguration};
use crate::real::{Precision, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("derivative vanishes at iterate {k}")]
    DegenerateDerivative { k: usize },
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Iterates of the single-root baseline `x <- x - a f(x)/f'(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonTrace {
    /// `x_0, x_1, ...`
    pub iterates: Vec<Real>,
    /// Signed corrections, one per step.
    pub corrections: Vec<Real>,
    pub converged: bool,
}

impl NewtonTrace {
    pub fn last(&self) -> &Real {
        self.iterates.last().expect("trace holds the initial value")
    }

    pub fn errors(&self, truth: &Real) -> Vec<Real> {
        self.iterates
            .iter()
            .map(|x| crate::real::abs_diff(x, truth))
            .collect()
    }
}

/// Newton's method with known multiplicity for one root. Stops when the
/// correction drops to `correction_tolerance * max(1, |x|)` or the residual is
/// within round-off of zero.
pub fn newton_multiplicity_solve(
    poly: &PolyFamily,
    alpha: u32,
    initial: &Real,
    settings: &SolveSettings,
) -> Result<NewtonTrace, OracleError> {
    let prec = settings.precision.bits();
    let mut x = Float::with_val(prec, initial);
    let mut trace = NewtonTrace {
        iterates: vec![x.clone()],
        corrections: vec![],
        converged: false,
    };
    for k in 0..settings.max_iterations {
        let f = poly.eval(&x)?;
        if Float::with_val(prec, f.abs_ref()) <= residual_noise(poly, &x)? {
            trace.converged = true;
            break;
        }
        let df = poly.eval_derivative(&x)?;
        if df.is_zero() || !df.is_normal() {
            return Err(OracleError::DegenerateDerivative { k });
        }
        let correction = f * alpha / df;
        x -= &correction;
        let small = Float::with_val(prec, correction.abs_ref())
            <= Float::with_val(prec, x.abs_ref()).max(&Float::with_val(prec, 1))
                * &settings.correction_tolerance;
        trace.iterates.push(x.clone());
        trace.corrections.push(correction);
        if small {
            trace.converged = true;
            break;
        }
    }
    Ok(trace)
}

/// One classical (simple-root) Ehrlich step written in its textbook form
/// `x_i - N_i / (1 - N_i S_i)` with Newton correction `N_i = f/f'` and
/// coupling `S_i = sum_{j != i} k(x_i - x_j)`, where `k(t)` is `1/t`,
/// `cot(t/2)/2` or `coth(t/2)/2` by family.
pub fn classical_ehrlich_step(
    poly: &PolyFamily,
    approximations: &[Real],
    mode: SweepMode,
) -> Result<Vec<Real>, StepError> {
    let family = poly.family();
    let mut next = approximations.to_vec();
    for i in 0..approximations.len() {
        let xi = &approximations[i];
        let prec = xi.prec();
        let collision = Float::with_val(prec, 1) >> (prec / 2);
        let mut coupling = Float::new(prec);
        for j in 0..approximations.len() {
            if j == i {
                continue;
            }
            let xj = match mode {
                SweepMode::Simultaneous => &approximations[j],
                SweepMode::Sequential => &next[j],
            };
            let t = Float::with_val(prec, xi - xj);
            if Float::with_val(prec, t.abs_ref()) < collision {
                return Err(StepError::Collision {
                    i,
                    j,
                    gap: t.abs().to_string_radix(10, Some(6)),
                });
            }
            coupling += match family {
                Family::Algebraic => t.recip(),
                Family::Trigonometric => {
                    let h = t / 2u32;
                    Float::with_val(prec, h.cos_ref()) / h.sin() / 2u32
                }
                Family::Exponential => {
                    let h = t / 2u32;
                    Float::with_val(prec, h.cosh_ref()) / h.sinh() / 2u32
                }
            };
        }
        let f = poly.eval(xi)?;
        if f.is_zero() {
            continue;
        }
        let df = poly.eval_derivative(xi)?;
        let newton = f / df;
        let denom = Float::with_val(prec, 1) - Float::with_val(prec, &newton * &coupling);
        let moved = Float::with_val(prec, xi - newton / denom);
        if !moved.is_finite() {
            return Err(StepError::NonFinite { i });
        }
        next[i] = moved;
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Requirement {
    /// `|f^(j)(r)| <= tolerance * scale`
    Vanish,
    /// `|f^(a)(r)|` above round-off: the multiplicity is not an undercount.
    NonVanish,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeCheck {
    pub root: usize,
    pub order: usize,
    pub value: Real,
    pub threshold: Real,
    pub requirement: Requirement,
    pub passed: bool,
}

impl fmt::Display for DerivativeCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (rel, mark) = match (self.requirement, self.passed) {
            (Requirement::Vanish, true) => ("<=", "ok  "),
            (Requirement::Vanish, false) => ("<=", "FAIL"),
            (Requirement::NonVanish, true) => (">", "ok  "),
            (Requirement::NonVanish, false) => (">", "FAIL"),
        };
        write!(
            f,
            "{mark} root {} |f^({})| = {:.3e} {rel} {:.3e}",
            self.root,
            self.order,
            self.value.to_f64(),
            self.threshold.to_f64()
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationOutcome {
    /// `|f(x_i)|` per claimed root.
    pub residuals: Vec<Real>,
    /// Per root, the largest `|f^(j)(x_i)| / scale_j` over `j < a_i`.
    pub derivative_checks: Vec<Real>,
    pub passed: bool,
    pub details: Vec<DerivativeCheck>,
}

impl VerificationOutcome {
    pub fn failures(&self) -> impl Iterator<Item = &DerivativeCheck> {
        self.details.iter().filter(|c| !c.passed)
    }
}

/// Default certificate tolerance `2^(8 - bits / max_multiplicity)`: the
/// vanishing derivatives of a root of multiplicity `a` can only be resolved
/// to about the `a`-th root of the working precision.
pub fn default_verify_tolerance(precision: Precision, max_multiplicity: u32) -> Real {
    let exp = 8 - (precision.bits() / max_multiplicity.max(1)) as i32;
    precision.pow2(exp.min(-1))
}

/// Certifies claimed roots through analytic derivatives of the coefficient
/// form: for a root `r` of multiplicity `a`, `f^(j)(r)` must vanish to within
/// `tolerance * scale_j` for `j < a` and `f^(a)(r)` must stand out from
/// round-off. `scale_j` is the sum of absolute term values of `f^(j)` at `r`.
pub fn verify_roots(
    poly: &PolyFamily,
    claimed: &RootConfiguration,
    tolerance: &Real,
) -> Result<VerificationOutcome, PolyError> {
    let expanded;
    let poly = match poly {
        PolyFamily::Factored(f) => {
            expanded = expand_from_roots(f)?;
            &expanded
        }
        other => other,
    };
    let prec = poly.precision();
    let mut residuals = Vec::with_capacity(claimed.len());
    let mut derivative_checks = Vec::with_capacity(claimed.len());
    let mut details = Vec::new();
    for (i, (r, &alpha)) in claimed
        .roots()
        .iter()
        .zip(claimed.multiplicities())
        .enumerate()
    {
        let r = Float::with_val(prec, r);
        residuals.push(poly.eval(&r)?.abs());
        let mut worst = Float::new(prec);
        for order in 0..=alpha as usize {
            let value = poly.nth_derivative(order, &r)?.abs();
            let scale = poly.term_magnitude(order, &r)?;
            let (threshold, requirement, passed) = if order < alpha as usize {
                if !scale.is_zero() {
                    worst = worst.max(&Float::with_val(prec, &value / &scale));
                }
                let t = Float::with_val(prec, &scale * tolerance);
                let ok = value <= t;
                (t, Requirement::Vanish, ok)
            } else {
                let t = scale >> (prec - 8);
                let ok = value > t;
                (t, Requirement::NonVanish, ok)
            };
            details.push(DerivativeCheck {
                root: i,
                order,
                value,
                threshold,
                requirement,
                passed,
            });
        }
        derivative_checks.push(worst);
    }
    let passed = details.iter().all(|d| d.passed);
    Ok(VerificationOutcome {
        residuals,
        derivative_checks,
        passed,
        details,
    })
}
