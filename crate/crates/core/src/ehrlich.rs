//! The simultaneous iteration for roots of known multiplicity.
//!
//! For every approximation `x_i` with multiplicity `a_i`,
//!
//! ```text
//! x_i <- x_i - a_i f(x_i) / (f'(x_i) - f(x_i) Q_i'(x_i)/Q_i(x_i))
//! ```
//!
//! where `Q_i` is the product of the family's elementary factor over all other
//! approximations raised to their multiplicities. Only `Q_i'/Q_i` is ever
//! computed (see [`log_derivative_q`]). With all multiplicities equal to one
//! the update is the classical Obreshkoff-Ehrlich step.

use std::fmt;
use std::str::FromStr;

use rug::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::convergence::{
    attainable_accuracy, error_floor, estimate_order_above, OrderEstimate, TheoryError,
};
use crate::poly::{log_derivative_q, Family, PolyError, PolyFamily, RootConfiguration};
use crate::real::{max_of, Precision, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("invalid solver input: {0}")]
    InvalidInput(String),
    #[error("approximations {i} and {j} collide (|x_i - x_j| = {gap})")]
    Collision { i: usize, j: usize, gap: String },
    #[error("degenerate denominator for root {i}")]
    DegenerateDenominator { i: usize },
    #[error("non-finite value while updating root {i}")]
    NonFinite { i: usize },
    #[error(transparent)]
    Poly(PolyError),
}

impl From<PolyError> for StepError {
    fn from(e: PolyError) -> Self {
        match e {
            PolyError::Collision { i, j, gap } => StepError::Collision { i, j, gap },
            other => StepError::Poly(other),
        }
    }
}

/// Whether the coupling term of root `i` sees the incoming approximations of
/// all other roots (Jacobi) or the already-updated ones for `j < i`
/// (Gauss-Seidel).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    #[default]
    Simultaneous,
    Sequential,
}

impl FromStr for SweepMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simultaneous" => Ok(SweepMode::Simultaneous),
            "sequential" => Ok(SweepMode::Sequential),
            other => Err(format!(
                "unknown sweep mode `{other}` (expected simultaneous or sequential)"
            )),
        }
    }
}

impl fmt::Display for SweepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepMode::Simultaneous => "simultaneous",
            SweepMode::Sequential => "sequential",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveSettings {
    pub max_iterations: usize,
    /// Correction size, relative to `max(1, |x_i|)`, below which a root is
    /// considered converged.
    pub correction_tolerance: Real,
    pub sweep: SweepMode,
    pub precision: Precision,
}

impl SolveSettings {
    pub const DEFAULT_MAX_ITERATIONS: usize = 50;

    /// Defaults: 50 iterations, tolerance `2^-(bits - 8)`, simultaneous sweep.
    pub fn new(precision: Precision) -> Self {
        SolveSettings {
            max_iterations: Self::DEFAULT_MAX_ITERATIONS,
            correction_tolerance: precision.pow2(8 - precision.bits() as i32),
            sweep: SweepMode::Simultaneous,
            precision,
        }
    }

    pub fn validate(&self) -> Result<(), StepError> {
        if self.max_iterations == 0 {
            return Err(StepError::InvalidInput(
                "max_iterations must be at least 1".into(),
            ));
        }
        if self.correction_tolerance <= 0 || !self.correction_tolerance.is_finite() {
            return Err(StepError::InvalidInput(
                "correction tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One row of the iteration trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub approximations: Vec<Real>,
    /// `f(x_i)` at these approximations.
    pub residuals: Vec<Real>,
    /// Signed corrections that produced these approximations; empty for `k = 0`.
    pub corrections: Vec<Real>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationState {
    pub approximations: Vec<Real>,
    pub k: usize,
    /// Magnitudes of the last corrections (empty before the first step).
    pub corrections: Vec<Real>,
    pub trace: Vec<TraceRecord>,
}

impl IterationState {
    /// Initial state; records residuals of the starting approximations.
    pub fn new(poly: &PolyFamily, initial: Vec<Real>) -> Result<Self, StepError> {
        let residuals = residuals(poly, &initial)?;
        Ok(IterationState {
            trace: vec![TraceRecord {
                k: 0,
                approximations: initial.clone(),
                residuals,
                corrections: vec![],
            }],
            approximations: initial,
            k: 0,
            corrections: vec![],
        })
    }

    fn advance(&mut self, update: Update) {
        self.k += 1;
        self.corrections = update.corrections.iter().map(|c| c.clone().abs()).collect();
        self.approximations = update.approximations.clone();
        self.trace.push(TraceRecord {
            k: self.k,
            approximations: update.approximations,
            residuals: update.residuals,
            corrections: update.corrections,
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    Collision,
    Diverged,
    Nonfinite,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::MaxIterations => "max_iterations",
            Termination::Collision => "collision",
            Termination::Diverged => "diverged",
            Termination::Nonfinite => "nonfinite",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub final_approximations: Vec<Real>,
    pub iterations_used: usize,
    pub termination: Termination,
    pub trace: Vec<TraceRecord>,
    /// Order estimated from the correction magnitudes of the trace.
    pub estimated_order: Option<OrderEstimate>,
    /// Step error that ended the solve, if any.
    pub failure: Option<StepError>,
}

impl SolveReport {
    /// `max_i |x_i^[k] - truth_i|` for every trace row.
    pub fn error_history(&self, truth: &[Real]) -> Vec<Real> {
        self.trace
            .iter()
            .map(|r| max_error(&r.approximations, truth))
            .collect()
    }

    /// First iterate whose maximal error against `truth` is at most `target`.
    pub fn iterations_to(&self, truth: &[Real], target: &Real) -> Option<usize> {
        self.trace
            .iter()
            .find(|r| max_error(&r.approximations, truth) <= *target)
            .map(|r| r.k)
    }

    /// Order estimated from the error history, with round-off saturated
    /// entries (see [`error_floor`]) left out.
    pub fn error_order(
        &self,
        poly: &PolyFamily,
        multiplicities: &[u32],
        truth: &[Real],
    ) -> Result<OrderEstimate, TheoryError> {
        let floor = error_floor(poly, truth, multiplicities).map_err(TheoryError::Poly)?;
        estimate_order_above(&self.error_history(truth), Some(&floor))
    }
}

/// `max_i |x_i - truth_i|`.
pub fn max_error(approximations: &[Real], truth: &[Real]) -> Real {
    let errs: Vec<Real> = approximations
        .iter()
        .zip(truth)
        .map(|(x, t)| crate::real::abs_diff(x, t))
        .collect();
    max_of(&errs).unwrap_or_else(|| Float::new(53))
}

struct Update {
    approximations: Vec<Real>,
    corrections: Vec<Real>,
    residuals: Vec<Real>,
}

fn residuals(poly: &PolyFamily, xs: &[Real]) -> Result<Vec<Real>, StepError> {
    xs.iter()
        .map(|x| poly.eval(x).map_err(StepError::from))
        .collect()
}

fn check_inputs(
    poly: &PolyFamily,
    multiplicities: &[u32],
    approximations: &[Real],
) -> Result<(), StepError> {
    if approximations.len() != multiplicities.len() {
        return Err(StepError::InvalidInput(format!(
            "{} approximations for {} multiplicities",
            approximations.len(),
            multiplicities.len()
        )));
    }
    if approximations.is_empty() {
        return Err(StepError::InvalidInput("no approximations".into()));
    }
    if multiplicities.contains(&0) {
        return Err(StepError::InvalidInput(
            "multiplicities must be at least 1".into(),
        ));
    }
    let total: u32 = multiplicities.iter().sum();
    let expected = match poly.family() {
        Family::Algebraic => poly.degree(),
        Family::Trigonometric | Family::Exponential => 2 * poly.degree(),
    };
    if total as usize != expected {
        return Err(StepError::InvalidInput(format!(
            "multiplicities sum to {total}, but the {} polynomial of degree {} needs {expected}",
            poly.family(),
            poly.degree()
        )));
    }
    Ok(())
}

/// Round-off level of `f(x)`: `2^8 eps sum|terms|` for coefficient forms.
/// Factored forms evaluate with small relative error, so only an exact zero
/// counts as round-off there.
pub fn residual_noise(poly: &PolyFamily, x: &Real) -> Result<Real, PolyError> {
    let prec = poly.precision();
    if poly.is_factored() {
        return Ok(Float::new(prec));
    }
    let magnitude = poly.term_magnitude(0, x)?;
    Ok(magnitude >> (prec - 8))
}

/// Computes the next approximation vector. Roots whose residual is within
/// round-off of zero get a zero correction.
fn update(
    poly: &PolyFamily,
    multiplicities: &[u32],
    current: &[Real],
    sweep: SweepMode,
) -> Result<Update, StepError> {
    let family = poly.family();
    let mut next = current.to_vec();
    let mut corrections = Vec::with_capacity(current.len());
    for (i, x) in current.iter().enumerate() {
        let prec = x.prec();
        let coupling = match sweep {
            SweepMode::Simultaneous => current,
            SweepMode::Sequential => &next[..],
        };
        let f = poly.eval(x)?;
        let correction = if Float::with_val(prec, f.abs_ref()) <= residual_noise(poly, x)? {
            // f carries no information beyond round-off here; moving would only
            // inject noise. The log-derivative is still checked for collisions.
            log_derivative_q(family, coupling, multiplicities, i, x)?;
            Float::new(prec)
        } else {
            let df = poly.eval_derivative(x)?;
            let log_dq = log_derivative_q(family, coupling, multiplicities, i, x)?;
            let denom = Float::with_val(prec, &df - Float::with_val(prec, &f * &log_dq));
            if !denom.is_finite() {
                return Err(StepError::NonFinite { i });
            }
            let threshold = Float::with_val(prec, df.abs_ref()) >> (prec - 4);
            if denom.is_zero() || Float::with_val(prec, denom.abs_ref()) < threshold {
                return Err(StepError::DegenerateDenominator { i });
            }
            Float::with_val(prec, &f * multiplicities[i]) / denom
        };
        let moved = Float::with_val(prec, x - &correction);
        if !moved.is_finite() || !correction.is_finite() {
            return Err(StepError::NonFinite { i });
        }
        next[i] = moved;
        corrections.push(correction);
    }
    let residuals = residuals(poly, &next)?;
    Ok(Update {
        approximations: next,
        corrections,
        residuals,
    })
}

/// One iteration of the method; returns the advanced state.
pub fn step(
    poly: &PolyFamily,
    multiplicities: &[u32],
    state: &IterationState,
    settings: &SolveSettings,
) -> Result<IterationState, StepError> {
    check_inputs(poly, multiplicities, &state.approximations)?;
    let u = update(poly, multiplicities, &state.approximations, settings.sweep)?;
    let mut next = state.clone();
    next.advance(u);
    Ok(next)
}

/// Approximations further than this factor times the initial spread are
/// declared divergent.
const DIVERGENCE_FACTOR_LOG2: u32 = 40;

/// Iterates [`step`] until every correction is below its tolerance, a step
/// fails, or `max_iterations` is reached.
///
/// Converged means every correction of the last step is at most
/// `correction_tolerance * max(1, |x_i|)`.
pub fn solve(
    poly: &PolyFamily,
    multiplicities: &[u32],
    initial: &[Real],
    settings: &SolveSettings,
) -> Result<SolveReport, StepError> {
    settings.validate()?;
    check_inputs(poly, multiplicities, initial)?;
    let prec = settings.precision.bits();
    let initial: Vec<Real> = initial.iter().map(|x| Float::with_val(prec, x)).collect();
    RootConfiguration::new(initial.clone(), multiplicities.to_vec())
        .map_err(|e| StepError::InvalidInput(e.to_string()))?;

    let radius = max_of(&initial.iter().map(|x| x.clone().abs()).collect::<Vec<_>>())
        .expect("non-empty")
        + 1u32;
    let divergence_bound = radius << DIVERGENCE_FACTOR_LOG2;

    let mut state = IterationState::new(poly, initial)?;
    let mut termination = Termination::MaxIterations;
    let mut failure = None;
    for _ in 0..settings.max_iterations {
        match update(poly, multiplicities, &state.approximations, settings.sweep) {
            Ok(u) => state.advance(u),
            Err(e) => {
                termination = match e {
                    StepError::Collision { .. } => Termination::Collision,
                    StepError::DegenerateDenominator { .. } => Termination::Diverged,
                    _ => Termination::Nonfinite,
                };
                failure = Some(e);
                break;
            }
        }
        if state
            .approximations
            .iter()
            .any(|x| x.clone().abs() > divergence_bound)
        {
            termination = Termination::Diverged;
            break;
        }
        if corrections_converged(&state, settings) {
            termination = Termination::Converged;
            break;
        }
    }

    let estimated_order = correction_order(poly, multiplicities, &state);
    Ok(SolveReport {
        final_approximations: state.approximations.clone(),
        iterations_used: state.k,
        termination,
        trace: state.trace,
        estimated_order,
        failure,
    })
}

fn corrections_converged(state: &IterationState, settings: &SolveSettings) -> bool {
    state
        .corrections
        .iter()
        .zip(&state.approximations)
        .all(|(c, x)| {
            let scale = Float::with_val(x.prec(), x.abs_ref()).max(&Float::with_val(x.prec(), 1));
            *c <= scale * &settings.correction_tolerance
        })
}

fn correction_order(
    poly: &PolyFamily,
    multiplicities: &[u32],
    state: &IterationState,
) -> Option<OrderEstimate> {
    let sizes: Vec<Real> = state
        .trace
        .iter()
        .skip(1)
        .map(|r| {
            max_of(
                &r.corrections
                    .iter()
                    .map(|c| c.clone().abs())
                    .collect::<Vec<_>>(),
            )
            .unwrap()
        })
        .collect();
    let floors: Vec<Real> = state
        .approximations
        .iter()
        .zip(multiplicities)
        .filter_map(|(x, &a)| attainable_accuracy(poly, x, a).ok())
        .collect();
    let floor = max_of(&floors);
    estimate_order_above(&sizes, floor.as_ref()).ok()
}

/// `Q''(x_i)/Q'(x_i) - 2 Q_i'(x_i)/Q_i(x_i)` for `Q = prod_j (x - x_j)`, all
/// computed from explicitly expanded coefficients. Zero whenever the
/// simple-root method coincides with its `Q''/Q'` form.
pub fn lemma1_residual(simple_roots: &[Real], i: usize) -> Result<Real, StepError> {
    if i >= simple_roots.len() {
        return Err(StepError::InvalidInput(format!("index {i} out of range")));
    }
    RootConfiguration::new(simple_roots.to_vec(), vec![1; simple_roots.len()])
        .map_err(|e| StepError::InvalidInput(e.to_string()))?;
    let prec = simple_roots[i].prec();
    let x = &simple_roots[i];
    let q = monic_from_roots(simple_roots.iter(), prec);
    let qi = monic_from_roots(
        simple_roots
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, r)| r),
        prec,
    );
    let dq = differentiate(&q);
    let ddq = differentiate(&dq);
    let dqi = differentiate(&qi);
    let lhs = horner(&ddq, x, prec) / horner(&dq, x, prec);
    let rhs = horner(&dqi, x, prec) / horner(&qi, x, prec) * 2u32;
    Ok(lhs - rhs)
}

/// Power-basis coefficients (constant term first) of `prod (x - r)`.
fn monic_from_roots<'a>(roots: impl Iterator<Item = &'a Real>, prec: u32) -> Vec<Real> {
    let mut c = vec![Float::with_val(prec, 1)];
    for r in roots {
        let mut next = vec![Float::new(prec); c.len() + 1];
        for (k, ck) in c.iter().enumerate() {
            next[k + 1] += ck;
            next[k] -= Float::with_val(prec, ck * r);
        }
        c = next;
    }
    c
}

fn differentiate(c: &[Real]) -> Vec<Real> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, ck)| Float::with_val(ck.prec(), ck * k as u32))
        .collect()
}

fn horner(c: &[Real], x: &Real, prec: u32) -> Real {
    c.iter()
        .rev()
        .fold(Float::new(prec), |acc, ck| acc * x + ck)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{expand_from_roots, AlgebraicPoly, FactoredForm};

    fn pr(bits: u32) -> Precision {
        Precision::new(bits).unwrap()
    }

    fn algebraic(prec: Precision, roots: &[f64], mult: &[u32]) -> PolyFamily {
        let cfg = RootConfiguration::from_f64(prec, roots, mult).unwrap();
        expand_from_roots(&FactoredForm::new(Family::Algebraic, cfg).unwrap()).unwrap()
    }

    #[test]
    fn single_root_is_newton_with_multiplicity() {
        let p = pr(53);
        // (x - 2)^2 = x^2 - 4x + 4
        let f = PolyFamily::Algebraic(
            AlgebraicPoly::monic(vec![p.from_f64(-4.0), p.from_f64(4.0)]).unwrap(),
        );
        let state = IterationState::new(&f, vec![p.from_f64(3.0)]).unwrap();
        let next = step(&f, &[2], &state, &SolveSettings::new(p)).unwrap();
        assert_eq!(next.approximations[0].to_f64(), 2.0);
        assert_eq!(next.k, 1);
        assert_eq!(next.trace.len(), 2);
        assert_eq!(next.corrections[0].to_f64(), 1.0);
    }

    #[test]
    fn exact_roots_converge_immediately() {
        let p = pr(128);
        let f = algebraic(p, &[2.0, 3.0, 5.0], &[2, 3, 1]);
        let init: Vec<Real> = [2.0, 3.0, 5.0].iter().map(|&r| p.from_f64(r)).collect();
        let rep = solve(&f, &[2, 3, 1], &init, &SolveSettings::new(p)).unwrap();
        assert_eq!(rep.termination, Termination::Converged);
        assert!(rep.iterations_used <= 1);
        assert_eq!(rep.final_approximations, init);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let p = pr(64);
        let f = algebraic(p, &[1.0, 2.0], &[1, 1]);
        let err = solve(&f, &[1, 1], &[p.zero()], &SolveSettings::new(p)).unwrap_err();
        assert!(matches!(err, StepError::InvalidInput(_)));
        let err = solve(&f, &[2, 1], &[p.zero(), p.one()], &SolveSettings::new(p)).unwrap_err();
        assert!(matches!(err, StepError::InvalidInput(_)));
    }

    #[test]
    fn repeated_initial_values_rejected() {
        let p = pr(64);
        let f = algebraic(p, &[1.0, 2.0], &[1, 1]);
        let err = solve(&f, &[1, 1], &[p.one(), p.one()], &SolveSettings::new(p)).unwrap_err();
        assert!(matches!(err, StepError::InvalidInput(_)));
    }

    #[test]
    fn collision_keeps_trace() {
        let p = pr(64);
        let f = algebraic(p, &[1.0, 2.0], &[1, 1]);
        // closer than the 2^-32 collision threshold at 64 bits
        let near = Float::with_val(64, p.from_f64(1.0) + p.pow2(-40));
        let state = IterationState::new(&f, vec![p.one(), near]).unwrap();
        let err = step(&f, &[1, 1], &state, &SolveSettings::new(p)).unwrap_err();
        assert!(matches!(err, StepError::Collision { .. }));
    }

    #[test]
    fn sequential_sweep_converges() {
        let p = pr(128);
        let f = algebraic(p, &[-1.0, 0.5, 2.0], &[1, 2, 1]);
        let init: Vec<Real> = [-1.2, 0.6, 2.3].iter().map(|&r| p.from_f64(r)).collect();
        let mut s = SolveSettings::new(p);
        s.sweep = SweepMode::Sequential;
        let rep = solve(&f, &[1, 2, 1], &init, &s).unwrap();
        assert_eq!(rep.termination, Termination::Converged);
        let truth: Vec<Real> = [-1.0, 0.5, 2.0].iter().map(|&r| p.from_f64(r)).collect();
        assert!(max_error(&rep.final_approximations, &truth) < 1e-15);
    }

    #[test]
    fn lemma1_two_roots() {
        let p = pr(53);
        let r = lemma1_residual(&[p.zero(), p.one()], 0).unwrap();
        assert!(r.is_zero());
    }

    #[test]
    fn lemma1_three_roots() {
        let p = pr(53);
        let roots: Vec<Real> = [1.0, 2.0, 5.0].iter().map(|&v| p.from_f64(v)).collect();
        assert!(lemma1_residual(&roots, 1).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn lemma1_rejects_repeated_knots() {
        let p = pr(53);
        assert!(lemma1_residual(&[p.one(), p.one()], 0).is_err());
    }

    #[test]
    fn sweep_mode_parsing() {
        assert_eq!("sequential".parse::<SweepMode>(), Ok(SweepMode::Sequential));
        assert!("jacobi".parse::<SweepMode>().is_err());
    }
}
