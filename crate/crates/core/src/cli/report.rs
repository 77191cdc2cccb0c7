//! JSON solve reports. Reals are decimal strings carrying enough digits to
//! reproduce the working-precision value exactly.

use serde::{Deserialize, Serialize};

use crate::convergence::{OrderEstimate, Verdict};
use crate::ehrlich::{SweepMode, Termination};
use crate::oracle::{Requirement, VerificationOutcome};
use crate::poly::Family;
use crate::real::{abs_diff, Precision, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub label: String,
    pub family: Family,
    pub precision_bits: u32,
    pub digits: usize,
    pub multiplicities: Vec<u32>,
    pub settings: ReportSettings,
    pub termination: Termination,
    pub failure: Option<String>,
    pub iterations_used: usize,
    pub final_approximations: Vec<String>,
    pub truth: Option<Vec<String>>,
    pub error_target: Option<String>,
    pub iterations_to_target: Option<usize>,
    /// Errors at or below this level are round-off saturated.
    pub error_floor: Option<String>,
    pub order: Option<OrderReport>,
    pub trace: Vec<TraceRow>,
    pub theorems: Option<TheoremReport>,
    pub verification: Option<VerificationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSettings {
    pub max_iterations: usize,
    pub tolerance: String,
    pub sweep: SweepMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub approximations: Vec<String>,
    /// Signed corrections that produced this row; empty for `k = 0`.
    pub corrections: Vec<String>,
    pub residuals: Vec<String>,
    /// `|x_i - truth_i|` per root, when the truth is known.
    pub errors: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderSource {
    Errors,
    Corrections,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub source: OrderSource,
    pub order: f64,
    pub window_start: usize,
    pub window_end: usize,
    pub per_step_orders: Vec<f64>,
}

impl OrderReport {
    pub fn new(source: OrderSource, est: &OrderEstimate) -> Self {
        OrderReport {
            source,
            order: est.order,
            window_start: est.window.start,
            window_end: est.window.end,
            per_step_orders: est.per_step_orders.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub passed: bool,
    pub c: f64,
    pub q: f64,
    pub kappa: Option<f64>,
    pub d: f64,
    pub max_gap: f64,
    pub clauses: Vec<ClauseRow>,
    pub derived: Vec<NamedValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseRow {
    pub label: String,
    pub root: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

impl TheoremReport {
    pub fn new(
        verdict: &Verdict,
        c: f64,
        q: f64,
        kappa: Option<f64>,
        d: f64,
        max_gap: f64,
    ) -> Self {
        TheoremReport {
            passed: verdict.passed(),
            c,
            q,
            kappa,
            d,
            max_gap,
            clauses: verdict
                .clauses
                .iter()
                .map(|cl| ClauseRow {
                    label: cl.label.clone(),
                    root: cl.root,
                    lhs: cl.lhs,
                    rhs: cl.rhs,
                    holds: cl.holds,
                })
                .collect(),
            derived: verdict
                .derived
                .iter()
                .map(|(name, value)| NamedValue {
                    name: name.clone(),
                    value: *value,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub tolerance: String,
    pub residuals: Vec<String>,
    pub checks: Vec<CheckRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub root: usize,
    pub order: usize,
    pub must_vanish: bool,
    pub value: String,
    pub threshold: String,
    pub passed: bool,
}

impl VerificationReport {
    pub fn new(prec: Precision, tolerance: &Real, outcome: &VerificationOutcome) -> Self {
        VerificationReport {
            passed: outcome.passed,
            tolerance: short(tolerance),
            residuals: outcome.residuals.iter().map(|r| prec.format(r)).collect(),
            checks: outcome
                .details
                .iter()
                .map(|d| CheckRow {
                    root: d.root,
                    order: d.order,
                    must_vanish: d.requirement == Requirement::Vanish,
                    value: short(&d.value),
                    threshold: short(&d.threshold),
                    passed: d.passed,
                })
                .collect(),
        }
    }
}

/// Six significant digits, for diagnostics that need no round trip.
pub fn short(v: &Real) -> String {
    v.to_string_radix(10, Some(6))
}

/// Per-root `|x_i - truth_i|` rendered at the working precision.
pub fn error_strings(prec: Precision, approximations: &[Real], truth: &[Real]) -> Vec<String> {
    approximations
        .iter()
        .zip(truth)
        .map(|(x, t)| prec.format(&abs_diff(x, t)))
        .collect()
}
