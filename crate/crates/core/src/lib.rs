//! Simultaneous refinement of all real roots, with known multiplicities, of
//! algebraic, trigonometric and exponential polynomials by a cubically
//! convergent simultaneous iteration at configurable precision.

pub mod cli;
pub mod convergence;
pub mod ehrlich;
pub mod oracle;
pub mod poly;
pub mod real;

pub use convergence::{
    check_theorem, check_theorem1, check_theorem2, check_theorem3, estimate_order,
    estimate_order_above, OrderEstimate, TheoremParams, Verdict,
};
pub use ehrlich::{
    lemma1_residual, solve, step, IterationState, SolveReport, SolveSettings, StepError, SweepMode,
    Termination, TraceRecord,
};
pub use oracle::{
    classical_ehrlich_step, newton_multiplicity_solve, verify_roots, VerificationOutcome,
};
pub use poly::{
    expand_from_roots, log_derivative_q, AlgebraicPoly, ExpPoly, FactoredForm, Family, PolyError,
    PolyFamily, RootConfiguration, TrigPoly,
};
pub use real::{Precision, Real};
