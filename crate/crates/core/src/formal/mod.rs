//! Machine-checkable artifacts: SMT-LIB2 queries for the metric properties
//! and a PRISM model of the sequential audit game, with an internal
//! enumeration solver for the latter.

pub mod mdp;
pub mod sexp;
pub mod smt;

pub use mdp::{emit_prism, solve_mdp, AuditMdp, MetricSetting, PrismModel, VariantSetting};
pub use smt::{
    emit_smt, run_external_solver, ExpectedVerdict, FormalError, SmtProperty, SmtQuery,
    SolverOutcome, SolverRun, SOLVER_TIMEOUT,
};
