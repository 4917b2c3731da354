//! Constrained MDPs: the implicit support-constrained problem of a dataset,
//! an exact Lagrangian solver with an enumeration oracle, budget
//! sensitivity, and escape-from-support measurements.

mod model;
pub mod random;
mod solve;
mod survival;

pub use model::{build_implicit_cmdp, support_cost, Cmdp, CmdpPolicy, CmdpSolution, MixedPolicy};
pub use solve::{brute_force_oracle, greedy_exact, min_violation, solve_lagrangian, ORACLE_MAX_POLICIES};
pub use survival::{
    dual_bound_check, escape_probability, sensitivity_curve, verify_survival, DualBoundCheck, Escape, SensitivityPoint,
    SurvivalReport,
};
