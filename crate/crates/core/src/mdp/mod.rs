//! Tabular discounted and finite-horizon MDPs with exact solvers.

pub mod io;
mod model;
mod policy;
pub mod random;
mod solve;

pub use model::{Dynamics, FiniteMdp, Mdp, MdpRef, SaTable, TabularMdp, PROB_TOL};
pub use policy::{argmax_lowest, deterministic_policies, Policy, TIE_TOL};
pub use solve::{
    finite_occupancy, occupancy, pd_lemma_residual, policy_evaluation, q_values, state_distributions, value_at_d0,
    value_iteration, value_iteration_cap, QValues, ValueTable, Values, DIRECT_SOLVE_MAX_STATES,
};
