//! Offline learners on logged data, and policy evaluation.

mod bc;
mod empirical;
mod eval;
mod filtered;
mod pevi;
mod vi_lcb;

pub use bc::bc_train;
pub use empirical::EmpiricalModel;
pub use eval::{evaluate_exact, evaluate_mc, McEstimate, MC_DISCOUNT_CUTOFF};
pub use filtered::{ppi_train, pqi_train, FilterConfig, FilteredOutput};
pub use pevi::{pevi_default_bounds, pevi_train, PeviConfig, PeviOutput, RewardKind};
pub use vi_lcb::{vi_lcb_train, ViLcbConfig, ViLcbOutput};
