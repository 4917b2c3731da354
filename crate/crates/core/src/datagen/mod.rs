//! Offline data: rollouts under termination rules, datasets with cached
//! counts, reward corruption and fold splitting.

mod collect;
mod dataset;
pub mod io;

pub use collect::{
    collect, corrupt, extend_absorbing, gridworld_collection_spec, gridworld_lava_policy, gridworld_recipe, rollout,
    split_folds, strip_terminal_transitions, Allocation, CollectionSpec, CorruptionSpec, TerminationRule,
};
pub use dataset::{Dataset, Trajectory, Transition};
pub use io::{parse_dataset, write_dataset};
