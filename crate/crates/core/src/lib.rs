//! Tabular offline reinforcement learning laboratory.
//!
//! The crate reproduces, at desk scale and exactly, how pessimistic offline
//! learners keep to the support of their data even when trained on wrong
//! rewards, and measures the constrained-MDP quantities behind that effect.
//!
//! * [`mdp`]: models, policy evaluation, value iteration, occupancy.
//! * [`gridworld`]: the 5x5 lava grid navigation task.
//! * [`datagen`]: rollouts, datasets, reward corruption, folds.
//! * [`learners`]: BC, PEVI, VI-LCB, PQI/PPI and evaluation.
//! * [`cmdp`]: the implicit constrained MDP, Lagrangian solver and oracle.
//! * [`bias`]: positive-bias estimator and sufficient-condition checks.
//! * [`runner`]: experiment matrix, grid-world reproduction, reports.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bias;
pub mod cmdp;
pub mod datagen;
pub mod error;
pub mod gridworld;
pub mod learners;
pub mod mdp;
pub mod rng;
pub mod runner;

pub use error::{Error, Result};
