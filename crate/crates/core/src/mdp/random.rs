//! Seeded random instances for property tests, examples and sweeps.

use std::collections::BTreeSet;

use rand::Rng;

use crate::mdp::{Dynamics, FiniteMdp, Policy, SaTable, TabularMdp};
use crate::rng::{substream, StreamRng};

pub(crate) fn random_simplex(rng: &mut StreamRng, n: usize) -> Vec<f64> {
    // normalized exponentials: a uniform draw from the simplex
    let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / sum).collect()
}

fn random_dynamics(rng: &mut StreamRng, n_states: usize, n_actions: usize) -> Dynamics {
    let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        transition.extend(random_simplex(rng, n_states));
    }
    let d0 = random_simplex(rng, n_states);
    Dynamics::new(n_states, n_actions, transition, d0).expect("random simplex rows are stochastic")
}

/// Dense random transitions, rewards uniform in `[0, 1)`.
pub fn random_mdp(n_states: usize, n_actions: usize, gamma: f64, seed: u64) -> TabularMdp {
    let mut rng = substream(seed, "random-mdp", 0);
    let dynamics = random_dynamics(&mut rng, n_states, n_actions);
    let reward = SaTable::from_fn(n_states, n_actions, |_, _| rng.gen());
    TabularMdp::new(dynamics, reward, gamma).expect("valid random mdp")
}

/// Random finite-horizon model with no terminal states.
pub fn random_finite_mdp(n_states: usize, n_actions: usize, horizon: usize, seed: u64) -> FiniteMdp {
    let mut rng = substream(seed, "random-finite-mdp", 0);
    let dynamics = random_dynamics(&mut rng, n_states, n_actions);
    let reward = SaTable::from_fn(n_states, n_actions, |_, _| rng.gen());
    FiniteMdp::new(dynamics, reward, horizon, BTreeSet::new()).expect("valid random finite mdp")
}

/// Stochastic stationary policy with full support.
pub fn random_policy(n_states: usize, n_actions: usize, seed: u64) -> Policy {
    let mut rng = substream(seed, "random-policy", 0);
    let mut data = Vec::with_capacity(n_states * n_actions);
    for _ in 0..n_states {
        data.extend(random_simplex(&mut rng, n_actions));
    }
    Policy::stationary(SaTable::new(n_states, n_actions, data).expect("shape")).expect("simplex rows")
}

/// Uniform values in `[lo, hi)`.
pub fn random_vector(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, "random-vector", 0);
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}
