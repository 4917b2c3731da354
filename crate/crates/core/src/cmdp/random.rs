//! Seeded random constrained problems.

use rand::Rng;

use crate::cmdp::model::Cmdp;
use crate::error::Result;
use crate::mdp::random::random_mdp;
use crate::mdp::{Mdp, SaTable};
use crate::rng::substream;

/// Random discounted CMDP whose cost is a support indicator: each pair is
/// off-support with probability 1/2, but every state keeps at least one
/// supported action, so budget 0 is always feasible.
pub fn random_cmdp(n_states: usize, n_actions: usize, gamma: f64, budget: f64, seed: u64) -> Result<Cmdp> {
    let mdp = random_mdp(n_states, n_actions, gamma, seed);
    let mut rng = substream(seed, "random-cmdp", 0);
    let mut g = SaTable::zeros(n_states, n_actions);
    for s in 0..n_states {
        let keep = rng.gen_range(0..n_actions);
        for a in 0..n_actions {
            if a != keep && rng.gen_bool(0.5) {
                g.set(s, a, 1.0);
            }
        }
    }
    let f = mdp.reward().clone();
    Cmdp::new(Mdp::Discounted(mdp), f, g, budget)
}
