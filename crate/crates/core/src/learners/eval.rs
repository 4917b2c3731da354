use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{value_at_d0, MdpRef, Policy};
use crate::rng::{sample_index, substream};

/// Discounted Monte-Carlo episodes stop once `gamma^t` falls below this.
pub const MC_DISCOUNT_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    /// Standard error of the mean (sample standard deviation over `sqrt(n)`).
    pub stderr: f64,
    pub n_episodes: usize,
}

/// Exact expected return from the initial distribution under the model's
/// own reward.
pub fn evaluate_exact<'a>(mdp: impl Into<MdpRef<'a>>, policy: &Policy) -> Result<f64> {
    let mdp = mdp.into();
    value_at_d0(mdp, policy, mdp.reward())
}

fn rollout_length(mdp: MdpRef<'_>) -> usize {
    match (mdp.horizon(), mdp.gamma()) {
        (Some(h), _) => h,
        (None, Some(g)) if g > 0.0 => (MC_DISCOUNT_CUTOFF.ln() / g.ln()).ceil() as usize,
        _ => 1,
    }
}

/// Mean return over `n_episodes` seeded rollouts. Finite models run the
/// full horizon; discounted ones are truncated at [`MC_DISCOUNT_CUTOFF`].
pub fn evaluate_mc<'a>(
    mdp: impl Into<MdpRef<'a>>,
    policy: &Policy,
    n_episodes: usize,
    seed: u64,
) -> Result<McEstimate> {
    let mdp = mdp.into();
    policy.check_compatible(mdp)?;
    if n_episodes == 0 {
        return Err(Error::Validation("n_episodes must be at least 1".into()));
    }
    let steps = rollout_length(mdp);
    let gamma = mdp.gamma().unwrap_or(1.0);
    let (dyn_, reward) = (mdp.dynamics(), mdp.reward());
    let returns: Vec<f64> = (0..n_episodes)
        .map(|e| {
            let mut rng = substream(seed, "evaluate", e as u64);
            let mut s = sample_index(&mut rng, dyn_.d0());
            let (mut total, mut discount) = (0.0, 1.0);
            for t in 0..steps {
                let a = sample_index(&mut rng, policy.probs(t, s));
                total += discount * reward.get(s, a);
                discount *= gamma;
                s = sample_index(&mut rng, dyn_.next(s, a));
            }
            total
        })
        .collect();
    // Welford: identical returns give their exact value and zero spread
    let (mut mean, mut m2) = (0.0, 0.0);
    for (k, &x) in returns.iter().enumerate() {
        let d = x - mean;
        mean += d / (k + 1) as f64;
        m2 += d * (x - mean);
    }
    let n = n_episodes as f64;
    let stderr = if n_episodes > 1 { (m2.max(0.0) / (n - 1.0) / n).sqrt() } else { 0.0 };
    Ok(McEstimate { mean, stderr, n_episodes })
}
