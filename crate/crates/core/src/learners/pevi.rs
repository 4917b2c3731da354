//! Pessimistic value iteration for finite-horizon datasets.
//!
//! Steps are 0-based here: `t = 0..H`, with the terminal value `V_H = 0`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datagen::{CorruptionSpec, Dataset};
use crate::error::{Error, Result};
use crate::mdp::{argmax_lowest, Policy, SaTable};

/// Which reward labels a dataset carries; selects the default value bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    Original,
    Zero,
    Random,
    Negative,
}

impl RewardKind {
    pub const ALL: [RewardKind; 4] = [RewardKind::Original, RewardKind::Zero, RewardKind::Random, RewardKind::Negative];

    pub fn as_str(self) -> &'static str {
        match self {
            RewardKind::Original => "original",
            RewardKind::Zero => "zero",
            RewardKind::Random => "random",
            RewardKind::Negative => "negative",
        }
    }

    /// The relabeling that produces this kind from true rewards.
    pub fn corruption(self, seed: u64) -> CorruptionSpec {
        match self {
            RewardKind::Original => CorruptionSpec::Original,
            RewardKind::Zero => CorruptionSpec::Zero,
            RewardKind::Random => CorruptionSpec::RandomUniform { lo: 0.0, hi: 1.0, seed },
            RewardKind::Negative => CorruptionSpec::Negate,
        }
    }
}

impl fmt::Display for RewardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RewardKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RewardKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown reward kind {s:?} (expected original|zero|random|negative)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeviConfig {
    pub beta: f64,
    /// Lower bound per step `t = 0..H`.
    pub v_min: Vec<f64>,
    pub v_max: Vec<f64>,
}

impl PeviConfig {
    pub fn new(beta: f64, v_min: Vec<f64>, v_max: Vec<f64>) -> Result<Self> {
        if !(beta >= 0.0) {
            return Err(Error::Validation(format!("beta must be nonnegative, got {beta}")));
        }
        if v_min.len() != v_max.len() || v_min.is_empty() {
            return Err(Error::Validation("v_min and v_max must be nonempty and of equal length".into()));
        }
        if let Some(t) = (0..v_min.len()).find(|&t| !(v_min[t] <= v_max[t])) {
            return Err(Error::Validation(format!("v_min[{t}] = {} exceeds v_max[{t}] = {}", v_min[t], v_max[t])));
        }
        Ok(Self { beta, v_min, v_max })
    }

    /// Default bounds for the given reward kind.
    pub fn for_kind(kind: RewardKind, beta: f64, horizon: usize) -> Result<Self> {
        let (v_min, v_max) = pevi_default_bounds(kind, beta, horizon)?;
        Self::new(beta, v_min, v_max)
    }

    /// Bounds from a per-step reward range `[lo, hi]`: the pessimistic floor
    /// is the worst return-to-go minus the penalty budget minus one.
    pub fn from_reward_range(lo: f64, hi: f64, beta: f64, horizon: usize) -> Result<Self> {
        if horizon == 0 || !(lo <= hi) {
            return Err(Error::Validation("need horizon >= 1 and lo <= hi".into()));
        }
        let (v_min, v_max) = (0..horizon)
            .map(|t| {
                let togo = (horizon - t) as f64;
                (lo.min(0.0) * togo - beta * togo - 1.0, hi.max(0.0) * togo)
            })
            .unzip();
        Self::new(beta, v_min, v_max)
    }

    pub fn horizon(&self) -> usize {
        self.v_min.len()
    }
}

/// `(v_min, v_max)` per step. With 1-based `h = t + 1` and `k = H - h + 1`
/// steps to go: `v_min = V~min - beta * k - 1` and `v_max = V~max`, where
/// `V~min` is `-k` (original), `-1` (negative), `0` (zero, random) and
/// `V~max` is `1` (original), `k` (random, negative), `0` (zero).
pub fn pevi_default_bounds(kind: RewardKind, beta: f64, horizon: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if horizon == 0 {
        return Err(Error::Validation("horizon must be at least 1".into()));
    }
    if !(beta >= 0.0) {
        return Err(Error::Validation(format!("beta must be nonnegative, got {beta}")));
    }
    Ok((0..horizon)
        .map(|t| {
            let k = (horizon - t) as f64;
            let (lo, hi) = match kind {
                RewardKind::Original => (-k, 1.0),
                RewardKind::Negative => (-1.0, k),
                RewardKind::Random => (0.0, k),
                RewardKind::Zero => (0.0, 0.0),
            };
            (lo - beta * k - 1.0, hi)
        })
        .unzip())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeviOutput {
    pub policy: Policy,
    /// `Q_hat_t` for `t = 0..H`.
    pub q: Vec<SaTable>,
    /// `V_t` for `t = 0..=H`.
    pub v: Vec<Vec<f64>>,
}

pub fn pevi_train(dataset: &Dataset, config: &PeviConfig) -> Result<PeviOutput> {
    let horizon = config.horizon();
    match dataset.horizon() {
        Some(h) if h == horizon => {}
        other => {
            return Err(Error::Learner(format!(
                "PEVI bounds cover {horizon} steps but the dataset horizon is {other:?}"
            )))
        }
    }
    let (ns, na) = (dataset.n_states(), dataset.n_actions());

    // bucket transitions by step so each backup reads only its own samples
    let mut by_step: Vec<Vec<_>> = vec![Vec::new(); horizon];
    for tr in dataset.transitions() {
        by_step[tr.t].push(*tr);
    }

    let mut v = vec![vec![0.0; ns]; horizon + 1];
    let mut q = vec![SaTable::zeros(ns, na); horizon];
    let mut actions = vec![vec![0; ns]; horizon];
    for t in (0..horizon).rev() {
        let mut sum = SaTable::zeros(ns, na);
        for tr in &by_step[t] {
            sum.set(tr.s, tr.a, sum.get(tr.s, tr.a) + tr.r + v[t + 1][tr.s_next]);
        }
        let (lo, hi) = (config.v_min[t], config.v_max[t]);
        let q_t = SaTable::from_fn(ns, na, |s, a| match dataset.count_h(t, s, a) {
            0 => lo,
            n => {
                let n = n as f64;
                let q_bar = sum.get(s, a) / n - config.beta / n.sqrt();
                lo.max(q_bar.min(hi))
            }
        });
        for s in 0..ns {
            let a = argmax_lowest(q_t.row(s));
            actions[t][s] = a;
            v[t][s] = q_t.get(s, a);
        }
        q[t] = q_t;
    }
    Ok(PeviOutput { policy: Policy::deterministic_time_indexed(na, &actions), q, v })
}
