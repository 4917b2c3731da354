//! Data-bias diagnostics: the empirical positive-bias estimate, episode
//! length against return, and the sufficient-condition slacks.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize, Serializer};

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::mdp::{q_values, value_iteration, FiniteMdp, MdpRef, SaTable};

/// Relative tolerance below which `J* - min J` counts as zero.
pub const INFINITE_BIAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BiasEstimate {
    Finite(f64),
    Infinite,
}

impl BiasEstimate {
    pub fn is_infinite(self) -> bool {
        matches!(self, BiasEstimate::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            BiasEstimate::Finite(x) => Some(x),
            BiasEstimate::Infinite => None,
        }
    }
}

impl Serialize for BiasEstimate {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BiasEstimate::Finite(x) => ser.serialize_f64(*x),
            BiasEstimate::Infinite => ser.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for BiasEstimate {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Num(x) => Ok(BiasEstimate::Finite(x)),
            Raw::Text(t) if t == "inf" => Ok(BiasEstimate::Infinite),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

/// `J* / max(J* - min(J_zero, J_rand, J_neg), 0)`, infinite when the
/// denominator is zero (up to [`INFINITE_BIAS_TOL`] relative to `J*`).
pub fn estimate_positive_bias(j_star: f64, j_zero: f64, j_rand: f64, j_neg: f64) -> Result<BiasEstimate> {
    if !j_star.is_finite() {
        return Err(Error::Validation(format!("J* must be finite, got {j_star}")));
    }
    let worst = j_zero.min(j_rand).min(j_neg);
    let denom = (j_star - worst).max(0.0);
    if denom <= INFINITE_BIAS_TOL * j_star.abs().max(1.0) {
        Ok(BiasEstimate::Infinite)
    } else {
        Ok(BiasEstimate::Finite(j_star / denom))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthReturnTable {
    /// `(episode length, return under the true reward)` per trajectory.
    pub rows: Vec<(usize, f64)>,
    /// Pearson correlation of length and return; 0 when degenerate.
    pub correlation: f64,
    /// Set when either column has zero variance (or fewer than 2 rows).
    pub degenerate: bool,
}

impl LengthReturnTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("length,return\n");
        for (len, ret) in &self.rows {
            writeln!(out, "{len},{ret}").unwrap();
        }
        out
    }
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

pub fn length_return_table(dataset: &Dataset, true_reward: &SaTable) -> Result<LengthReturnTable> {
    true_reward.check_dims(dataset.n_states(), dataset.n_actions())?;
    let rows: Vec<(usize, f64)> = dataset
        .trajectories()
        .iter()
        .map(|traj| (traj.len(), traj.iter().map(|t| true_reward.get(t.s, t.a)).sum()))
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let corr = pearson(&xs, &ys);
    Ok(LengthReturnTable { rows, correlation: corr.unwrap_or(0.0), degenerate: corr.is_none() })
}

/// `max over the support of (R_max - r(s, a))`, `R_max` the largest entry
/// of `true_reward`.
pub fn check_rmax_condition(dataset: &Dataset, true_reward: &SaTable) -> Result<f64> {
    true_reward.check_dims(dataset.n_states(), dataset.n_actions())?;
    let support = dataset.support();
    if support.is_empty() {
        return Err(Error::Dataset("empty support".into()));
    }
    let r_max = true_reward.max();
    Ok(support.iter().map(|&(s, a)| r_max - true_reward.get(s, a)).fold(f64::NEG_INFINITY, f64::max))
}

/// `max over the support of (V*(s) - Q*(s, a))` on the true model; on
/// finite models the comparison is made per step against `support_h`.
pub fn check_gap_condition<'a>(true_mdp: impl Into<MdpRef<'a>>, dataset: &Dataset) -> Result<f64> {
    let mdp = true_mdp.into();
    if (dataset.n_states(), dataset.n_actions()) != (mdp.n_states(), mdp.n_actions()) {
        return Err(Error::Shape("dataset and model dimensions differ".into()));
    }
    let (v, _) = value_iteration(mdp, mdp.reward(), 1e-12)?;
    let q = q_values(mdp, &v, mdp.reward())?;
    let gaps = match mdp.horizon() {
        None => dataset.support().into_iter().map(|(s, a)| v.at(0, s) - q.table(0).get(s, a)).collect::<Vec<_>>(),
        Some(h) => (0..h)
            .flat_map(|t| dataset.support_h(t).into_iter().map(move |(s, a)| (t, s, a)))
            .map(|(t, s, a)| v.at(t, s) - q.table(t).get(s, a))
            .collect(),
    };
    // the optimal backup can exceed the greedy pick by rounding only
    Ok(gaps.into_iter().fold(0.0, f64::max))
}

/// Over trajectories that last the full horizon, `max (V*(d0) - return) / H`
/// with the return under the model's reward; `None` when no trajectory is
/// full length.
pub fn check_full_length_condition(dataset: &Dataset, true_mdp: &FiniteMdp) -> Result<Option<f64>> {
    let horizon = true_mdp.horizon();
    let (v, _) = value_iteration(true_mdp, true_mdp.reward(), 1e-12)?;
    let v_star = v.at_distribution(true_mdp.dynamics().d0());
    let reward = true_mdp.reward();
    Ok(dataset
        .trajectories()
        .iter()
        .filter(|traj| traj.len() == horizon)
        .map(|traj| (v_star - traj.iter().map(|t| reward.get(t.s, t.a)).sum::<f64>()) / horizon as f64)
        .reduce(f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub learner: String,
    pub seed: u64,
    pub j_star: f64,
    pub j_zero: f64,
    pub j_rand: f64,
    pub j_neg: f64,
    pub estimate: BiasEstimate,
    pub estimate_infinite: bool,
    pub length_return_rows: Vec<(usize, f64)>,
    pub length_return_correlation: f64,
    pub length_return_degenerate: bool,
    pub eps_rmax: f64,
    pub eps_gap: f64,
    pub eps_full_length: Option<f64>,
    pub eps_full_length_defined: bool,
}

impl BiasReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
