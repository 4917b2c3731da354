//! Tabular PQI and PPI. The fitted least-squares step of the function
//! approximation versions reduces to the exact empirical backup here;
//! `f` lives in `[-v_max, v_max]` and unseen pairs keep `f = 0`.

use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::learners::empirical::EmpiricalModel;
use crate::mdp::{argmax_lowest, Policy, SaTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Frequency threshold `b` on `n(s, a) / N`.
    pub b: f64,
    pub n_iters: usize,
    pub gamma: f64,
    pub v_max: f64,
}

impl FilterConfig {
    fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b <= 1.0) {
            return Err(Error::Validation(format!("filter threshold b must lie in (0, 1], got {}", self.b)));
        }
        if self.n_iters == 0 {
            return Err(Error::Validation("n_iters must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Validation(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if !(self.v_max > 0.0) {
            return Err(Error::Validation(format!("v_max must be positive, got {}", self.v_max)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilteredOutput {
    pub policy: Policy,
    /// Final `f` (unmasked).
    pub f: SaTable,
    /// `zeta(s, a) = 1[mu_hat(s, a) >= b]`.
    pub filter: Vec<Vec<bool>>,
    /// Observed states where no action survived the filter.
    pub warnings: Vec<String>,
}

struct Filtered {
    model: EmpiricalModel,
    zeta: Vec<Vec<bool>>,
    gamma: f64,
    v_max: f64,
}

impl Filtered {
    fn new(dataset: &Dataset, config: &FilterConfig) -> Result<Self> {
        config.validate()?;
        if dataset.is_empty() {
            return Err(Error::Learner("filtered learners need at least one transition".into()));
        }
        let freq = dataset.empirical_frequency();
        let zeta = (0..dataset.n_states())
            .map(|s| (0..dataset.n_actions()).map(|a| freq.get(s, a) >= config.b).collect())
            .collect();
        Ok(Self { model: EmpiricalModel::from_dataset(dataset), zeta, gamma: config.gamma, v_max: config.v_max })
    }

    fn masked(&self, f: &SaTable, s: usize, a: usize) -> f64 {
        if self.zeta[s][a] {
            f.get(s, a)
        } else {
            0.0
        }
    }

    /// Empirical backup of the target `next_value(s')` on seen pairs.
    fn backup(&self, next_value: &[f64]) -> SaTable {
        let m = &self.model;
        SaTable::from_fn(m.n_states(), m.n_actions(), |s, a| {
            if m.count(s, a) == 0 {
                0.0
            } else {
                let q = m.reward().get(s, a) + self.gamma * m.expect(s, a, next_value);
                q.clamp(-self.v_max, self.v_max)
            }
        })
    }

    /// Greedy over `zeta * f` restricted to surviving actions.
    fn greedy(&self, f: &SaTable, warnings: &mut Vec<String>) -> Vec<usize> {
        (0..self.model.n_states())
            .map(|s| {
                let surviving: Vec<usize> = (0..self.model.n_actions()).filter(|&a| self.zeta[s][a]).collect();
                if surviving.is_empty() {
                    let observed = (0..self.model.n_actions()).any(|a| self.model.count(s, a) > 0);
                    if observed {
                        warnings.push(format!("state {s}: no action passes the filter; using action 0"));
                    }
                    return 0;
                }
                let scores: Vec<f64> = surviving.iter().map(|&a| self.masked(f, s, a)).collect();
                surviving[argmax_lowest(&scores)]
            })
            .collect()
    }

    fn max_masked(&self, f: &SaTable) -> Vec<f64> {
        (0..f.n_states())
            .map(|s| (0..f.n_actions()).map(|a| self.masked(f, s, a)).fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    fn policy_masked(&self, f: &SaTable, pi: &[usize]) -> Vec<f64> {
        pi.iter().enumerate().map(|(s, &a)| self.masked(f, s, a)).collect()
    }

    fn finish(&self, f: SaTable, pi: &[usize], warnings: Vec<String>) -> FilteredOutput {
        FilteredOutput {
            policy: Policy::deterministic(self.model.n_actions(), pi),
            f,
            filter: self.zeta.clone(),
            warnings,
        }
    }
}

/// Pessimistic Q iteration: `f <- r_hat + gamma P_hat max_a' zeta f`.
pub fn pqi_train(dataset: &Dataset, config: &FilterConfig) -> Result<FilteredOutput> {
    let ctx = Filtered::new(dataset, config)?;
    let mut f = SaTable::zeros(dataset.n_states(), dataset.n_actions());
    for _ in 0..config.n_iters {
        f = ctx.backup(&ctx.max_masked(&f));
    }
    let mut warnings = Vec::new();
    let pi = ctx.greedy(&f, &mut warnings);
    Ok(ctx.finish(f, &pi, warnings))
}

/// Pessimistic policy iteration: `n_eval_iters` filtered evaluation sweeps
/// of the current policy, then a filtered greedy step; repeated `n_iters`
/// times.
pub fn ppi_train(dataset: &Dataset, config: &FilterConfig, n_eval_iters: usize) -> Result<FilteredOutput> {
    if n_eval_iters == 0 {
        return Err(Error::Validation("n_eval_iters must be at least 1".into()));
    }
    let ctx = Filtered::new(dataset, config)?;
    let mut f = SaTable::zeros(dataset.n_states(), dataset.n_actions());
    let mut warnings = Vec::new();
    let mut pi = ctx.greedy(&f, &mut warnings);
    for _ in 0..config.n_iters {
        for _ in 0..n_eval_iters {
            f = ctx.backup(&ctx.policy_masked(&f, &pi));
        }
        warnings.clear();
        pi = ctx.greedy(&f, &mut warnings);
    }
    Ok(ctx.finish(f, &pi, warnings))
}
