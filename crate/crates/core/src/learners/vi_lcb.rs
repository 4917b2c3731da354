use serde::{Deserialize, Serialize};

use crate::datagen::{split_folds, Dataset};
use crate::error::{Error, Result};
use crate::learners::empirical::EmpiricalModel;
use crate::mdp::random::random_simplex;
use crate::mdp::{argmax_lowest, Policy};
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViLcbConfig {
    pub gamma: f64,
    /// Value range; should be at least `max|r| / (1 - gamma)`.
    pub v_max: f64,
    /// Confidence level `delta` in `(0, 1]`.
    pub delta_conf: f64,
    /// Seeds the fold split and the placeholder rows of unseen pairs.
    pub seed: u64,
}

impl ViLcbConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Validation(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if !(self.v_max > 0.0) {
            return Err(Error::Validation(format!("v_max must be positive, got {}", self.v_max)));
        }
        if !(self.delta_conf > 0.0 && self.delta_conf <= 1.0) {
            return Err(Error::Validation(format!("delta_conf must lie in (0, 1], got {}", self.delta_conf)));
        }
        Ok(())
    }

    /// Number of value iterations `J = ceil(ln N / (1 - gamma))`.
    pub fn iterations(&self, n_transitions: usize) -> usize {
        ((n_transitions as f64).ln() / (1.0 - self.gamma)).ceil().max(0.0) as usize
    }

    /// `L = 2000 ln(2 (J + 1) |S| |A| / delta)`.
    pub fn penalty_constant(&self, j: usize, n_states: usize, n_actions: usize) -> f64 {
        2000.0 * (2.0 * (j + 1) as f64 * (n_states * n_actions) as f64 / self.delta_conf).ln()
    }

    /// `b = 2 V_max sqrt(L / max(m, 1))`.
    pub fn penalty(&self, l: f64, m: u64) -> f64 {
        2.0 * self.v_max * (l / m.max(1) as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViLcbOutput {
    pub policy: Policy,
    /// `V_0, ..., V_J`; `V_0 = -V_max` everywhere.
    pub values: Vec<Vec<f64>>,
    pub iterations: usize,
    pub penalty_constant: f64,
}

pub fn vi_lcb_train(dataset: &Dataset, config: &ViLcbConfig) -> Result<ViLcbOutput> {
    config.validate()?;
    let n = dataset.n_transitions();
    let j_total = config.iterations(n);
    if n < j_total + 1 {
        return Err(Error::Learner(format!(
            "VI-LCB needs at least J + 1 = {} transitions for N = {n} (gamma = {})",
            j_total + 1,
            config.gamma
        )));
    }
    let (ns, na) = (dataset.n_states(), dataset.n_actions());
    let folds = split_folds(dataset, j_total + 1, config.seed)?;
    let l = config.penalty_constant(j_total, ns, na);

    let mut v = vec![-config.v_max; ns];
    let mut pi: Vec<usize> =
        (0..ns).map(|s| argmax_lowest(&(0..na).map(|a| folds[0].count(s, a) as f64).collect::<Vec<_>>())).collect();
    let mut values = vec![v.clone()];
    for (j, fold) in folds.iter().enumerate().skip(1) {
        let model = EmpiricalModel::from_dataset(fold);
        let mut rng = substream(config.seed, "vi-lcb-placeholder", j as u64);
        let mut next = v.clone();
        for s in 0..ns {
            let q: Vec<f64> = (0..na)
                .map(|a| {
                    let m = model.count(s, a);
                    let b = config.penalty(l, m);
                    if m >= 1 {
                        model.reward().get(s, a) - b + config.gamma * model.expect(s, a, &v)
                    } else {
                        let row = random_simplex(&mut rng, ns);
                        -b + config.gamma * row.iter().zip(&v).map(|(p, x)| p * x).sum::<f64>()
                    }
                })
                .collect();
            let a_mid = argmax_lowest(&q);
            if q[a_mid] > v[s] {
                next[s] = q[a_mid];
                pi[s] = a_mid;
            }
        }
        v = next;
        values.push(v.clone());
    }
    Ok(ViLcbOutput { policy: Policy::deterministic(na, &pi), values, iterations: j_total, penalty_constant: l })
}
