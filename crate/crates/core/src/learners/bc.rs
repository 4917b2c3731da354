use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::mdp::{argmax_lowest, Policy, SaTable};

/// Most frequent logged action per state; uniform on unseen states.
pub fn bc_train(dataset: &Dataset) -> Result<Policy> {
    if dataset.is_empty() {
        return Err(Error::Learner("behavior cloning needs at least one transition".into()));
    }
    let (ns, na) = (dataset.n_states(), dataset.n_actions());
    let mut table = SaTable::zeros(ns, na);
    for s in 0..ns {
        let counts: Vec<f64> = (0..na).map(|a| dataset.count(s, a) as f64).collect();
        let row = table.row_mut(s);
        if counts.iter().all(|&c| c == 0.0) {
            row.fill(1.0 / na as f64);
        } else {
            row[argmax_lowest(&counts)] = 1.0;
        }
    }
    Ok(Policy::Stationary(table))
}
