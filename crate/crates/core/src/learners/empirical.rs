use crate::datagen::Dataset;
use crate::mdp::SaTable;

/// Maximum-likelihood model pooled over all timesteps of a dataset.
#[derive(Debug, Clone)]
pub struct EmpiricalModel {
    n_states: usize,
    n_actions: usize,
    counts: Vec<u64>,
    reward: SaTable,
    /// Sparse `(s', p)` rows per pair; empty when the pair is unseen.
    next: Vec<Vec<(usize, f64)>>,
}

impl EmpiricalModel {
    pub fn from_dataset(dataset: &Dataset) -> Self {
        let (ns, na) = (dataset.n_states(), dataset.n_actions());
        let mut next_counts: Vec<std::collections::BTreeMap<usize, u64>> = vec![Default::default(); ns * na];
        for tr in dataset.transitions() {
            *next_counts[tr.s * na + tr.a].entry(tr.s_next).or_default() += 1;
        }
        let counts: Vec<u64> = (0..ns * na).map(|i| dataset.count(i / na, i % na)).collect();
        let next = next_counts
            .into_iter()
            .zip(&counts)
            .map(|(row, &n)| row.into_iter().map(|(sp, c)| (sp, c as f64 / n as f64)).collect())
            .collect();
        Self { n_states: ns, n_actions: na, counts, reward: dataset.empirical_reward(), next }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn count(&self, s: usize, a: usize) -> u64 {
        self.counts[s * self.n_actions + a]
    }

    pub fn reward(&self) -> &SaTable {
        &self.reward
    }

    pub fn next(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.next[s * self.n_actions + a]
    }

    /// `sum_s' P_hat(s'|s,a) v(s')`; zero for unseen pairs.
    pub fn expect(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        self.next(s, a).iter().map(|&(sp, p)| p * v[sp]).sum()
    }

    /// Dense transition tensor; unseen pairs get `fill(s, a)`.
    pub fn dense_transition(&self, mut fill: impl FnMut(usize, usize) -> Vec<f64>) -> Vec<f64> {
        let n = self.n_states;
        let mut out = Vec::with_capacity(n * self.n_actions * n);
        for s in 0..n {
            for a in 0..self.n_actions {
                if self.count(s, a) == 0 {
                    out.extend(fill(s, a));
                } else {
                    let mut row = vec![0.0; n];
                    for &(sp, p) in self.next(s, a) {
                        row[sp] = p;
                    }
                    out.extend(row);
                }
            }
        }
        out
    }
}
