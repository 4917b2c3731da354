use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::mdp::SaTable;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub episode: u64,
    pub t: usize,
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub s_next: usize,
    /// An environment terminal (or a stop state) was entered.
    pub terminal: bool,
    /// The episode was cut by the timeout rule.
    pub timeout: bool,
}

pub type Trajectory = Vec<Transition>;

/// Logged trajectories with cached visitation counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_states: usize,
    n_actions: usize,
    horizon: Option<usize>,
    trajectories: Vec<Trajectory>,
    counts: Vec<u64>,
    counts_h: Vec<Vec<u64>>,
    provenance: String,
}

impl Dataset {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        horizon: Option<usize>,
        trajectories: Vec<Trajectory>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        for tr in trajectories.iter().flatten() {
            if tr.s >= n_states || tr.s_next >= n_states || tr.a >= n_actions {
                return Err(Error::Dataset(format!("transition {tr:?} out of range")));
            }
            if tr.terminal && tr.timeout {
                return Err(Error::Dataset(format!("transition {tr:?} is both terminal and timeout")));
            }
            if horizon.is_some_and(|h| tr.t >= h) {
                return Err(Error::Dataset(format!("transition at t={} exceeds horizon {}", tr.t, horizon.unwrap())));
            }
        }
        let mut ds = Self {
            n_states,
            n_actions,
            horizon,
            trajectories,
            counts: Vec::new(),
            counts_h: Vec::new(),
            provenance: provenance.into(),
        };
        ds.recount();
        Ok(ds)
    }

    fn recount(&mut self) {
        let sa = self.n_states * self.n_actions;
        self.counts = vec![0; sa];
        self.counts_h = vec![vec![0; sa]; self.horizon.unwrap_or(0)];
        for tr in self.trajectories.iter().flatten() {
            let idx = tr.s * self.n_actions + tr.a;
            self.counts[idx] += 1;
            if self.horizon.is_some() {
                self.counts_h[tr.t][idx] += 1;
            }
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn horizon(&self) -> Option<usize> {
        self.horizon
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> {
        self.trajectories.iter().flatten()
    }

    pub fn n_transitions(&self) -> usize {
        self.trajectories.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.n_transitions() == 0
    }

    pub fn count(&self, s: usize, a: usize) -> u64 {
        self.counts[s * self.n_actions + a]
    }

    /// Count at step `h`; zero when the dataset has no horizon.
    pub fn count_h(&self, h: usize, s: usize, a: usize) -> u64 {
        self.counts_h.get(h).map_or(0, |c| c[s * self.n_actions + a])
    }

    /// `{(s, a) : n(s, a) >= 1}`.
    pub fn support(&self) -> BTreeSet<(usize, usize)> {
        self.pairs_where(|idx| self.counts[idx] >= 1)
    }

    /// Per-step support `{(s, a) : n_h(s, a) >= 1}`.
    pub fn support_h(&self, h: usize) -> BTreeSet<(usize, usize)> {
        match self.counts_h.get(h) {
            Some(c) => self.pairs_where(|idx| c[idx] >= 1),
            None => BTreeSet::new(),
        }
    }

    fn pairs_where(&self, keep: impl Fn(usize) -> bool) -> BTreeSet<(usize, usize)> {
        (0..self.n_states * self.n_actions)
            .filter(|&i| keep(i))
            .map(|i| (i / self.n_actions, i % self.n_actions))
            .collect()
    }

    /// Mean logged reward per pair; zero off the support.
    pub fn empirical_reward(&self) -> SaTable {
        let mut sum = SaTable::zeros(self.n_states, self.n_actions);
        for tr in self.transitions() {
            sum.set(tr.s, tr.a, sum.get(tr.s, tr.a) + tr.r);
        }
        SaTable::from_fn(self.n_states, self.n_actions, |s, a| match self.count(s, a) {
            0 => 0.0,
            n => sum.get(s, a) / n as f64,
        })
    }

    /// Empirical frequency `n(s, a) / N`.
    pub fn empirical_frequency(&self) -> SaTable {
        let total = self.n_transitions().max(1) as f64;
        SaTable::from_fn(self.n_states, self.n_actions, |s, a| self.count(s, a) as f64 / total)
    }

    /// Same metadata, different trajectories; counts are recomputed.
    pub(crate) fn with_trajectories(&self, trajectories: Vec<Trajectory>, provenance: String) -> Result<Self> {
        Self::new(self.n_states, self.n_actions, self.horizon, trajectories, provenance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(episode: u64, t: usize, s: usize, a: usize) -> Transition {
        Transition { episode, t, s, a, r: 0.0, s_next: s, terminal: false, timeout: false }
    }

    #[test]
    fn counts_match_recount() {
        let ds =
            Dataset::new(3, 2, Some(4), vec![vec![tr(0, 0, 0, 1), tr(0, 1, 2, 0)], vec![tr(1, 0, 0, 1)]], "x").unwrap();
        assert_eq!(ds.count(0, 1), 2);
        assert_eq!(ds.count_h(0, 0, 1), 2);
        assert_eq!(ds.count_h(1, 2, 0), 1);
        assert_eq!(ds.support(), [(0, 1), (2, 0)].into());
        assert_eq!(ds.support_h(1), [(2, 0)].into());
    }

    #[test]
    fn empty_dataset_has_empty_support() {
        let ds = Dataset::new(3, 2, None, vec![], "").unwrap();
        assert!(ds.support().is_empty());
        assert!(ds.is_empty());
    }

    #[test]
    fn rejects_inconsistent_flags() {
        let mut t = tr(0, 0, 0, 0);
        t.terminal = true;
        t.timeout = true;
        assert!(Dataset::new(1, 1, None, vec![vec![t]], "").is_err());
        assert!(Dataset::new(1, 1, Some(2), vec![vec![tr(0, 2, 0, 0)]], "").is_err());
    }
}
