use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Tolerance applied to every probability vector at construction.
pub const PROB_TOL: f64 = 1e-12;

/// Dense table indexed by (state, action).
#[derive(Debug, Clone, PartialEq)]
pub struct SaTable {
    n_states: usize,
    n_actions: usize,
    data: Vec<f64>,
}

impl SaTable {
    pub fn new(n_states: usize, n_actions: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_states * n_actions {
            return Err(Error::Shape(format!("table has {} entries, expected {}x{}", data.len(), n_states, n_actions)));
        }
        Ok(Self { n_states, n_actions, data })
    }

    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self::filled(n_states, n_actions, 0.0)
    }

    pub fn filled(n_states: usize, n_actions: usize, value: f64) -> Self {
        Self { n_states, n_actions, data: vec![value; n_states * n_actions] }
    }

    pub fn from_fn(n_states: usize, n_actions: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n_states * n_actions);
        for s in 0..n_states {
            for a in 0..n_actions {
                data.push(f(s, a));
            }
        }
        Self { n_states, n_actions, data }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.data[s * self.n_actions + a]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, value: f64) {
        self.data[s * self.n_actions + a] = value;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.data[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn row_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.data[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { n_states: self.n_states, n_actions: self.n_actions, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    /// `self - scale * other`, elementwise.
    pub fn sub_scaled(&self, other: &SaTable, scale: f64) -> Result<Self> {
        self.check_dims(other.n_states, other.n_actions)?;
        Ok(Self {
            n_states: self.n_states,
            n_actions: self.n_actions,
            data: self.data.iter().zip(&other.data).map(|(x, y)| x - scale * y).collect(),
        })
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub(crate) fn check_dims(&self, n_states: usize, n_actions: usize) -> Result<()> {
        if self.n_states != n_states || self.n_actions != n_actions {
            return Err(Error::Shape(format!(
                "table is {}x{}, expected {}x{}",
                self.n_states, self.n_actions, n_states, n_actions
            )));
        }
        Ok(())
    }
}

/// Checks a probability vector and renormalizes it when the sum is off by
/// more than a few ulps but still within [`PROB_TOL`].
pub(crate) fn validate_distribution(p: &mut [f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Validation(format!("{what}: empty distribution")));
    }
    if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::Validation(format!("{what}: invalid probability {x}")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::Validation(format!("{what}: sums to {sum}, not 1")));
    }
    if (sum - 1.0).abs() > 8.0 * f64::EPSILON {
        p.iter_mut().for_each(|x| *x /= sum);
    }
    Ok(())
}

/// Transition kernel and initial distribution shared by both MDP flavors.
#[derive(Debug, Clone, PartialEq)]
pub struct Dynamics {
    n_states: usize,
    n_actions: usize,
    /// Row-major `[s][a][s']`.
    transition: Vec<f64>,
    d0: Vec<f64>,
}

impl Dynamics {
    pub fn new(n_states: usize, n_actions: usize, mut transition: Vec<f64>, mut d0: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Validation("need at least one state and one action".into()));
        }
        if transition.len() != n_states * n_actions * n_states {
            return Err(Error::Shape(format!(
                "transition has {} entries, expected {}",
                transition.len(),
                n_states * n_actions * n_states
            )));
        }
        if d0.len() != n_states {
            return Err(Error::Shape(format!("d0 has {} entries, expected {}", d0.len(), n_states)));
        }
        for (i, row) in transition.chunks_mut(n_states).enumerate() {
            validate_distribution(row, &format!("P(.|s={}, a={})", i / n_actions, i % n_actions))?;
        }
        validate_distribution(&mut d0, "d0")?;
        Ok(Self { n_states, n_actions, transition, d0 })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn next(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    pub fn d0(&self) -> &[f64] {
        &self.d0
    }

    /// Expected value of `v` at the successor of `(s, a)`.
    #[inline]
    pub fn expect(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        self.next(s, a).iter().zip(v).map(|(p, x)| p * x).sum()
    }

    pub fn is_deterministic(&self) -> bool {
        self.transition.chunks(self.n_states).all(|row| row.iter().filter(|&&p| p > 0.0).count() == 1)
    }
}

/// Discounted tabular MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    dynamics: Dynamics,
    reward: SaTable,
    gamma: f64,
}

impl TabularMdp {
    pub fn new(dynamics: Dynamics, reward: SaTable, gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Validation(format!("gamma must lie in [0,1), got {gamma}")));
        }
        reward.check_dims(dynamics.n_states, dynamics.n_actions)?;
        Ok(Self { dynamics, reward, gamma })
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn reward(&self) -> &SaTable {
        &self.reward
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n_states(&self) -> usize {
        self.dynamics.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.dynamics.n_actions
    }

    pub fn with_reward(&self, reward: SaTable) -> Result<Self> {
        Self::new(self.dynamics.clone(), reward, self.gamma)
    }
}

/// Horizon-H MDP. The time index lives in the algorithms, not in the state.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    dynamics: Dynamics,
    reward: SaTable,
    horizon: usize,
    terminal_states: BTreeSet<usize>,
}

impl FiniteMdp {
    pub fn new(dynamics: Dynamics, reward: SaTable, horizon: usize, terminal_states: BTreeSet<usize>) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Validation("horizon must be positive".into()));
        }
        reward.check_dims(dynamics.n_states, dynamics.n_actions)?;
        for &t in &terminal_states {
            if t >= dynamics.n_states {
                return Err(Error::Validation(format!("terminal state {t} out of range")));
            }
            for a in 0..dynamics.n_actions {
                if dynamics.next(t, a)[t] != 1.0 {
                    return Err(Error::Validation(format!("terminal state {t} does not self-loop under action {a}")));
                }
            }
        }
        Ok(Self { dynamics, reward, horizon, terminal_states })
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn reward(&self) -> &SaTable {
        &self.reward
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn terminal_states(&self) -> &BTreeSet<usize> {
        &self.terminal_states
    }

    pub fn n_states(&self) -> usize {
        self.dynamics.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.dynamics.n_actions
    }

    pub fn with_reward(&self, reward: SaTable) -> Result<Self> {
        Self::new(self.dynamics.clone(), reward, self.horizon, self.terminal_states.clone())
    }

    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        Self::new(self.dynamics.clone(), self.reward.clone(), horizon, self.terminal_states.clone())
    }

    /// Same dynamics and reward, discounted instead of truncated.
    pub fn to_discounted(&self, gamma: f64) -> Result<TabularMdp> {
        TabularMdp::new(self.dynamics.clone(), self.reward.clone(), gamma)
    }
}

/// Owned MDP of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Mdp {
    Discounted(TabularMdp),
    Finite(FiniteMdp),
}

impl From<TabularMdp> for Mdp {
    fn from(m: TabularMdp) -> Self {
        Mdp::Discounted(m)
    }
}

impl From<FiniteMdp> for Mdp {
    fn from(m: FiniteMdp) -> Self {
        Mdp::Finite(m)
    }
}

/// Borrowed view used by every solver so callers can pass either kind.
#[derive(Debug, Clone, Copy)]
pub enum MdpRef<'a> {
    Discounted(&'a TabularMdp),
    Finite(&'a FiniteMdp),
}

impl<'a> From<&'a TabularMdp> for MdpRef<'a> {
    fn from(m: &'a TabularMdp) -> Self {
        MdpRef::Discounted(m)
    }
}

impl<'a> From<&'a FiniteMdp> for MdpRef<'a> {
    fn from(m: &'a FiniteMdp) -> Self {
        MdpRef::Finite(m)
    }
}

impl<'a> From<&'a Mdp> for MdpRef<'a> {
    fn from(m: &'a Mdp) -> Self {
        match m {
            Mdp::Discounted(m) => MdpRef::Discounted(m),
            Mdp::Finite(m) => MdpRef::Finite(m),
        }
    }
}

impl<'a> MdpRef<'a> {
    pub fn dynamics(&self) -> &'a Dynamics {
        match self {
            MdpRef::Discounted(m) => m.dynamics(),
            MdpRef::Finite(m) => m.dynamics(),
        }
    }

    pub fn reward(&self) -> &'a SaTable {
        match self {
            MdpRef::Discounted(m) => m.reward(),
            MdpRef::Finite(m) => m.reward(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.dynamics().n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.dynamics().n_actions()
    }

    pub fn horizon(&self) -> Option<usize> {
        match self {
            MdpRef::Discounted(_) => None,
            MdpRef::Finite(m) => Some(m.horizon()),
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self {
            MdpRef::Discounted(m) => Some(m.gamma()),
            MdpRef::Finite(_) => None,
        }
    }
}

impl Mdp {
    pub fn as_ref(&self) -> MdpRef<'_> {
        self.into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_stochastic_rows() {
        let err = Dynamics::new(2, 1, vec![0.5, 0.4, 0.0, 1.0], vec![1.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        let err = Dynamics::new(2, 1, vec![1.5, -0.5, 0.0, 1.0], vec![1.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn renormalizes_rows_within_tolerance() {
        let d = Dynamics::new(2, 1, vec![0.5 + 1e-13, 0.5, 0.0, 1.0], vec![1.0, 0.0]).unwrap();
        let sum: f64 = d.next(0, 0).iter().sum();
        assert!((sum - 1.0).abs() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn gamma_must_be_below_one() {
        let d = Dynamics::new(1, 1, vec![1.0], vec![1.0]).unwrap();
        assert!(TabularMdp::new(d.clone(), SaTable::zeros(1, 1), 1.0).is_err());
        assert!(TabularMdp::new(d, SaTable::zeros(1, 1), 0.0).is_ok());
    }

    #[test]
    fn terminal_states_must_self_loop() {
        let d = Dynamics::new(2, 1, vec![0.0, 1.0, 1.0, 0.0], vec![1.0, 0.0]).unwrap();
        assert!(FiniteMdp::new(d, SaTable::zeros(2, 1), 3, [1].into()).is_err());
    }

    #[test]
    fn reward_shape_is_checked() {
        let d = Dynamics::new(1, 2, vec![1.0, 1.0], vec![1.0]).unwrap();
        assert!(matches!(TabularMdp::new(d, SaTable::zeros(1, 1), 0.5), Err(Error::Shape(_))));
    }
}
