use crate::error::{Error, Result};
use crate::mdp::model::{validate_distribution, MdpRef, SaTable};

/// Relative tolerance under which two action scores count as tied.
pub const TIE_TOL: f64 = 1e-12;

/// Index of the maximum, breaking (near-)ties toward the lowest index.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_TOL * best.abs().max(1.0);
    values.iter().position(|&v| v >= best - tol).unwrap_or(0)
}

/// Stationary or time-indexed action distributions.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Stationary(SaTable),
    /// One table per step `h = 0..H`.
    TimeIndexed(Vec<SaTable>),
}

impl Policy {
    pub fn stationary(mut table: SaTable) -> Result<Self> {
        for s in 0..table.n_states() {
            validate_distribution(table.row_mut(s), &format!("pi(.|s={s})"))?;
        }
        Ok(Policy::Stationary(table))
    }

    pub fn time_indexed(mut tables: Vec<SaTable>) -> Result<Self> {
        let first = tables.first().ok_or_else(|| Error::Validation("time-indexed policy needs H >= 1".into()))?;
        let (ns, na) = (first.n_states(), first.n_actions());
        for (h, table) in tables.iter_mut().enumerate() {
            table.check_dims(ns, na)?;
            for s in 0..ns {
                validate_distribution(table.row_mut(s), &format!("pi_{h}(.|s={s})"))?;
            }
        }
        Ok(Policy::TimeIndexed(tables))
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Policy::Stationary(SaTable::filled(n_states, n_actions, 1.0 / n_actions as f64))
    }

    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Self {
        Policy::Stationary(one_hot(n_actions, actions))
    }

    pub fn deterministic_time_indexed(n_actions: usize, actions: &[Vec<usize>]) -> Self {
        Policy::TimeIndexed(actions.iter().map(|row| one_hot(n_actions, row)).collect())
    }

    pub fn n_states(&self) -> usize {
        self.table(0).n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.table(0).n_actions()
    }

    pub fn horizon(&self) -> Option<usize> {
        match self {
            Policy::Stationary(_) => None,
            Policy::TimeIndexed(t) => Some(t.len()),
        }
    }

    pub fn is_stationary(&self) -> bool {
        matches!(self, Policy::Stationary(_))
    }

    /// Table used at step `h`; stationary policies ignore `h`.
    pub fn table(&self, h: usize) -> &SaTable {
        match self {
            Policy::Stationary(t) => t,
            Policy::TimeIndexed(t) => &t[h],
        }
    }

    #[inline]
    pub fn probs(&self, h: usize, s: usize) -> &[f64] {
        self.table(h).row(s)
    }

    /// Most likely action at `(h, s)`, lowest index on ties.
    pub fn mode(&self, h: usize, s: usize) -> usize {
        argmax_lowest(self.probs(h, s))
    }

    pub fn is_deterministic(&self) -> bool {
        let tables: Vec<&SaTable> = match self {
            Policy::Stationary(t) => vec![t],
            Policy::TimeIndexed(t) => t.iter().collect(),
        };
        tables.iter().all(|t| t.as_slice().iter().all(|&p| p == 0.0 || p == 1.0))
    }

    /// Checks that the policy can drive `mdp`. Stationary policies are
    /// accepted on finite-horizon models (applied at every step).
    pub fn check_compatible(&self, mdp: MdpRef<'_>) -> Result<()> {
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        if self.n_states() != ns || self.n_actions() != na {
            return Err(Error::Shape(format!(
                "policy is {}x{}, model is {}x{}",
                self.n_states(),
                self.n_actions(),
                ns,
                na
            )));
        }
        match (self, mdp.horizon()) {
            (Policy::TimeIndexed(_), None) => {
                Err(Error::UnsupportedKind("time-indexed policy on a discounted model".into()))
            }
            (Policy::TimeIndexed(t), Some(h)) if t.len() != h => {
                Err(Error::Shape(format!("policy covers {} steps, model horizon is {}", t.len(), h)))
            }
            _ => Ok(()),
        }
    }
}

fn one_hot(n_actions: usize, actions: &[usize]) -> SaTable {
    SaTable::from_fn(actions.len(), n_actions, |s, a| if actions[s] == a { 1.0 } else { 0.0 })
}

/// Every deterministic stationary policy, in lexicographic order of the
/// action vector (state 0 most significant).
pub fn deterministic_policies(n_states: usize, n_actions: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = (n_actions as u128).checked_pow(n_states as u32).unwrap_or(u128::MAX);
    (0..total).map(move |mut code| {
        let mut actions = vec![0; n_states];
        for s in (0..n_states).rev() {
            actions[s] = (code % n_actions as u128) as usize;
            code /= n_actions as u128;
        }
        actions
    })
}
