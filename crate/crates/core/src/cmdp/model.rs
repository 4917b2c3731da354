use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::io::{parse_policy, write_policy};
use crate::mdp::{value_at_d0, Mdp, MdpRef, Policy, SaTable};

/// `max_pi V_f(d0)` subject to `V_g(d0) <= budget`.
#[derive(Debug, Clone)]
pub struct Cmdp {
    pub mdp: Mdp,
    pub f: SaTable,
    pub g: SaTable,
    pub budget: f64,
}

impl Cmdp {
    pub fn new(mdp: Mdp, f: SaTable, g: SaTable, budget: f64) -> Result<Self> {
        let m = mdp.as_ref();
        f.check_dims(m.n_states(), m.n_actions())?;
        g.check_dims(m.n_states(), m.n_actions())?;
        if !(budget >= 0.0) {
            return Err(Error::Validation(format!("budget must be nonnegative, got {budget}")));
        }
        Ok(Self { mdp, f, g, budget })
    }

    pub fn with_budget(&self, budget: f64) -> Result<Self> {
        Self::new(self.mdp.clone(), self.f.clone(), self.g.clone(), budget)
    }

    pub fn model(&self) -> MdpRef<'_> {
        self.mdp.as_ref()
    }

    /// `(V_f(d0), V_g(d0))` of a single policy.
    pub fn evaluate(&self, policy: &Policy) -> Result<(f64, f64)> {
        Ok((value_at_d0(self.model(), policy, &self.f)?, value_at_d0(self.model(), policy, &self.g)?))
    }

    pub fn evaluate_any(&self, policy: &CmdpPolicy) -> Result<(f64, f64)> {
        match policy {
            CmdpPolicy::Single(p) => self.evaluate(p),
            CmdpPolicy::Mixed(m) => {
                let (fa, ga) = self.evaluate(&m.a)?;
                let (fb, gb) = self.evaluate(&m.b)?;
                Ok((m.alpha * fa + (1.0 - m.alpha) * fb, m.alpha * ga + (1.0 - m.alpha) * gb))
            }
        }
    }
}

/// The implicit constrained problem of a dataset: objective `data_reward`,
/// cost 1 on every pair outside `support`, budget 0.
pub fn build_implicit_cmdp(mdp: &Mdp, data_reward: &SaTable, support: &BTreeSet<(usize, usize)>) -> Result<Cmdp> {
    let m = mdp.as_ref();
    if let Some(&(s, a)) = support.iter().find(|&&(s, a)| s >= m.n_states() || a >= m.n_actions()) {
        return Err(Error::Validation(format!("support pair ({s}, {a}) is outside the model")));
    }
    let g = support_cost(m.n_states(), m.n_actions(), support);
    Cmdp::new(mdp.clone(), data_reward.clone(), g, 0.0)
}

/// `c(s, a) = 1[(s, a) not in support]`.
pub fn support_cost(n_states: usize, n_actions: usize, support: &BTreeSet<(usize, usize)>) -> SaTable {
    SaTable::from_fn(n_states, n_actions, |s, a| if support.contains(&(s, a)) { 0.0 } else { 1.0 })
}

/// Episode-level mixture: run `a` with probability `alpha`, else `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedPolicy {
    pub a: Policy,
    pub b: Policy,
    pub alpha: f64,
}

impl MixedPolicy {
    pub fn new(a: Policy, b: Policy, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Validation(format!("mixture weight must lie in [0, 1], got {alpha}")));
        }
        Ok(Self { a, b, alpha })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CmdpPolicy {
    Single(Policy),
    Mixed(MixedPolicy),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmdpSolution {
    pub value: f64,
    pub violation: f64,
    pub lambda: f64,
    pub policy: CmdpPolicy,
    pub method: String,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum PolicyJson {
    Single { policy: String },
    Mixed { alpha: f64, a: String, b: String },
}

#[derive(Serialize, Deserialize)]
struct SolutionJson {
    value: f64,
    violation: f64,
    lambda: f64,
    method: String,
    policy: PolicyJson,
}

impl CmdpSolution {
    /// JSON with fields `value`, `violation`, `lambda`, `method` and
    /// `policy` (policies embedded in their text format).
    pub fn to_json(&self) -> Result<String> {
        let policy = match &self.policy {
            CmdpPolicy::Single(p) => PolicyJson::Single { policy: write_policy(p) },
            CmdpPolicy::Mixed(m) => PolicyJson::Mixed { alpha: m.alpha, a: write_policy(&m.a), b: write_policy(&m.b) },
        };
        let json = SolutionJson {
            value: self.value,
            violation: self.violation,
            lambda: self.lambda,
            method: self.method.clone(),
            policy,
        };
        Ok(serde_json::to_string_pretty(&json)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let json: SolutionJson = serde_json::from_str(text)?;
        let policy = match json.policy {
            PolicyJson::Single { policy } => CmdpPolicy::Single(parse_policy(&policy)?),
            PolicyJson::Mixed { alpha, a, b } => {
                CmdpPolicy::Mixed(MixedPolicy::new(parse_policy(&a)?, parse_policy(&b)?, alpha)?)
            }
        };
        Ok(Self { value: json.value, violation: json.violation, lambda: json.lambda, policy, method: json.method })
    }
}
