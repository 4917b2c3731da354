use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cmdp::model::{build_implicit_cmdp, support_cost, Cmdp, CmdpPolicy};
use crate::cmdp::solve::solve_lagrangian;
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::mdp::{value_at_d0, Mdp, MdpRef, Policy, SaTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityPoint {
    pub delta: f64,
    pub kappa: f64,
    pub lambda: f64,
}

/// `kappa(delta) = value(budget + delta) - value(budget)` on a sorted grid
/// of nonnegative relaxations, with the multiplier of each relaxed solve.
pub fn sensitivity_curve(cmdp: &Cmdp, delta_grid: &[f64], tol: f64) -> Result<Vec<SensitivityPoint>> {
    if delta_grid.iter().any(|&d| !(d >= 0.0)) {
        return Err(Error::Validation("relaxations must be nonnegative".into()));
    }
    if delta_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Validation("relaxation grid must be sorted".into()));
    }
    let base = solve_lagrangian(cmdp, tol)?.value;
    delta_grid
        .iter()
        .map(|&delta| {
            let sol = solve_lagrangian(&cmdp.with_budget(cmdp.budget + delta)?, tol)?;
            Ok(SensitivityPoint { delta, kappa: sol.value - base, lambda: sol.lambda })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualBoundCheck {
    pub delta: f64,
    pub lambda_delta: f64,
    pub kappa: f64,
    /// `kappa / delta - lambda_delta`; nonnegative when the bound holds.
    pub margin: f64,
    pub pass: bool,
}

/// Checks `lambda_delta <= kappa(delta) / delta + tol`.
pub fn dual_bound_check(cmdp: &Cmdp, delta: f64, tol: f64) -> Result<DualBoundCheck> {
    if !(delta > 0.0) {
        return Err(Error::Validation(format!("delta must be positive, got {delta}")));
    }
    let point = sensitivity_curve(cmdp, &[delta], tol)?[0];
    let margin = point.kappa / delta - point.lambda;
    Ok(DualBoundCheck { delta, lambda_delta: point.lambda, kappa: point.kappa, margin, pass: margin >= -tol })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Escape {
    /// Probability of ever taking an off-support pair: within the horizon
    /// on finite models, over unbounded time on discounted ones.
    pub probability: f64,
    /// `(1 - gamma) sum_t gamma^t P(escaped by t)`; discounted models only.
    pub discounted: Option<f64>,
}

/// Exact escape probabilities from the initial distribution. The finite
/// case pushes the not-yet-escaped mass forward step by step; the
/// discounted case solves the absorbing-chain systems restricted to the
/// support. A policy that never leaves the support scores exactly 0.
pub fn escape_probability<'a>(
    mdp: impl Into<MdpRef<'a>>,
    policy: &Policy,
    support: &BTreeSet<(usize, usize)>,
) -> Result<Escape> {
    let mdp = mdp.into();
    policy.check_compatible(mdp)?;
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let dyn_ = mdp.dynamics();
    let inside = |s: usize, a: usize| support.contains(&(s, a));
    // probability of an off-support action in s at step t
    let off = |t: usize, s: usize| -> f64 { (0..na).filter(|&a| !inside(s, a)).map(|a| policy.probs(t, s)[a]).sum() };

    match (mdp.horizon(), mdp.gamma()) {
        (Some(h), _) => {
            let mut mass = dyn_.d0().to_vec();
            let mut escaped = 0.0;
            for t in 0..h {
                let mut next = vec![0.0; ns];
                for s in (0..ns).filter(|&s| mass[s] > 0.0) {
                    escaped += mass[s] * off(t, s);
                    for a in (0..na).filter(|&a| inside(s, a)) {
                        let w = mass[s] * policy.probs(t, s)[a];
                        for (sp, &p) in dyn_.next(s, a).iter().enumerate() {
                            next[sp] += w * p;
                        }
                    }
                }
                mass = next;
            }
            Ok(Escape { probability: escaped.clamp(0.0, 1.0), discounted: None })
        }
        (None, Some(gamma)) => {
            // K[s][s'] restricted to support; e[s] = off-support action mass
            let mut kmat = DMatrix::<f64>::zeros(ns, ns);
            let e: Vec<f64> = (0..ns).map(|s| off(0, s)).collect();
            for s in 0..ns {
                for a in (0..na).filter(|&a| inside(s, a)) {
                    let w = policy.probs(0, s)[a];
                    for (sp, &p) in dyn_.next(s, a).iter().enumerate() {
                        kmat[(s, sp)] += w * p;
                    }
                }
            }
            // states with a K-path to an escaping state; the rest never escape
            let mut live: Vec<bool> = e.iter().map(|&x| x > 0.0).collect();
            let mut changed = true;
            while changed {
                changed = false;
                for s in 0..ns {
                    if !live[s] && (0..ns).any(|sp| live[sp] && kmat[(s, sp)] > 0.0) {
                        live[s] = true;
                        changed = true;
                    }
                }
            }
            let idx: Vec<usize> = (0..ns).filter(|&s| live[s]).collect();
            if idx.is_empty() {
                return Ok(Escape { probability: 0.0, discounted: Some(0.0) });
            }
            let m = idx.len();
            let k_live = DMatrix::from_fn(m, m, |i, j| kmat[(idx[i], idx[j])]);
            let e_live = DVector::from_iterator(m, idx.iter().map(|&s| e[s]));
            let d0 = DVector::from_iterator(m, idx.iter().map(|&s| dyn_.d0()[s]));
            let solve = |discount: f64| -> Result<f64> {
                let system = DMatrix::<f64>::identity(m, m) - k_live.scale(discount);
                let x = system.lu().solve(&e_live).ok_or_else(|| Error::Validation("singular escape system".into()))?;
                Ok(d0.dot(&x))
            };
            // discounted: (1 - gamma) sum_t gamma^t P(escaped by t) = sum_t gamma^t P(escape at t)
            let discounted = solve(gamma)?.clamp(0.0, 1.0);
            Ok(Escape { probability: solve(1.0)?.clamp(0.0, 1.0), discounted: Some(discounted) })
        }
        (None, None) => unreachable!("a model is either finite or discounted"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalReport {
    /// `V_r~(pi_dagger) - V_r~(pi_hat)` at the initial distribution.
    pub regret_data_reward: f64,
    /// `V_c(pi_hat)` with `c` the off-support indicator.
    pub support_violation: f64,
    pub escape_probability: f64,
    /// `None` on finite-horizon models.
    pub discounted_escape: Option<f64>,
}

impl SurvivalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Solves the implicit problem of `dataset` under `data_reward` and
/// measures how far `learned` is from its solution and from the support.
/// An implicit problem with no in-support policy is reported as
/// [`Error::Infeasible`].
pub fn verify_survival(
    true_mdp: &Mdp,
    dataset: &Dataset,
    data_reward: &SaTable,
    learned: &Policy,
) -> Result<SurvivalReport> {
    let support = dataset.support();
    let cmdp = build_implicit_cmdp(true_mdp, data_reward, &support)?;
    let optimum = solve_lagrangian(&cmdp, 1e-9)?;
    let m = true_mdp.as_ref();
    let learned_value = value_at_d0(m, learned, data_reward)?;
    let cost = support_cost(m.n_states(), m.n_actions(), &support);
    let support_violation = value_at_d0(m, learned, &cost)?;
    let escape = escape_probability(m, learned, &support)?;
    let optimum_value = match &optimum.policy {
        CmdpPolicy::Single(p) => value_at_d0(m, p, data_reward)?,
        CmdpPolicy::Mixed(_) => optimum.value,
    };
    Ok(SurvivalReport {
        regret_data_reward: optimum_value - learned_value,
        support_violation,
        escape_probability: escape.probability,
        discounted_escape: escape.discounted,
    })
}
