//! Lagrangian solver and the enumeration oracle.

use crate::cmdp::model::{Cmdp, CmdpPolicy, CmdpSolution, MixedPolicy};
use crate::error::{Error, Result};
use crate::mdp::{
    argmax_lowest, deterministic_policies, policy_evaluation, q_values, value_iteration, MdpRef, Policy, SaTable,
};

/// Largest number of deterministic policies the oracle will enumerate.
pub const ORACLE_MAX_POLICIES: u128 = 4096;

const POLICY_ITERATION_CAP: usize = 1000;

/// Exactly optimal deterministic policy for `signal`: backward induction
/// on finite models, value iteration polished by policy iteration on
/// discounted ones (so the result does not depend on a VI tolerance).
pub fn greedy_exact(mdp: MdpRef<'_>, signal: &SaTable) -> Result<Policy> {
    let scale = signal.as_slice().iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    let (_, mut policy) = value_iteration(mdp, signal, 1e-10 * scale)?;
    if mdp.horizon().is_some() {
        return Ok(policy);
    }
    for _ in 0..POLICY_ITERATION_CAP {
        let v = policy_evaluation(mdp, &policy, signal)?;
        let q = q_values(mdp, &v, signal)?;
        let q = q.table(0);
        let mut changed = false;
        let actions: Vec<usize> = (0..mdp.n_states())
            .map(|s| {
                let current = policy.mode(0, s);
                let best = argmax_lowest(q.row(s));
                let margin = 1e-12 * q.get(s, current).abs().max(1.0);
                if q.get(s, best) > q.get(s, current) + margin {
                    changed = true;
                    best
                } else {
                    current
                }
            })
            .collect();
        if !changed {
            return Ok(policy);
        }
        policy = Policy::deterministic(mdp.n_actions(), &actions);
    }
    Err(Error::NotConverged { iterations: POLICY_ITERATION_CAP, residual: f64::NAN })
}

struct Point {
    policy: Policy,
    f: f64,
    g: f64,
}

impl Point {
    fn lagrangian(&self, lambda: f64, budget: f64) -> f64 {
        self.f - lambda * (self.g - budget)
    }
}

fn greedy_point(cmdp: &Cmdp, lambda: f64) -> Result<Point> {
    let signal = cmdp.f.sub_scaled(&cmdp.g, lambda)?;
    let policy = greedy_exact(cmdp.model(), &signal)?;
    let (f, g) = cmdp.evaluate(&policy)?;
    Ok(Point { policy, f, g })
}

fn span(t: &SaTable) -> f64 {
    t.max() - t.min()
}

/// Smallest achievable `V_g(d0)`.
pub fn min_violation(cmdp: &Cmdp) -> Result<f64> {
    let policy = greedy_exact(cmdp.model(), &cmdp.g.map(|x| -x))?;
    Ok(cmdp.evaluate(&policy)?.1)
}

fn single(point: Point, lambda: f64) -> CmdpSolution {
    CmdpSolution {
        value: point.f,
        violation: point.g,
        lambda,
        policy: CmdpPolicy::Single(point.policy),
        method: "lagrangian".into(),
    }
}

/// Solves the CMDP through its Lagrangian dual. The multiplier is searched
/// by bisection on a bracket `[lo, hi]` whose greedy policies violate and
/// satisfy the budget; each step splits at the bracket's breakpoint (where
/// both bracketing policies have equal Lagrangian) and stops once no policy
/// beats them there, i.e. once the primal-dual gap is at most `tol`. The
/// answer is then the episode mixture of the two bracketing policies that
/// meets the budget exactly.
pub fn solve_lagrangian(cmdp: &Cmdp, tol: f64) -> Result<CmdpSolution> {
    if !(tol > 0.0) {
        return Err(Error::Validation(format!("tolerance must be positive, got {tol}")));
    }
    let budget = cmdp.budget;
    let floor = min_violation(cmdp)?;
    if floor > budget + tol {
        return Err(Error::Infeasible { min_violation: floor, budget });
    }

    let mut lo = greedy_point(cmdp, 0.0)?;
    if lo.g <= budget {
        return Ok(single(lo, 0.0));
    }

    let cap = (span(&cmdp.f) / tol).max(1.0);
    let mut lambda_hi = 1.0;
    let mut hi = greedy_point(cmdp, lambda_hi)?;
    while hi.g > budget {
        lambda_hi *= 2.0;
        if lambda_hi > cap {
            // the feasibility floor sits within tol of the budget
            if floor <= budget + tol && hi.g <= budget + tol {
                break;
            }
            return Err(Error::MultiplierCap { cap });
        }
        hi = greedy_point(cmdp, lambda_hi)?;
    }
    if hi.g > budget {
        return Ok(single(hi, lambda_hi));
    }
    let mut lambda_lo = 0.0;

    loop {
        // slope of the segment joining the two bracket points
        let dg = lo.g - hi.g;
        let lambda = if dg > 0.0 { ((lo.f - hi.f) / dg).max(0.0) } else { 0.5 * (lambda_lo + lambda_hi) };
        let probe = greedy_point(cmdp, lambda)?;
        let bracket_value = lo.lagrangian(lambda, budget).max(hi.lagrangian(lambda, budget));
        let gap = probe.lagrangian(lambda, budget) - bracket_value;
        if gap <= tol || lambda_hi - lambda_lo <= f64::EPSILON * lambda_hi.max(1.0) {
            let alpha = if dg > 0.0 { ((budget - hi.g) / dg).clamp(0.0, 1.0) } else { 0.0 };
            let value = alpha * lo.f + (1.0 - alpha) * hi.f;
            let violation = alpha * lo.g + (1.0 - alpha) * hi.g;
            let policy = if alpha == 0.0 {
                CmdpPolicy::Single(hi.policy)
            } else {
                CmdpPolicy::Mixed(MixedPolicy::new(lo.policy, hi.policy, alpha)?)
            };
            return Ok(CmdpSolution { value, violation, lambda, policy, method: "lagrangian".into() });
        }
        if probe.g > budget {
            lambda_lo = lambda;
            lo = probe;
        } else {
            lambda_hi = lambda;
            hi = probe;
        }
    }
}

/// Every deterministic policy the oracle enumerates: stationary on
/// discounted models, time-indexed on finite ones.
fn enumerate(mdp: MdpRef<'_>) -> Result<Vec<Policy>> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let slots = ns * mdp.horizon().unwrap_or(1);
    let count = u32::try_from(slots).ok().and_then(|k| (na as u128).checked_pow(k));
    if count.is_none_or(|c| c > ORACLE_MAX_POLICIES) {
        let shown = count.map_or_else(|| format!("{na}^{slots}"), |c| c.to_string());
        return Err(Error::TooLarge(format!(
            "{shown} deterministic policies exceed the oracle limit {ORACLE_MAX_POLICIES}"
        )));
    }
    Ok(deterministic_policies(slots, na)
        .map(|actions| match mdp.horizon() {
            None => Policy::deterministic(na, &actions),
            Some(_) => {
                let rows: Vec<Vec<usize>> = actions.chunks(ns).map(<[usize]>::to_vec).collect();
                Policy::deterministic_time_indexed(na, &rows)
            }
        })
        .collect())
}

/// Exhaustive optimum over deterministic policies and all budget-feasible
/// pairwise episode mixtures. `lambda` is the smallest optimal multiplier,
/// `max(0, max over g_k > budget of (f_k - value) / (g_k - budget))`.
pub fn brute_force_oracle(cmdp: &Cmdp) -> Result<CmdpSolution> {
    let points: Vec<Point> = enumerate(cmdp.model())?
        .into_iter()
        .map(|policy| cmdp.evaluate(&policy).map(|(f, g)| Point { policy, f, g }))
        .collect::<Result<_>>()?;
    let budget = cmdp.budget;
    // (value, violation, i, j, alpha): alpha weights point i
    let mut best: Option<(f64, f64, usize, usize, f64)> = None;
    let mut consider = |cand: (f64, f64, usize, usize, f64)| {
        if best.as_ref().is_none_or(|b| cand.0 > b.0) {
            best = Some(cand);
        }
    };
    for (i, p) in points.iter().enumerate() {
        if p.g <= budget {
            consider((p.f, p.g, i, i, 1.0));
        }
    }
    for (i, p) in points.iter().enumerate() {
        if p.g <= budget {
            continue;
        }
        for (j, q) in points.iter().enumerate() {
            if q.g >= budget {
                continue;
            }
            let alpha = (budget - q.g) / (p.g - q.g);
            consider((alpha * p.f + (1.0 - alpha) * q.f, budget, i, j, alpha));
        }
    }
    let Some((value, violation, i, j, alpha)) = best else {
        let floor = points.iter().map(|p| p.g).fold(f64::INFINITY, f64::min);
        return Err(Error::Infeasible { min_violation: floor, budget });
    };
    let lambda = points.iter().filter(|p| p.g > budget).map(|p| (p.f - value) / (p.g - budget)).fold(0.0_f64, f64::max);
    let policy = if i == j {
        CmdpPolicy::Single(points[i].policy.clone())
    } else {
        CmdpPolicy::Mixed(MixedPolicy::new(points[i].policy.clone(), points[j].policy.clone(), alpha)?)
    };
    Ok(CmdpSolution { value, violation, lambda, policy, method: "oracle".into() })
}
