//! Exact dynamic programming on tabular models.
//!
//! Discounted values are the unnormalized sums `E[sum_t gamma^t r_t]`;
//! finite-horizon values are indexed by step `h = 0..=H` with `V_H = 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mdp::model::{Dynamics, MdpRef, SaTable, TabularMdp};
use crate::mdp::policy::{argmax_lowest, Policy};

/// Largest model solved by a dense LU factorization; above it policy
/// evaluation sweeps until the residual is below [`SWEEP_TOL`].
pub const DIRECT_SOLVE_MAX_STATES: usize = 2000;
pub const SWEEP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Values {
    Stationary(Vec<f64>),
    /// Rows `h = 0..=H`; the last row is the zero terminal value.
    TimeIndexed(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    pub signal_name: String,
    pub values: Values,
}

impl ValueTable {
    fn new(values: Values) -> Self {
        Self { signal_name: "signal".into(), values }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.signal_name = name.into();
        self
    }

    /// Value at step `h` (ignored for stationary tables).
    pub fn at(&self, h: usize, s: usize) -> f64 {
        match &self.values {
            Values::Stationary(v) => v[s],
            Values::TimeIndexed(v) => v[h][s],
        }
    }

    /// The first-step value vector.
    pub fn initial(&self) -> &[f64] {
        match &self.values {
            Values::Stationary(v) => v,
            Values::TimeIndexed(v) => &v[0],
        }
    }

    pub fn at_distribution(&self, d: &[f64]) -> f64 {
        self.initial().iter().zip(d).map(|(v, p)| v * p).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QValues {
    Stationary(SaTable),
    /// One table per step `h = 0..H`.
    TimeIndexed(Vec<SaTable>),
}

impl QValues {
    pub fn table(&self, h: usize) -> &SaTable {
        match self {
            QValues::Stationary(q) => q,
            QValues::TimeIndexed(q) => &q[h],
        }
    }

    /// Deterministic greedy policy with lowest-index tie-break.
    pub fn greedy(&self) -> Policy {
        let greedy_row = |q: &SaTable| (0..q.n_states()).map(|s| argmax_lowest(q.row(s))).collect::<Vec<_>>();
        match self {
            QValues::Stationary(q) => Policy::deterministic(q.n_actions(), &greedy_row(q)),
            QValues::TimeIndexed(qs) => {
                let actions: Vec<Vec<usize>> = qs.iter().map(greedy_row).collect();
                Policy::deterministic_time_indexed(qs[0].n_actions(), &actions)
            }
        }
    }
}

fn check_signal(mdp: MdpRef<'_>, signal: &SaTable) -> Result<()> {
    signal.check_dims(mdp.n_states(), mdp.n_actions())
}

fn policy_average(signal: &SaTable, policy: &Policy, h: usize, s: usize) -> f64 {
    signal.row(s).iter().zip(policy.probs(h, s)).map(|(r, p)| r * p).sum()
}

/// Row-major `P_pi[s][s']` and `r_pi[s]` for a stationary policy.
fn induced_chain(dyn_: &Dynamics, policy: &Policy, signal: &SaTable) -> (Vec<f64>, Vec<f64>) {
    let n = dyn_.n_states();
    let mut p = vec![0.0; n * n];
    let mut r = vec![0.0; n];
    for s in 0..n {
        r[s] = policy_average(signal, policy, 0, s);
        for (a, &pa) in policy.probs(0, s).iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for (sp, &q) in dyn_.next(s, a).iter().enumerate() {
                p[s * n + sp] += pa * q;
            }
        }
    }
    (p, r)
}

/// Solves `(I - gamma * M) x = b` (or its transpose) densely.
fn dense_solve(n: usize, m: &[f64], gamma: f64, b: &[f64], transpose: bool) -> Result<Vec<f64>> {
    let a = DMatrix::from_fn(n, n, |i, j| {
        let mij = if transpose { m[j * n + i] } else { m[i * n + j] };
        (if i == j { 1.0 } else { 0.0 }) - gamma * mij
    });
    let rhs = DVector::from_column_slice(b);
    a.lu()
        .solve(&rhs)
        .map(|x| x.iter().copied().collect())
        .ok_or_else(|| Error::Validation("singular policy-evaluation system".into()))
}

fn sweep_solve(n: usize, m: &[f64], gamma: f64, b: &[f64], transpose: bool) -> Vec<f64> {
    let mut x = b.to_vec();
    loop {
        let mut next = b.to_vec();
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                let mij = if transpose { m[j * n + i] } else { m[i * n + j] };
                acc += mij * x[j];
            }
            next[i] += gamma * acc;
        }
        let resid = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = next;
        if resid <= SWEEP_TOL * (1.0 - gamma) {
            return x;
        }
    }
}

pub(crate) fn discounted_evaluation(
    mdp: &TabularMdp,
    policy: &Policy,
    signal: &SaTable,
    direct: bool,
) -> Result<Vec<f64>> {
    let n = mdp.n_states();
    let (p, r) = induced_chain(mdp.dynamics(), policy, signal);
    if direct {
        dense_solve(n, &p, mdp.gamma(), &r, false)
    } else {
        Ok(sweep_solve(n, &p, mdp.gamma(), &r, false))
    }
}

/// Value of `policy` under `signal`.
pub fn policy_evaluation<'a>(mdp: impl Into<MdpRef<'a>>, policy: &Policy, signal: &SaTable) -> Result<ValueTable> {
    let mdp = mdp.into();
    check_signal(mdp, signal)?;
    policy.check_compatible(mdp)?;
    match mdp {
        MdpRef::Discounted(m) => {
            let direct = m.n_states() <= DIRECT_SOLVE_MAX_STATES;
            Ok(ValueTable::new(Values::Stationary(discounted_evaluation(m, policy, signal, direct)?)))
        }
        MdpRef::Finite(m) => {
            let (n, horizon) = (m.n_states(), m.horizon());
            let dyn_ = m.dynamics();
            let mut v = vec![vec![0.0; n]; horizon + 1];
            for h in (0..horizon).rev() {
                for s in 0..n {
                    let probs = policy.probs(h, s);
                    v[h][s] = (0..m.n_actions())
                        .filter(|&a| probs[a] > 0.0)
                        .map(|a| probs[a] * (signal.get(s, a) + dyn_.expect(s, a, &v[h + 1])))
                        .sum();
                }
            }
            Ok(ValueTable::new(Values::TimeIndexed(v)))
        }
    }
}

/// Expected return of `policy` from the model's initial distribution.
pub fn value_at_d0<'a>(mdp: impl Into<MdpRef<'a>>, policy: &Policy, signal: &SaTable) -> Result<f64> {
    let mdp = mdp.into();
    Ok(policy_evaluation(mdp, policy, signal)?.at_distribution(mdp.dynamics().d0()))
}

/// One-step backup of `v`.
pub fn q_values<'a>(mdp: impl Into<MdpRef<'a>>, v: &ValueTable, signal: &SaTable) -> Result<QValues> {
    let mdp = mdp.into();
    check_signal(mdp, signal)?;
    let dyn_ = mdp.dynamics();
    let (n, na) = (mdp.n_states(), mdp.n_actions());
    match (mdp, &v.values) {
        (MdpRef::Discounted(m), Values::Stationary(vs)) if vs.len() == n => {
            Ok(QValues::Stationary(SaTable::from_fn(n, na, |s, a| {
                signal.get(s, a) + m.gamma() * dyn_.expect(s, a, vs)
            })))
        }
        (MdpRef::Finite(m), Values::TimeIndexed(vs))
            if vs.len() == m.horizon() + 1 && vs.iter().all(|r| r.len() == n) =>
        {
            Ok(QValues::TimeIndexed(
                (0..m.horizon())
                    .map(|h| SaTable::from_fn(n, na, |s, a| signal.get(s, a) + dyn_.expect(s, a, &vs[h + 1])))
                    .collect(),
            ))
        }
        _ => Err(Error::Shape("value table does not match the model".into())),
    }
}

/// Iteration cap for discounted value iteration from `V = 0`.
pub fn value_iteration_cap(gamma: f64, tol: f64, scale: f64) -> usize {
    if gamma == 0.0 || scale == 0.0 {
        return 2;
    }
    let k = ((tol * (1.0 - gamma) / scale).ln() / gamma.ln()).ceil().max(0.0);
    k as usize + 100
}

/// Optimal values and the greedy (lowest-index) policy. Discounted models
/// iterate until the Bellman-optimality residual is at most `tol`;
/// finite-horizon models use exact backward induction.
pub fn value_iteration<'a>(mdp: impl Into<MdpRef<'a>>, signal: &SaTable, tol: f64) -> Result<(ValueTable, Policy)> {
    value_iteration_capped(mdp.into(), signal, tol, None)
}

pub(crate) fn value_iteration_capped(
    mdp: MdpRef<'_>,
    signal: &SaTable,
    tol: f64,
    cap_override: Option<usize>,
) -> Result<(ValueTable, Policy)> {
    check_signal(mdp, signal)?;
    if !(tol > 0.0) {
        return Err(Error::Validation(format!("tolerance must be positive, got {tol}")));
    }
    let dyn_ = mdp.dynamics();
    let (n, na) = (mdp.n_states(), mdp.n_actions());
    match mdp {
        MdpRef::Discounted(m) => {
            let gamma = m.gamma();
            let scale = signal.as_slice().iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
            let cap = cap_override.unwrap_or_else(|| value_iteration_cap(gamma, tol, scale));
            let mut v = vec![0.0; n];
            let mut residual = f64::INFINITY;
            for _ in 0..cap {
                let next: Vec<f64> = (0..n)
                    .map(|s| {
                        (0..na)
                            .map(|a| signal.get(s, a) + gamma * dyn_.expect(s, a, &v))
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
                    .collect();
                residual = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                v = next;
                // residual of the new iterate is at most gamma * residual
                if residual <= tol {
                    let table = ValueTable::new(Values::Stationary(v));
                    let policy = q_values(mdp, &table, signal)?.greedy();
                    return Ok((table, policy));
                }
            }
            Err(Error::NotConverged { iterations: cap, residual })
        }
        MdpRef::Finite(m) => {
            let horizon = m.horizon();
            let mut v = vec![vec![0.0; n]; horizon + 1];
            let mut actions = vec![vec![0; n]; horizon];
            for h in (0..horizon).rev() {
                for s in 0..n {
                    let q: Vec<f64> = (0..na).map(|a| signal.get(s, a) + dyn_.expect(s, a, &v[h + 1])).collect();
                    let a = argmax_lowest(&q);
                    actions[h][s] = a;
                    v[h][s] = q[a];
                }
            }
            Ok((ValueTable::new(Values::TimeIndexed(v)), Policy::deterministic_time_indexed(na, &actions)))
        }
    }
}

/// Normalized discounted state-action occupancy `d^pi`.
pub fn occupancy<'a>(mdp: impl Into<MdpRef<'a>>, policy: &Policy) -> Result<SaTable> {
    let m = match mdp.into() {
        MdpRef::Discounted(m) => m,
        MdpRef::Finite(_) => {
            return Err(Error::UnsupportedKind(
                "occupancy needs a discounted model; use finite_occupancy for the time-averaged variant".into(),
            ))
        }
    };
    policy.check_compatible(m.into())?;
    let n = m.n_states();
    let (p, _) = induced_chain(m.dynamics(), policy, &SaTable::zeros(n, m.n_actions()));
    let gamma = m.gamma();
    let b: Vec<f64> = m.dynamics().d0().iter().map(|x| (1.0 - gamma) * x).collect();
    let rho = if n <= DIRECT_SOLVE_MAX_STATES {
        dense_solve(n, &p, gamma, &b, true)?
    } else {
        sweep_solve(n, &p, gamma, &b, true)
    };
    Ok(SaTable::from_fn(n, m.n_actions(), |s, a| rho[s] * policy.probs(0, s)[a]))
}

/// Per-step state distributions `Pr(s_h = s)` for `h = 0..=H`.
pub fn state_distributions(mdp: &crate::mdp::FiniteMdp, policy: &Policy) -> Result<Vec<Vec<f64>>> {
    policy.check_compatible(mdp.into())?;
    let dyn_ = mdp.dynamics();
    let n = mdp.n_states();
    let mut out = vec![dyn_.d0().to_vec()];
    for h in 0..mdp.horizon() {
        let cur = &out[h];
        let mut next = vec![0.0; n];
        for s in 0..n {
            if cur[s] == 0.0 {
                continue;
            }
            for (a, &pa) in policy.probs(h, s).iter().enumerate() {
                if pa == 0.0 {
                    continue;
                }
                for (sp, &q) in dyn_.next(s, a).iter().enumerate() {
                    next[sp] += cur[s] * pa * q;
                }
            }
        }
        out.push(next);
    }
    Ok(out)
}

/// Time-averaged occupancy `(1/H) sum_h Pr(s_h = s, a_h = a)` of a
/// finite-horizon model.
pub fn finite_occupancy(mdp: &crate::mdp::FiniteMdp, policy: &Policy) -> Result<SaTable> {
    let dists = state_distributions(mdp, policy)?;
    let horizon = mdp.horizon();
    let mut d = SaTable::zeros(mdp.n_states(), mdp.n_actions());
    for (h, dist) in dists.iter().take(horizon).enumerate() {
        for (s, &ps) in dist.iter().enumerate() {
            for (a, &pa) in policy.probs(h, s).iter().enumerate() {
                d.set(s, a, d.get(s, a) + ps * pa / horizon as f64);
            }
        }
    }
    Ok(d)
}

/// Absolute residual of the performance-difference identity
/// `V^pi(d0) = h(d0) + 1/(1-gamma) E_{d^pi}[r + gamma E h(s') - h(s)]`.
pub fn pd_lemma_residual(mdp: &TabularMdp, policy: &Policy, h: &[f64]) -> Result<f64> {
    if h.len() != mdp.n_states() {
        return Err(Error::Shape(format!("comparator has {} entries, expected {}", h.len(), mdp.n_states())));
    }
    let d0 = mdp.dynamics().d0();
    let v = value_at_d0(mdp, policy, mdp.reward())?;
    let d = occupancy(mdp, policy)?;
    let gamma = mdp.gamma();
    let dyn_ = mdp.dynamics();
    let mut advantage = 0.0;
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let w = d.get(s, a);
            if w != 0.0 {
                advantage += w * (mdp.reward().get(s, a) + gamma * dyn_.expect(s, a, h) - h[s]);
            }
        }
    }
    let h0: f64 = h.iter().zip(d0).map(|(x, p)| x * p).sum();
    Ok((v - h0 - advantage / (1.0 - gamma)).abs())
}
