//! Shared steps of every experiment: load the true model, log and prepare a
//! dataset, train a learner, score the result.

use std::collections::BTreeSet;

use crate::bias::{
    check_full_length_condition, check_gap_condition, check_rmax_condition, estimate_positive_bias,
    length_return_table, BiasReport,
};
use crate::cmdp::{escape_probability, support_cost};
use crate::datagen::{
    collect, corrupt, extend_absorbing, gridworld_recipe, strip_terminal_transitions, Allocation, CollectionSpec,
    Dataset, TerminationRule,
};
use crate::error::{Error, Result};
use crate::gridworld::{build_gridworld, GridLayout, GridRewards, GridWorld};
use crate::learners::{
    bc_train, evaluate_exact, evaluate_mc, pevi_train, ppi_train, pqi_train, vi_lcb_train, FilterConfig, PeviConfig,
    RewardKind, ViLcbConfig,
};
use crate::mdp::io::{parse_mdp, parse_policy};
use crate::mdp::{value_at_d0, value_iteration, Mdp, MdpRef, Policy};
use crate::runner::config::{CollectionConfig, DataConfig, Evaluation, LearnerSpec, MdpSource, PeviBounds};

/// The true model of an experiment. The grid keeps its layout so the
/// logging recipe can find the lava route.
#[derive(Debug, Clone)]
pub enum World {
    Grid(GridWorld),
    File(Mdp),
}

impl World {
    pub fn load(source: &MdpSource) -> Result<Self> {
        match source {
            MdpSource::Gridworld { layout, horizon } => {
                let layout = match layout {
                    Some(path) => GridLayout::parse(&read(path)?)?,
                    None => GridLayout::default(),
                };
                Ok(World::Grid(build_gridworld(&layout, GridRewards::default(), *horizon)?))
            }
            MdpSource::File { path } => Ok(World::File(parse_mdp(&read(path)?)?)),
        }
    }

    pub fn model(&self) -> MdpRef<'_> {
        match self {
            World::Grid(g) => MdpRef::Finite(&g.mdp),
            World::File(m) => m.as_ref(),
        }
    }

    pub fn to_mdp(&self) -> Mdp {
        match self {
            World::Grid(g) => Mdp::Finite(g.mdp.clone()),
            World::File(m) => m.clone(),
        }
    }
}

pub(crate) fn read(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn default_timeout(mdp: MdpRef<'_>) -> usize {
    match mdp {
        MdpRef::Finite(m) => TerminationRule::for_finite(m).timeout_at,
        MdpRef::Discounted(_) => 100,
    }
}

/// Logs the uncorrupted dataset of one seed, then applies the configured
/// terminal stripping and absorbing-state padding.
pub fn build_dataset(world: &World, data: &DataConfig, seed: u64) -> Result<Dataset> {
    let mdp = world.model();
    let raw = match (&data.collection, world) {
        (CollectionConfig::GridRecipe { n_optimal, n_lava }, World::Grid(g)) => {
            gridworld_recipe(g, *n_optimal, *n_lava, seed)?
        }
        (CollectionConfig::GridRecipe { .. }, World::File(_)) => {
            return Err(Error::Config("behavior `grid_recipe` needs the gridworld model".into()))
        }
        (CollectionConfig::Uniform { n_episodes, timeout_at }, _) => {
            let policy = Policy::uniform(mdp.n_states(), mdp.n_actions());
            collect_with(mdp, policy, *n_episodes, *timeout_at, seed)?
        }
        (CollectionConfig::Optimal { n_episodes, timeout_at }, _) => {
            let (_, policy) = value_iteration(mdp, mdp.reward(), 1e-12)?;
            collect_with(mdp, policy, *n_episodes, *timeout_at, seed)?
        }
        (CollectionConfig::PolicyFile { path, n_episodes, timeout_at }, _) => {
            let policy = parse_policy(&read(path)?)?;
            collect_with(mdp, policy, *n_episodes, *timeout_at, seed)?
        }
    };
    let mut ds = if data.strip_terminal { strip_terminal_transitions(&raw)? } else { raw };
    if let MdpRef::Finite(m) = mdp {
        if !data.extend_absorbing.is_empty() {
            ds = extend_absorbing(&ds, m, &data.extend_absorbing)?;
        }
    }
    Ok(ds)
}

fn collect_with(
    mdp: MdpRef<'_>,
    policy: Policy,
    n_episodes: usize,
    timeout_at: Option<usize>,
    seed: u64,
) -> Result<Dataset> {
    let rule = TerminationRule {
        stop_on_states: BTreeSet::new(),
        timeout_at: timeout_at.unwrap_or_else(|| default_timeout(mdp)),
    };
    let spec = CollectionSpec { behaviors: vec![(policy, 1.0)], n_episodes, rule, seed, allocation: Allocation::Exact };
    collect(mdp, &spec)
}

/// Relabels `dataset` for `kind`; the random kind draws from `seed`.
pub fn relabel(dataset: &Dataset, kind: RewardKind, seed: u64) -> Result<Dataset> {
    corrupt(dataset, &kind.corruption(seed))
}

fn reward_range(dataset: &Dataset) -> (f64, f64) {
    dataset.transitions().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(t.r), hi.max(t.r)))
}

fn resolve_gamma(gamma: Option<f64>, model_gamma: Option<f64>, learner: &str) -> Result<f64> {
    gamma
        .or(model_gamma)
        .ok_or_else(|| Error::Config(format!("{learner} on a finite-horizon model needs an explicit gamma")))
}

/// `max|r| / (1 - gamma)` over the logged rewards, at least `1 / (1 - gamma)`
/// when every reward is zero.
fn resolve_v_max(v_max: Option<f64>, dataset: &Dataset, gamma: f64) -> f64 {
    v_max.unwrap_or_else(|| {
        let r = dataset.transitions().map(|t| t.r.abs()).fold(0.0, f64::max);
        (if r > 0.0 { r } else { 1.0 }) / (1.0 - gamma)
    })
}

/// A trained policy plus any learner warnings.
#[derive(Debug, Clone)]
pub struct Trained {
    pub policy: Policy,
    pub warnings: Vec<String>,
}

/// Trains `spec` on `dataset`, which carries rewards of `kind`.
/// `model_gamma` is the fallback discount for learners that need one.
pub fn train(
    spec: &LearnerSpec,
    dataset: &Dataset,
    kind: RewardKind,
    model_gamma: Option<f64>,
    seed: u64,
) -> Result<Trained> {
    let done = |policy| Ok(Trained { policy, warnings: Vec::new() });
    match spec {
        LearnerSpec::Bc => done(bc_train(dataset)?),
        LearnerSpec::Pevi { beta, bounds } => {
            let horizon =
                dataset.horizon().ok_or_else(|| Error::Config("pevi needs a finite-horizon dataset".into()))?;
            let config = match bounds {
                PeviBounds::Kind => PeviConfig::for_kind(kind, *beta, horizon)?,
                PeviBounds::Range => {
                    let (lo, hi) = reward_range(dataset);
                    if !lo.is_finite() {
                        return Err(Error::Dataset("cannot take a reward range of an empty dataset".into()));
                    }
                    PeviConfig::from_reward_range(lo, hi, *beta, horizon)?
                }
            };
            done(pevi_train(dataset, &config)?.policy)
        }
        LearnerSpec::ViLcb { gamma, v_max, delta_conf } => {
            let gamma = resolve_gamma(*gamma, model_gamma, "vi-lcb")?;
            let config =
                ViLcbConfig { gamma, v_max: resolve_v_max(*v_max, dataset, gamma), delta_conf: *delta_conf, seed };
            done(vi_lcb_train(dataset, &config)?.policy)
        }
        LearnerSpec::Pqi { b, n_iters, gamma, v_max } => {
            let config = filter_config(*b, *n_iters, *gamma, *v_max, dataset, model_gamma, "pqi")?;
            let out = pqi_train(dataset, &config)?;
            Ok(Trained { policy: out.policy, warnings: out.warnings })
        }
        LearnerSpec::Ppi { b, n_iters, n_eval_iters, gamma, v_max } => {
            let config = filter_config(*b, *n_iters, *gamma, *v_max, dataset, model_gamma, "ppi")?;
            let out = ppi_train(dataset, &config, *n_eval_iters)?;
            Ok(Trained { policy: out.policy, warnings: out.warnings })
        }
    }
}

/// Threshold `b` defaults to `1 / N`, which keeps every observed pair.
fn filter_config(
    b: Option<f64>,
    n_iters: usize,
    gamma: Option<f64>,
    v_max: Option<f64>,
    dataset: &Dataset,
    model_gamma: Option<f64>,
    learner: &str,
) -> Result<FilterConfig> {
    let gamma = resolve_gamma(gamma, model_gamma, learner)?;
    let b = b.unwrap_or(1.0 / dataset.n_transitions().max(1) as f64);
    Ok(FilterConfig { b, n_iters, gamma, v_max: resolve_v_max(v_max, dataset, gamma) })
}

/// Return under the true reward, with its standard error (0 for exact).
pub fn score(mdp: MdpRef<'_>, policy: &Policy, evaluation: Evaluation, seed: u64) -> Result<(f64, f64)> {
    match evaluation {
        Evaluation::Exact => Ok((evaluate_exact(mdp, policy)?, 0.0)),
        Evaluation::Mc { n_episodes } => {
            let est = evaluate_mc(mdp, policy, n_episodes, seed)?;
            Ok((est.mean, est.stderr))
        }
    }
}

/// `(escape probability, V_c(d0))` of `policy` against `support`.
pub fn safety(mdp: MdpRef<'_>, policy: &Policy, support: &BTreeSet<(usize, usize)>) -> Result<(f64, f64)> {
    let escape = escape_probability(mdp, policy, support)?;
    let cost = support_cost(mdp.n_states(), mdp.n_actions(), support);
    Ok((escape.probability, value_at_d0(mdp, policy, &cost)?))
}

/// Positive-bias report of `learner` on `dataset` (true rewards): trains on
/// the zero, random and negated relabelings, scores each policy exactly
/// under the true reward and fills in the sufficient-condition slacks.
pub fn bias_report(true_mdp: &Mdp, dataset: &Dataset, learner: &LearnerSpec, seed: u64) -> Result<BiasReport> {
    let mdp = true_mdp.as_ref();
    let (v, _) = value_iteration(mdp, mdp.reward(), 1e-12)?;
    let j_star = v.at_distribution(mdp.dynamics().d0());
    let mut js = [0.0; 3];
    for (j, kind) in js.iter_mut().zip([RewardKind::Zero, RewardKind::Random, RewardKind::Negative]) {
        let data = relabel(dataset, kind, seed)?;
        let policy = train(learner, &data, kind, mdp.gamma(), seed)?.policy;
        *j = evaluate_exact(mdp, &policy)?;
    }
    let [j_zero, j_rand, j_neg] = js;
    let estimate = estimate_positive_bias(j_star, j_zero, j_rand, j_neg)?;
    let table = length_return_table(dataset, mdp.reward())?;
    let eps_full_length = match true_mdp {
        Mdp::Finite(m) => check_full_length_condition(dataset, m)?,
        Mdp::Discounted(_) => None,
    };
    Ok(BiasReport {
        learner: learner.label().into(),
        seed,
        j_star,
        j_zero,
        j_rand,
        j_neg,
        estimate,
        estimate_infinite: estimate.is_infinite(),
        length_return_rows: table.rows,
        length_return_correlation: table.correlation,
        length_return_degenerate: table.degenerate,
        eps_rmax: check_rmax_condition(dataset, mdp.reward())?,
        eps_gap: check_gap_condition(mdp, dataset)?,
        eps_full_length,
        eps_full_length_defined: eps_full_length.is_some(),
    })
}
