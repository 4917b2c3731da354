use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datagen::dataset::{Dataset, Trajectory, Transition};
use crate::error::{Error, Result};
use crate::gridworld::{Action, GridWorld};
use crate::mdp::io::write_policy;
use crate::mdp::{FiniteMdp, MdpRef, Policy};
use crate::rng::{sample_index, substream, StreamRng};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminationRule {
    /// Entering any of these states ends the episode (flagged terminal).
    pub stop_on_states: BTreeSet<usize>,
    /// Maximum number of transitions; the last one is flagged timeout.
    pub timeout_at: usize,
}

impl TerminationRule {
    /// Stop on the model's terminal states, time out after `H - 1` steps.
    pub fn for_finite(mdp: &FiniteMdp) -> Self {
        Self { stop_on_states: mdp.terminal_states().clone(), timeout_at: mdp.horizon().saturating_sub(1).max(1) }
    }
}

/// How mixture weights turn into per-episode behavior assignments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Allocation {
    /// Episode counts are `weight * n_episodes` (largest remainder), in
    /// component order.
    #[default]
    Exact,
    /// Each episode draws its component from the mixture.
    Sampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectionSpec {
    pub behaviors: Vec<(Policy, f64)>,
    pub n_episodes: usize,
    pub rule: TerminationRule,
    pub seed: u64,
    pub allocation: Allocation,
}

impl CollectionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_episodes == 0 {
            return Err(Error::Validation("n_episodes must be at least 1".into()));
        }
        if self.behaviors.is_empty() {
            return Err(Error::Validation("at least one behavior policy is required".into()));
        }
        if self.behaviors.iter().any(|(_, w)| !(*w >= 0.0)) {
            return Err(Error::Validation("mixture weights must be nonnegative".into()));
        }
        let total: f64 = self.behaviors.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("mixture weights sum to {total}, not 1")));
        }
        if self.rule.timeout_at == 0 {
            return Err(Error::Validation("timeout_at must be at least 1".into()));
        }
        Ok(())
    }

    /// SHA-256 over a canonical rendering of the spec.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("episodes={} seed={} allocation={:?}\n", self.n_episodes, self.seed, self.allocation));
        h.update(format!("stop={:?} timeout_at={}\n", self.rule.stop_on_states, self.rule.timeout_at));
        for (policy, w) in &self.behaviors {
            h.update(format!("weight={w}\n"));
            h.update(write_policy(policy));
        }
        hex::encode(h.finalize())
    }

    /// Component index for every episode.
    fn assignments(&self) -> Vec<usize> {
        match self.allocation {
            Allocation::Exact => {
                let n = self.n_episodes as f64;
                let mut quotas: Vec<usize> = self.behaviors.iter().map(|(_, w)| (w * n).floor() as usize).collect();
                let mut remainders: Vec<(usize, f64)> =
                    self.behaviors.iter().enumerate().map(|(i, (_, w))| (i, w * n - (w * n).floor())).collect();
                remainders.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                let missing = self.n_episodes - quotas.iter().sum::<usize>();
                for (i, _) in remainders.into_iter().take(missing) {
                    quotas[i] += 1;
                }
                quotas.iter().enumerate().flat_map(|(i, &q)| std::iter::repeat_n(i, q)).collect()
            }
            Allocation::Sampled => {
                let weights: Vec<f64> = self.behaviors.iter().map(|(_, w)| *w).collect();
                (0..self.n_episodes)
                    .map(|e| sample_index(&mut substream(self.seed, "mixture", e as u64), &weights))
                    .collect()
            }
        }
    }
}

fn terminal_states<'a>(mdp: MdpRef<'a>) -> Option<&'a BTreeSet<usize>> {
    match mdp {
        MdpRef::Finite(m) => Some(m.terminal_states()),
        MdpRef::Discounted(_) => None,
    }
}

/// One episode under `policy`. Ends on a terminal or stop state
/// (`terminal`) or after `rule.timeout_at` transitions (`timeout`).
pub fn rollout<'a>(
    mdp: impl Into<MdpRef<'a>>,
    policy: &Policy,
    rule: &TerminationRule,
    rng: &mut StreamRng,
    episode: u64,
) -> Result<Trajectory> {
    let mdp = mdp.into();
    policy.check_compatible(mdp)?;
    if policy.horizon().is_some_and(|h| rule.timeout_at > h) {
        return Err(Error::Validation("timeout exceeds the policy horizon".into()));
    }
    let dyn_ = mdp.dynamics();
    let reward = mdp.reward();
    let terminals = terminal_states(mdp);
    let mut s = sample_index(rng, dyn_.d0());
    let mut traj = Vec::new();
    for t in 0..rule.timeout_at {
        let a = sample_index(rng, policy.probs(t, s));
        let s_next = sample_index(rng, dyn_.next(s, a));
        let terminal = rule.stop_on_states.contains(&s_next) || terminals.is_some_and(|ts| ts.contains(&s_next));
        let timeout = !terminal && t + 1 == rule.timeout_at;
        traj.push(Transition { episode, t, s, a, r: reward.get(s, a), s_next, terminal, timeout });
        if terminal {
            break;
        }
        s = s_next;
    }
    Ok(traj)
}

/// Rolls out `spec.n_episodes` episodes; episode `e` uses its own
/// substream, so the result does not depend on generation order.
pub fn collect<'a>(mdp: impl Into<MdpRef<'a>>, spec: &CollectionSpec) -> Result<Dataset> {
    let mdp = mdp.into();
    spec.validate()?;
    let trajectories = spec
        .assignments()
        .into_iter()
        .enumerate()
        .map(|(e, component)| {
            let mut rng = substream(spec.seed, "collect", e as u64);
            rollout(mdp, &spec.behaviors[component].0, &spec.rule, &mut rng, e as u64)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(mdp.n_states(), mdp.n_actions(), mdp.horizon(), trajectories, spec.digest())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorruptionSpec {
    Original,
    Zero,
    RandomUniform { lo: f64, hi: f64, seed: u64 },
    Negate,
}

impl CorruptionSpec {
    pub fn label(&self) -> &'static str {
        match self {
            CorruptionSpec::Original => "original",
            CorruptionSpec::Zero => "zero",
            CorruptionSpec::RandomUniform { .. } => "random",
            CorruptionSpec::Negate => "negative",
        }
    }
}

fn chain_digest(prev: &str, extra: &str) -> String {
    let mut h = Sha256::new();
    h.update(prev.as_bytes());
    h.update(b"\n");
    h.update(extra.as_bytes());
    hex::encode(h.finalize())
}

/// Relabels rewards; states, actions and flags are untouched.
pub fn corrupt(dataset: &Dataset, spec: &CorruptionSpec) -> Result<Dataset> {
    let mut rng = match *spec {
        CorruptionSpec::RandomUniform { lo, hi, seed } => {
            if !(lo <= hi) {
                return Err(Error::Validation(format!("random corruption needs lo <= hi, got [{lo}, {hi}]")));
            }
            Some((substream(seed, "corrupt", 0), lo, hi))
        }
        _ => None,
    };
    let trajectories = dataset
        .trajectories()
        .iter()
        .map(|traj| {
            traj.iter()
                .map(|tr| {
                    let r = match spec {
                        CorruptionSpec::Original => tr.r,
                        CorruptionSpec::Zero => 0.0,
                        CorruptionSpec::Negate => -tr.r,
                        CorruptionSpec::RandomUniform { .. } => {
                            let (rng, lo, hi) = rng.as_mut().expect("rng for random corruption");
                            if lo == hi {
                                *lo
                            } else {
                                rng.gen_range(*lo..*hi)
                            }
                        }
                    };
                    Transition { r, ..*tr }
                })
                .collect()
        })
        .collect();
    dataset.with_trajectories(trajectories, chain_digest(dataset.provenance(), &format!("corrupt {spec:?}")))
}

/// Drops every `terminal` transition (and any trajectory left empty).
pub fn strip_terminal_transitions(dataset: &Dataset) -> Result<Dataset> {
    let trajectories = dataset
        .trajectories()
        .iter()
        .map(|traj| traj.iter().filter(|tr| !tr.terminal).copied().collect::<Vec<_>>())
        .filter(|traj| !traj.is_empty())
        .collect();
    dataset.with_trajectories(trajectories, chain_digest(dataset.provenance(), "strip-terminal"))
}

/// Pads every trajectory that ends by entering one of `absorbing` with
/// self-transitions (action 0, model reward) until it spans the full
/// horizon, as if the episode had simply continued inside the absorbing
/// state.
pub fn extend_absorbing(dataset: &Dataset, mdp: &FiniteMdp, absorbing: &BTreeSet<usize>) -> Result<Dataset> {
    let horizon = mdp.horizon();
    let trajectories = dataset
        .trajectories()
        .iter()
        .map(|traj| {
            let mut out = traj.clone();
            if let Some(last) = traj.last().copied() {
                if last.terminal && absorbing.contains(&last.s_next) {
                    let s = last.s_next;
                    for t in last.t + 1..horizon {
                        out.push(Transition {
                            episode: last.episode,
                            t,
                            s,
                            a: 0,
                            r: mdp.reward().get(s, 0),
                            s_next: s,
                            terminal: true,
                            timeout: false,
                        });
                    }
                }
            }
            out
        })
        .collect();
    Dataset::new(
        dataset.n_states(),
        dataset.n_actions(),
        Some(horizon),
        trajectories,
        chain_digest(dataset.provenance(), &format!("extend-absorbing {absorbing:?} H={horizon}")),
    )
}

/// Partitions the transitions into `k_folds` folds whose sizes differ by at
/// most one. Within a fold, transitions keep their original order.
pub fn split_folds(dataset: &Dataset, k_folds: usize, seed: u64) -> Result<Vec<Dataset>> {
    let all: Vec<Transition> = dataset.transitions().copied().collect();
    if k_folds == 0 || k_folds > all.len() {
        return Err(Error::Validation(format!("cannot split {} transitions into {k_folds} folds", all.len())));
    }
    let mut order: Vec<usize> = (0..all.len()).collect();
    let mut rng = substream(seed, "folds", 0);
    // Fisher-Yates
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let (base, extra) = (all.len() / k_folds, all.len() % k_folds);
    let mut folds = Vec::with_capacity(k_folds);
    let mut offset = 0;
    for f in 0..k_folds {
        let size = base + usize::from(f < extra);
        let mut idx = order[offset..offset + size].to_vec();
        offset += size;
        idx.sort_unstable();
        let mut trajectories: Vec<Trajectory> = Vec::new();
        let mut prev: Option<usize> = None;
        for i in idx {
            // consecutive transitions of one logged trajectory stay together
            let continues = prev.is_some_and(|p| p + 1 == i && all[p].episode == all[i].episode);
            match trajectories.last_mut() {
                Some(traj) if continues => traj.push(all[i]),
                _ => trajectories.push(vec![all[i]]),
            }
            prev = Some(i);
        }
        folds.push(dataset.with_trajectories(
            trajectories,
            chain_digest(dataset.provenance(), &format!("fold {f}/{k_folds} seed={seed}")),
        )?);
    }
    Ok(folds)
}

/// The 100 optimal + 400 lava-touching episodes of the grid study, before
/// any horizon extension.
pub fn gridworld_recipe(world: &GridWorld, n_optimal: usize, n_lava: usize, seed: u64) -> Result<Dataset> {
    let spec = gridworld_collection_spec(world, n_optimal, n_lava, seed)?;
    collect(&world.mdp, &spec)
}

pub fn gridworld_collection_spec(
    world: &GridWorld,
    n_optimal: usize,
    n_lava: usize,
    seed: u64,
) -> Result<CollectionSpec> {
    let total = n_optimal + n_lava;
    if total == 0 {
        return Err(Error::Validation("n_episodes must be at least 1".into()));
    }
    let optimal = crate::mdp::value_iteration(&world.mdp, world.mdp.reward(), 1e-12)?.1;
    let lava_policy = gridworld_lava_policy(world)?;
    Ok(CollectionSpec {
        behaviors: vec![(optimal, n_optimal as f64 / total as f64), (lava_policy, n_lava as f64 / total as f64)],
        n_episodes: total,
        rule: TerminationRule::for_finite(&world.mdp),
        seed,
        allocation: Allocation::Exact,
    })
}

/// Time-indexed deterministic policy that walks the shortest route into the
/// topmost lava cell (forward everywhere off that route).
pub fn gridworld_lava_policy(world: &GridWorld) -> Result<Policy> {
    let layout = &world.layout;
    let target = layout.topmost_lava().ok_or_else(|| Error::Layout("layout has no lava".into()))?;
    let path =
        layout.shortest_actions_to(target).ok_or_else(|| Error::Layout("topmost lava cell is unreachable".into()))?;
    let horizon = world.mdp.horizon();
    let n = world.mdp.n_states();
    let mut actions = vec![vec![Action::Forward as usize; n]; horizon];
    let mut s = world.start_state();
    for (t, &a) in path.iter().enumerate().take(horizon) {
        actions[t][s] = a as usize;
        s = layout.step(s, a, &world.rewards).next;
    }
    Ok(Policy::deterministic_time_indexed(world.mdp.n_actions(), &actions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::io::{parse_dataset, write_dataset};
    use crate::gridworld::{default_gridworld, GOAL_STATE, LAVA_STATE};
    use crate::mdp::value_iteration;

    fn grid_rule(world: &GridWorld) -> TerminationRule {
        TerminationRule::for_finite(&world.mdp)
    }

    #[test]
    fn optimal_rollout_reaches_goal_in_nine() {
        let world = default_gridworld();
        let pi = value_iteration(&world.mdp, world.mdp.reward(), 1e-12).unwrap().1;
        let traj = rollout(&world.mdp, &pi, &grid_rule(&world), &mut substream(1, "t", 0), 0).unwrap();
        assert_eq!(traj.len(), 9);
        let last = traj.last().unwrap();
        assert!(last.terminal && !last.timeout);
        assert_eq!(last.s_next, GOAL_STATE);
    }

    #[test]
    fn lava_rollout_is_truncated_at_entry() {
        let world = default_gridworld();
        let pi = gridworld_lava_policy(&world).unwrap();
        let traj = rollout(&world.mdp, &pi, &grid_rule(&world), &mut substream(1, "t", 0), 0).unwrap();
        assert_eq!(traj.len(), 2);
        assert_eq!(traj[1].s_next, LAVA_STATE);
        assert_eq!(traj[1].r, -1.0);
        assert!(traj[1].terminal);
    }

    #[test]
    fn spinning_policy_times_out() {
        let world = default_gridworld();
        let pi = Policy::deterministic(3, &vec![Action::Left as usize; world.mdp.n_states()]);
        let traj = rollout(&world.mdp, &pi, &grid_rule(&world), &mut substream(1, "t", 0), 0).unwrap();
        assert_eq!(traj.len(), 19);
        assert!(traj.last().unwrap().timeout);
        assert!(traj.iter().all(|t| !t.terminal));
    }

    #[test]
    fn grid_recipe_shape() {
        let world = default_gridworld();
        let ds = gridworld_recipe(&world, 100, 400, 0).unwrap();
        assert_eq!(ds.trajectories().len(), 500);
        let ends: Vec<usize> = ds.trajectories().iter().map(|t| t.last().unwrap().s_next).collect();
        assert_eq!(ends.iter().filter(|&&s| s == GOAL_STATE).count(), 100);
        assert_eq!(ends.iter().filter(|&&s| s == LAVA_STATE).count(), 400);
        // Both paths share the first forward step; union of the two paths.
        let mut expected = BTreeSet::new();
        for traj in ds.trajectories() {
            expected.extend(traj.iter().map(|t| (t.s, t.a)));
        }
        assert_eq!(ds.support(), expected);
        assert_eq!(ds.support().len(), 9 + 2 - 1);
    }

    #[test]
    fn collection_is_byte_deterministic() {
        let world = default_gridworld();
        let a = write_dataset(&gridworld_recipe(&world, 100, 400, 7).unwrap());
        let b = write_dataset(&gridworld_recipe(&world, 100, 400, 7).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn zero_episodes_rejected() {
        let world = default_gridworld();
        let mut spec = gridworld_collection_spec(&world, 1, 1, 0).unwrap();
        spec.n_episodes = 0;
        assert!(collect(&world.mdp, &spec).is_err());
    }

    #[test]
    fn exact_allocation_uses_largest_remainder() {
        let world = default_gridworld();
        let mut spec = gridworld_collection_spec(&world, 1, 2, 0).unwrap();
        spec.n_episodes = 4;
        let counts = spec.assignments().iter().fold([0, 0], |mut c, &i| {
            c[i] += 1;
            c
        });
        assert_eq!(counts, [1, 3]);
    }

    #[test]
    fn corruption_touches_rewards_only() {
        let world = default_gridworld();
        let ds = gridworld_recipe(&world, 10, 40, 0).unwrap();
        let same_but_r = |a: &Dataset, b: &Dataset| {
            a.transitions()
                .zip(b.transitions())
                .all(|(x, y)| Transition { r: 0.0, ..*x } == Transition { r: 0.0, ..*y })
        };
        let neg = corrupt(&ds, &CorruptionSpec::Negate).unwrap();
        assert!(same_but_r(&ds, &neg));
        assert!(ds.transitions().zip(neg.transitions()).all(|(x, y)| y.r == -x.r));
        let zero = corrupt(&ds, &CorruptionSpec::Zero).unwrap();
        assert!(zero.transitions().all(|t| t.r == 0.0));
        let spec = CorruptionSpec::RandomUniform { lo: 0.0, hi: 1.0, seed: 3 };
        let r1 = corrupt(&ds, &spec).unwrap();
        let r2 = corrupt(&ds, &spec).unwrap();
        assert!(same_but_r(&ds, &r1));
        assert_eq!(r1, r2);
        assert!(r1.transitions().all(|t| (0.0..1.0).contains(&t.r)));
        assert!(corrupt(&ds, &CorruptionSpec::RandomUniform { lo: 1.0, hi: 0.0, seed: 3 }).is_err());
    }

    #[test]
    fn random_corruption_ignores_collection_seed() {
        let world = default_gridworld();
        let spec = CorruptionSpec::RandomUniform { lo: 0.0, hi: 1.0, seed: 3 };
        let a = corrupt(&gridworld_recipe(&world, 10, 40, 0).unwrap(), &spec).unwrap();
        let b = corrupt(&gridworld_recipe(&world, 10, 40, 99).unwrap(), &spec).unwrap();
        let ra: Vec<f64> = a.transitions().map(|t| t.r).collect();
        let rb: Vec<f64> = b.transitions().map(|t| t.r).collect();
        assert_eq!(ra, rb);
    }

    #[test]
    fn strip_removes_lava_entries() {
        let world = default_gridworld();
        let ds = gridworld_recipe(&world, 100, 400, 0).unwrap();
        let stripped = strip_terminal_transitions(&ds).unwrap();
        assert!(stripped.transitions().all(|t| !t.terminal));
        assert!(stripped.support().is_subset(&ds.support()));
        // The lava-entering pair and the goal-entering pair leave the support.
        assert_eq!(ds.support().len() - stripped.support().len(), 2);
        let again = strip_terminal_transitions(&stripped).unwrap();
        assert_eq!(again.trajectories(), stripped.trajectories());
    }

    #[test]
    fn extension_pads_goal_trajectories_only() {
        let world = default_gridworld();
        let ds = gridworld_recipe(&world, 100, 400, 0).unwrap();
        let ext = extend_absorbing(&ds, &world.mdp, &[GOAL_STATE].into()).unwrap();
        for traj in ext.trajectories() {
            match traj.last().unwrap().s_next {
                GOAL_STATE => assert_eq!(traj.len(), 20),
                _ => assert_eq!(traj.len(), 2),
            }
        }
    }

    #[test]
    fn folds_partition_transitions() {
        let world = default_gridworld();
        let ds = gridworld_recipe(&world, 1, 4, 0).unwrap();
        assert_eq!(ds.n_transitions(), 17);
        let folds = split_folds(&ds, 5, 1).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Dataset::n_transitions).collect();
        assert_eq!(sizes, vec![4, 4, 3, 3, 3]);
        for s in 0..ds.n_states() {
            for a in 0..ds.n_actions() {
                assert_eq!(folds.iter().map(|f| f.count(s, a)).sum::<u64>(), ds.count(s, a));
            }
        }
        let one = split_folds(&ds, 1, 1).unwrap();
        assert_eq!(one[0].trajectories(), ds.trajectories());
        assert!(split_folds(&ds, 18, 1).is_err());
        assert_eq!(split_folds(&ds, 5, 1).unwrap(), folds);
    }

    #[test]
    fn dataset_file_round_trip() {
        let world = default_gridworld();
        let ds = gridworld_recipe(&world, 10, 40, 0).unwrap();
        let ds = corrupt(&ds, &CorruptionSpec::RandomUniform { lo: 0.0, hi: 1.0, seed: 5 }).unwrap();
        let text = write_dataset(&ds);
        let back = parse_dataset(&text).unwrap();
        assert_eq!(back, ds);
        assert_eq!(write_dataset(&back), text);
        for fold in split_folds(&ds, 3, 2).unwrap() {
            assert_eq!(parse_dataset(&write_dataset(&fold)).unwrap(), fold);
        }
    }

    #[test]
    fn dataset_parse_errors_carry_lines() {
        let bad = "# provenance=x\n# n_states=2 n_actions=1 horizon=none\nepisode,t,s,a,r,s_next,terminal,timeout\n0,0,0,0,0.5,1,2,0\n";
        match parse_dataset(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }
}
