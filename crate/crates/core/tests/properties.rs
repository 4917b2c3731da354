//! Property tests for the invariants each module promises.

use std::collections::BTreeSet;

use proptest::prelude::*;

use survival_lab::bias::{check_gap_condition, estimate_positive_bias, length_return_table};
use survival_lab::cmdp::random::random_cmdp;
use survival_lab::cmdp::{escape_probability, solve_lagrangian, support_cost};
use survival_lab::datagen::{
    collect, corrupt, extend_absorbing, split_folds, strip_terminal_transitions, write_dataset, Allocation,
    CollectionSpec, CorruptionSpec, Dataset, TerminationRule,
};
use survival_lab::gridworld::{build_gridworld, Cell, Direction, GridLayout, GridRewards, GridState, GOAL_STATE};
use survival_lab::learners::{
    bc_train, pevi_train, ppi_train, pqi_train, vi_lcb_train, FilterConfig, PeviConfig, ViLcbConfig,
};
use survival_lab::mdp::io::write_policy;
use survival_lab::mdp::random::{random_finite_mdp, random_mdp, random_policy, random_vector};
use survival_lab::mdp::{
    deterministic_policies, finite_occupancy, occupancy, pd_lemma_residual, q_values, value_at_d0, value_iteration,
    FiniteMdp, MdpRef, Policy,
};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn uniform_dataset<'a>(
    mdp: impl Into<MdpRef<'a>>,
    n_episodes: usize,
    timeout_at: usize,
    stop: BTreeSet<usize>,
    seed: u64,
) -> Dataset {
    let mdp = mdp.into();
    let spec = CollectionSpec {
        behaviors: vec![(Policy::uniform(mdp.n_states(), mdp.n_actions()), 1.0)],
        n_episodes,
        rule: TerminationRule { stop_on_states: stop, timeout_at },
        seed,
        allocation: Allocation::Exact,
    };
    collect(mdp, &spec).unwrap()
}

/// Recounts from the raw transitions and compares with the cached tables.
fn assert_counts_consistent(ds: &Dataset) {
    let (ns, na) = (ds.n_states(), ds.n_actions());
    let mut counts = vec![0u64; ns * na];
    let mut per_step = vec![vec![0u64; ns * na]; ds.horizon().unwrap_or(0)];
    for t in ds.transitions() {
        counts[t.s * na + t.a] += 1;
        if ds.horizon().is_some() {
            per_step[t.t][t.s * na + t.a] += 1;
        }
    }
    for s in 0..ns {
        for a in 0..na {
            assert_eq!(ds.count(s, a), counts[s * na + a]);
            assert_eq!(ds.support().contains(&(s, a)), counts[s * na + a] > 0);
            for (h, row) in per_step.iter().enumerate() {
                assert_eq!(ds.count_h(h, s, a), row[s * na + a]);
            }
        }
    }
    assert_eq!(counts.iter().sum::<u64>() as usize, ds.n_transitions());
}

proptest! {
    #![proptest_config(config(64))]

    // ---- mdp_core ----

    #[test]
    fn bellman_residual_is_within_tolerance(ns in 1usize..6, na in 1usize..4, gamma in 0.0f64..0.95, seed in any::<u64>()) {
        let mdp = random_mdp(ns, na, gamma, seed);
        let tol = 1e-9;
        let (v, _) = value_iteration(&mdp, mdp.reward(), tol).unwrap();
        let q = q_values(&mdp, &v, mdp.reward()).unwrap();
        for s in 0..ns {
            let best = q.table(0).row(s).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((best - v.at(0, s)).abs() <= tol);
        }
    }

    #[test]
    fn occupancy_normalizes_and_is_dual_to_value(ns in 1usize..6, na in 1usize..4, gamma in 0.0f64..0.95, seed in any::<u64>()) {
        let mdp = random_mdp(ns, na, gamma, seed);
        let pi = random_policy(ns, na, seed ^ 1);
        let d = occupancy(&mdp, &pi).unwrap();
        prop_assert!((d.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(d.as_slice().iter().all(|&x| x >= 0.0));
        let inner: f64 = d.as_slice().iter().zip(mdp.reward().as_slice()).map(|(x, r)| x * r).sum();
        let v = value_at_d0(&mdp, &pi, mdp.reward()).unwrap();
        prop_assert!((inner - (1.0 - gamma) * v).abs() <= 1e-9);
    }

    #[test]
    fn finite_occupancy_normalizes(ns in 1usize..5, na in 1usize..4, horizon in 1usize..6, seed in any::<u64>()) {
        let mdp = random_finite_mdp(ns, na, horizon, seed);
        let pi = random_policy(ns, na, seed ^ 2);
        let d = finite_occupancy(&mdp, &pi).unwrap();
        prop_assert!((d.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        let inner: f64 = d.as_slice().iter().zip(mdp.reward().as_slice()).map(|(x, r)| x * r).sum();
        let v = value_at_d0(&mdp, &pi, mdp.reward()).unwrap();
        prop_assert!((inner * horizon as f64 - v).abs() <= 1e-9);
    }

    #[test]
    fn performance_difference_identity(ns in 1usize..7, na in 1usize..4, gamma in 0.0f64..0.99, seed in any::<u64>()) {
        let mdp = random_mdp(ns, na, gamma, seed);
        let pi = random_policy(ns, na, seed.wrapping_add(1));
        let h = random_vector(ns, -5.0, 5.0, seed.wrapping_add(2));
        prop_assert!(pd_lemma_residual(&mdp, &pi, &h).unwrap() <= 1e-8);
    }

    #[test]
    fn greedy_policies_are_byte_identical(ns in 1usize..6, na in 1usize..4, gamma in 0.0f64..0.95, seed in any::<u64>()) {
        let a = value_iteration(&random_mdp(ns, na, gamma, seed), random_mdp(ns, na, gamma, seed).reward(), 1e-10).unwrap().1;
        let b = value_iteration(&random_mdp(ns, na, gamma, seed), random_mdp(ns, na, gamma, seed).reward(), 1e-10).unwrap().1;
        prop_assert_eq!(write_policy(&a), write_policy(&b));
    }

    #[test]
    fn value_iteration_matches_enumeration(ns in 1usize..5, na in 1usize..4, gamma in 0.0f64..0.95, seed in any::<u64>()) {
        prop_assume!((na as u32).pow(ns as u32) <= 4096);
        let mdp = random_mdp(ns, na, gamma, seed);
        let (v, _) = value_iteration(&mdp, mdp.reward(), 1e-12).unwrap();
        let v_star = v.at_distribution(mdp.dynamics().d0());
        let best = deterministic_policies(ns, na)
            .map(|acts| value_at_d0(&mdp, &Policy::deterministic(na, &acts), mdp.reward()).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((v_star - best).abs() <= 1e-8, "{} vs {}", v_star, best);
    }

    #[test]
    fn finite_backward_induction_matches_enumeration(ns in 1usize..3, na in 1usize..3, horizon in 1usize..4, seed in any::<u64>()) {
        let mdp = random_finite_mdp(ns, na, horizon, seed);
        let (v, _) = value_iteration(&mdp, mdp.reward(), 1e-12).unwrap();
        let v_star = v.at_distribution(mdp.dynamics().d0());
        let best = deterministic_policies(ns * horizon, na)
            .map(|acts| {
                let rows: Vec<Vec<usize>> = acts.chunks(ns).map(<[usize]>::to_vec).collect();
                value_at_d0(&mdp, &Policy::deterministic_time_indexed(na, &rows), mdp.reward()).unwrap()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((v_star - best).abs() <= 1e-10);
    }
}

// ---- gridworld ----

fn layout_strategy() -> impl Strategy<Value = GridLayout> {
    let cell = (0usize..5, 0usize..5).prop_map(|(x, y)| Cell::new(x, y));
    (
        prop::collection::btree_set(cell.clone(), 0..6),
        prop::collection::btree_set(cell.clone(), 0..4),
        cell.clone(),
        cell,
        0usize..4,
    )
        .prop_map(|(walls, lava, goal, start, dir)| {
            let lava = lava.difference(&walls).copied().collect();
            GridLayout { walls, lava, goal, start: GridState { cell: start, dir: Direction::ALL[dir] } }
        })
}

proptest! {
    #![proptest_config(config(128))]

    #[test]
    fn grid_value_is_one_minus_step_costs(layout in layout_strategy()) {
        prop_assume!(layout.validate().is_ok());
        let world = build_gridworld(&layout, GridRewards::default(), 20).unwrap();
        let dyn_ = world.mdp.dynamics();
        for s in 0..world.mdp.n_states() {
            for a in 0..world.mdp.n_actions() {
                let row = dyn_.next(s, a);
                prop_assert_eq!(row.iter().filter(|&&p| p == 1.0).count(), 1);
                prop_assert_eq!(row.iter().filter(|&&p| p == 0.0).count(), row.len() - 1);
            }
        }
        let path = layout.shortest_actions_to(layout.goal).expect("validated layouts reach the goal");
        let (v, _) = value_iteration(&world.mdp, world.mdp.reward(), 1e-12).unwrap();
        let k = (path.len() - 1) as f64;
        prop_assert!((v.at_distribution(dyn_.d0()) - (1.0 - 0.01 * k)).abs() < 1e-12);
        for h in 0..=20 {
            prop_assert_eq!(v.at(h, GOAL_STATE), 0.0);
        }
    }
}

// ---- datagen ----

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn every_dataset_operation_keeps_counts_consistent(
        ns in 2usize..6,
        na in 1usize..4,
        horizon in 2usize..7,
        n_episodes in 1usize..30,
        stop in 0usize..6,
        seed in any::<u64>(),
    ) {
        let mdp = random_finite_mdp(ns, na, horizon, seed);
        let stop: BTreeSet<usize> = if stop < ns { [stop].into() } else { BTreeSet::new() };
        let raw = uniform_dataset(&mdp, n_episodes, horizon, stop.clone(), seed);
        assert_counts_consistent(&raw);
        // `extend_absorbing` pads from stop states, so make them absorbing
        let padded = extend_absorbing(&raw, &mdp, &stop).unwrap();
        assert_counts_consistent(&padded);
        prop_assert!(padded.n_transitions() >= raw.n_transitions());
        if let Ok(stripped) = strip_terminal_transitions(&raw) {
            assert_counts_consistent(&stripped);
            prop_assert!(stripped.transitions().all(|t| !t.terminal));
        }
        for spec in [CorruptionSpec::Zero, CorruptionSpec::Negate, CorruptionSpec::RandomUniform { lo: -1.0, hi: 2.0, seed }] {
            let c = corrupt(&raw, &spec).unwrap();
            assert_counts_consistent(&c);
            prop_assert_eq!(c.n_transitions(), raw.n_transitions());
            for (x, y) in raw.transitions().zip(c.transitions()) {
                prop_assert_eq!((x.episode, x.t, x.s, x.a, x.s_next, x.terminal, x.timeout), (y.episode, y.t, y.s, y.a, y.s_next, y.terminal, y.timeout));
            }
        }
        let k = raw.n_transitions().min(1 + (seed % 7) as usize);
        let folds = split_folds(&raw, k, seed).unwrap();
        let mut seen: Vec<(u64, usize)> = folds.iter().flat_map(|f| f.transitions().map(|t| (t.episode, t.t))).collect();
        let mut all: Vec<(u64, usize)> = raw.transitions().map(|t| (t.episode, t.t)).collect();
        seen.sort_unstable();
        all.sort_unstable();
        prop_assert_eq!(seen, all);
        let sizes: Vec<usize> = folds.iter().map(Dataset::n_transitions).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for f in &folds {
            assert_counts_consistent(f);
        }
    }

    #[test]
    fn collection_is_reproducible(ns in 2usize..5, na in 1usize..3, seed in any::<u64>()) {
        let mdp = random_mdp(ns, na, 0.9, seed);
        let a = write_dataset(&uniform_dataset(&mdp, 10, 8, BTreeSet::new(), seed));
        let b = write_dataset(&uniform_dataset(&mdp, 10, 8, BTreeSet::new(), seed));
        prop_assert_eq!(a, b);
    }
}

// ---- learners ----

/// Hoeffding-sized penalty: with values in `[0, H]` the empirical backup
/// overshoots by more than `3H / sqrt(n)` with probability below `e^-18`.
fn pessimistic_config(horizon: usize) -> PeviConfig {
    PeviConfig::from_reward_range(0.0, 1.0, 3.0 * horizon as f64, horizon).unwrap()
}

#[test]
fn pevi_is_pessimistic_on_random_finite_mdps() {
    for seed in 0..50 {
        let mdp: FiniteMdp = random_finite_mdp(4, 2, 5, seed);
        // full-horizon episodes so every step has data
        let data = uniform_dataset(&mdp, 40, 5, BTreeSet::new(), seed);
        let out = pevi_train(&data, &pessimistic_config(5)).unwrap();
        let (v_star, _) = value_iteration(&mdp, mdp.reward(), 1e-12).unwrap();
        for t in 0..5 {
            for s in 0..4 {
                assert!(out.v[t][s] <= v_star.at(t, s) + 1e-12, "seed {seed} t={t} s={s}");
            }
        }
    }
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn vi_lcb_values_never_decrease(ns in 2usize..5, na in 1usize..3, episodes in 20usize..60, seed in any::<u64>()) {
        let mdp = random_mdp(ns, na, 0.9, seed);
        let data = uniform_dataset(&mdp, episodes, 10, BTreeSet::new(), seed);
        let cfg = ViLcbConfig { gamma: 0.5, v_max: 2.0, delta_conf: 0.1, seed };
        let out = vi_lcb_train(&data, &cfg).unwrap();
        prop_assert!(out.values[0].iter().all(|&x| x == -2.0));
        for w in out.values.windows(2) {
            prop_assert!(w[0].iter().zip(&w[1]).all(|(a, b)| b >= a));
        }
    }

    #[test]
    fn filtered_greedy_actions_survive_the_filter(ns in 2usize..6, na in 2usize..4, b in 0.001f64..0.3, seed in any::<u64>()) {
        let mdp = random_mdp(ns, na, 0.9, seed);
        let data = uniform_dataset(&mdp, 20, 6, BTreeSet::new(), seed);
        let cfg = FilterConfig { b, n_iters: 50, gamma: 0.9, v_max: 10.0 };
        for out in [pqi_train(&data, &cfg).unwrap(), ppi_train(&data, &cfg, 10).unwrap()] {
            for s in 0..ns {
                if out.filter[s].iter().any(|&z| z) {
                    prop_assert!(out.filter[s][out.policy.mode(0, s)]);
                }
            }
        }
    }

    #[test]
    fn learners_are_deterministic(seed in any::<u64>()) {
        let mdp = random_finite_mdp(3, 2, 4, seed);
        let data = uniform_dataset(&mdp, 30, 4, BTreeSet::new(), seed);
        let filter = FilterConfig { b: 0.01, n_iters: 30, gamma: 0.8, v_max: 5.0 };
        let vi = ViLcbConfig { gamma: 0.5, v_max: 2.0, delta_conf: 0.1, seed };
        let run = || {
            [
                bc_train(&data).unwrap(),
                pevi_train(&data, &pessimistic_config(4)).unwrap().policy,
                vi_lcb_train(&data, &vi).unwrap().policy,
                pqi_train(&data, &filter).unwrap().policy,
                ppi_train(&data, &filter, 5).unwrap().policy,
            ]
            .iter()
            .map(write_policy)
            .collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
    }
}

// ---- cmdp_lab ----

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn value_grows_with_the_budget(ns in 2usize..5, seed in any::<u64>(), b1 in 0.0f64..2.0, extra in 0.0f64..2.0) {
        let low = random_cmdp(ns, 2, 0.8, b1, seed).unwrap();
        let high = low.with_budget(b1 + extra).unwrap();
        let v_low = solve_lagrangian(&low, 1e-9).unwrap().value;
        let v_high = solve_lagrangian(&high, 1e-9).unwrap().value;
        prop_assert!(v_high >= v_low - 1e-7);
    }

    #[test]
    fn escape_is_a_probability_below_the_violation(ns in 2usize..5, na in 1usize..4, seed in any::<u64>(), keep in 0.2f64..1.0) {
        let mdp = random_mdp(ns, na, 0.9, seed);
        let pi = random_policy(ns, na, seed ^ 3);
        let picks = random_vector(ns * na, 0.0, 1.0, seed ^ 4);
        let support: BTreeSet<(usize, usize)> =
            (0..ns).flat_map(|s| (0..na).map(move |a| (s, a))).filter(|&(s, a)| picks[s * na + a] < keep).collect();
        let e = escape_probability(&mdp, &pi, &support).unwrap();
        prop_assert!((0.0..=1.0).contains(&e.probability));
        let disc = e.discounted.unwrap();
        prop_assert!(disc <= e.probability + 1e-9);
        let v_c = value_at_d0(&mdp, &pi, &support_cost(ns, na, &support)).unwrap();
        prop_assert!(disc <= v_c + 1e-9);
    }
}

// ---- bias_lab ----

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn estimate_is_nonincreasing_in_each_argument(
        j_star in 0.1f64..10.0,
        zs in prop::array::uniform3(0.0f64..1.0),
        drop in 0.0f64..5.0,
        which in 0usize..3,
    ) {
        // every J strictly below J*
        let js: Vec<f64> = zs.iter().map(|z| j_star * z * 0.99).collect();
        let mut lowered = js.clone();
        lowered[which] -= drop;
        let before = estimate_positive_bias(j_star, js[0], js[1], js[2]).unwrap().finite().unwrap();
        let after = estimate_positive_bias(j_star, lowered[0], lowered[1], lowered[2]).unwrap().finite().unwrap();
        prop_assert!(after <= before + 1e-12);
    }

    #[test]
    fn gap_is_zero_exactly_on_optimal_support(ns in 2usize..5, na in 2usize..4, seed in any::<u64>()) {
        let mdp = random_mdp(ns, na, 0.8, seed);
        let (_, optimal) = value_iteration(&mdp, mdp.reward(), 1e-12).unwrap();
        let expert = CollectionSpec {
            behaviors: vec![(optimal.clone(), 1.0)],
            n_episodes: 20,
            rule: TerminationRule { stop_on_states: BTreeSet::new(), timeout_at: 10 },
            seed,
            allocation: Allocation::Exact,
        };
        let data = collect(&mdp, &expert).unwrap();
        prop_assert_eq!(check_gap_condition(&mdp, &data).unwrap(), 0.0);
        let mixed = uniform_dataset(&mdp, 30, 10, BTreeSet::new(), seed);
        let suboptimal_seen = mixed.support().iter().any(|&(s, a)| a != optimal.mode(0, s));
        let gap = check_gap_condition(&mdp, &mixed).unwrap();
        // random rewards make exact ties a measure-zero event
        prop_assert_eq!(gap > 0.0, suboptimal_seen);
        let table = length_return_table(&mixed, mdp.reward()).unwrap();
        prop_assert_eq!(table.rows.len(), mixed.trajectories().len());
    }
}
