use std::collections::BTreeSet;

use survival_lab::bias::{check_full_length_condition, check_rmax_condition, length_return_table};
use survival_lab::cmdp::escape_probability;
use survival_lab::datagen::{collect, extend_absorbing, gridworld_recipe, Allocation, CollectionSpec, TerminationRule};
use survival_lab::gridworld::{default_gridworld, GOAL_STATE};
use survival_lab::learners::{evaluate_exact, ppi_train, pqi_train, FilterConfig};
use survival_lab::mdp::random::random_mdp;
use survival_lab::mdp::{value_iteration, Mdp};
use survival_lab::runner::{bias_report, LearnerSpec, PeviBounds};

#[test]
fn grid_recipe_has_two_length_return_clusters() {
    let world = default_gridworld();
    let raw = gridworld_recipe(&world, 100, 400, 0).unwrap();
    let table = length_return_table(&raw, world.mdp.reward()).unwrap();
    assert_eq!(table.rows.len(), 500);
    let long = table.rows.iter().filter(|&&(len, ret)| len == 9 && (ret - 0.92).abs() < 1e-9).count();
    let short = table.rows.iter().filter(|&&(len, ret)| len == 2 && (ret + 1.01).abs() < 1e-9).count();
    assert_eq!((long, short), (100, 400), "{:?}", &table.rows[..3]);
    assert!(table.correlation > 0.99);
}

#[test]
fn grid_bias_report_and_sufficient_conditions() {
    let world = default_gridworld();
    let raw = gridworld_recipe(&world, 100, 400, 0).unwrap();
    let padded = extend_absorbing(&raw, &world.mdp, &[GOAL_STATE].into()).unwrap();
    // goal reward 1 against the logged lava entry at -1
    assert_eq!(check_rmax_condition(&padded, world.mdp.reward()).unwrap(), 2.0);
    assert_eq!(check_full_length_condition(&padded, &world.mdp).unwrap().map(|x| x.abs() < 1e-12), Some(true));
    // before padding no episode reaches the horizon
    assert_eq!(check_full_length_condition(&raw, &world.mdp).unwrap(), None);

    let pevi = LearnerSpec::Pevi { beta: 1.0, bounds: PeviBounds::Kind };
    let report = bias_report(&Mdp::Finite(world.mdp.clone()), &padded, &pevi, 0).unwrap();
    assert!((report.j_star - 0.92).abs() < 1e-12);
    for j in [report.j_zero, report.j_rand, report.j_neg] {
        assert!((j - 0.92).abs() < 1e-9, "{report:?}");
    }
    assert!(report.estimate_infinite);
    assert!(report.to_json().unwrap().contains("\"inf\""));

    let bc = bias_report(&Mdp::Finite(world.mdp.clone()), &padded, &LearnerSpec::Bc, 0).unwrap();
    assert!(!bc.estimate_infinite);
    let est = bc.estimate.finite().unwrap();
    assert!((est - 0.92 / (0.92 + 1.19)).abs() < 1e-9, "{est}");
}

#[test]
fn filtered_learners_stay_on_an_expert_support() {
    for seed in 0..10 {
        let mdp = random_mdp(4, 3, 0.9, seed);
        let (v, expert) = value_iteration(&mdp, mdp.reward(), 1e-12).unwrap();
        let spec = CollectionSpec {
            behaviors: vec![(expert, 1.0)],
            n_episodes: 200,
            rule: TerminationRule { stop_on_states: BTreeSet::new(), timeout_at: 20 },
            seed,
            allocation: Allocation::Exact,
        };
        let data = collect(&mdp, &spec).unwrap();
        let cfg = FilterConfig { b: 1.0 / data.n_transitions() as f64, n_iters: 300, gamma: 0.9, v_max: 10.0 };
        let v_star = v.at_distribution(mdp.dynamics().d0());
        for out in [pqi_train(&data, &cfg).unwrap(), ppi_train(&data, &cfg, 50).unwrap()] {
            let e = escape_probability(&mdp, &out.policy, &data.support()).unwrap();
            assert_eq!(e.probability, 0.0, "seed {seed}");
            assert!((evaluate_exact(&mdp, &out.policy).unwrap() - v_star).abs() < 1e-6, "seed {seed}");
        }
    }
}
