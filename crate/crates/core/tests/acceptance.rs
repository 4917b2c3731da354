//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; the process exits nonzero if any fail.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use survival_lab::bias::estimate_positive_bias;
use survival_lab::cmdp::random::random_cmdp;
use survival_lab::cmdp::{brute_force_oracle, dual_bound_check, solve_lagrangian};
use survival_lab::datagen::{collect, write_dataset, Allocation, CollectionSpec, Dataset, TerminationRule};
use survival_lab::learners::{bc_train, evaluate_exact, vi_lcb_train, RewardKind, ViLcbConfig};
use survival_lab::mdp::io::write_policy;
use survival_lab::mdp::random::{random_finite_mdp, random_mdp, random_policy, random_vector};
use survival_lab::mdp::{pd_lemma_residual, value_iteration, Dynamics, Mdp, Policy, SaTable, TabularMdp};
use survival_lab::runner::{
    bias_report, build_dataset, relabel, repro_gridworld, run_matrix, safety, train, CollectionConfig, DataConfig,
    Evaluation, ExperimentConfig, LearnerSpec, MdpSource, PeviBounds, ReproOptions, World,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: impl Into<String>) -> Outcome {
    if cond {
        Ok(detail.into())
    } else {
        Err(detail.into())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn criterion_1_gridworld_repro() -> Outcome {
    let start = Instant::now();
    let report = repro_gridworld(&ReproOptions { ablation: false, ..ReproOptions::default() }).map_err(err)?;
    let elapsed = start.elapsed();
    let worst = report.cells.iter().map(|c| c.delta).fold(0.0, f64::max);
    for c in report.failing_cells() {
        eprintln!("  {} {}: expected {} observed {}", c.learner, c.reward_kind, c.expected, c.observed);
    }
    check(
        report.pass && report.cells.len() == 8 && elapsed < Duration::from_secs(60),
        format!("{} cells, max delta {worst:.3}, {:.2}s", report.cells.len(), elapsed.as_secs_f64()),
    )
}

fn cmdp_instance(seed: u64) -> Result<survival_lab::cmdp::Cmdp, String> {
    let n_states = 1 + (seed as usize % 4);
    let budget = [0.0, 0.1, 0.3, 0.6][(seed as usize / 4) % 4];
    random_cmdp(n_states, 2, 0.8, budget, seed).map_err(err)
}

fn criterion_2_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let cmdp = cmdp_instance(seed)?;
        let sol = solve_lagrangian(&cmdp, 1e-9).map_err(err)?;
        let oracle = brute_force_oracle(&cmdp).map_err(err)?;
        worst = worst.max((sol.value - oracle.value).abs());
        if sol.violation > cmdp.budget + 1e-6 {
            return Err(format!("seed {seed}: violation {} over budget {}", sol.violation, cmdp.budget));
        }
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-6 && elapsed < Duration::from_secs(30),
        format!("100 instances, max gap {worst:.2e}, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn criterion_3_duality() -> Outcome {
    let mut passed = 0;
    let mut total = 0;
    for seed in 0..100 {
        let cmdp = cmdp_instance(seed)?;
        let lambda0 = solve_lagrangian(&cmdp, 1e-9).map_err(err)?.lambda;
        for delta in [0.01, 0.1] {
            let c = dual_bound_check(&cmdp, delta, 1e-9).map_err(err)?;
            let upper = c.kappa <= lambda0 * delta + 1e-6;
            let lower = c.lambda_delta <= c.kappa / delta + 1e-6;
            total += 1;
            if upper && lower {
                passed += 1;
            } else {
                eprintln!("  seed {seed} delta {delta}: {c:?} lambda0 {lambda0}");
            }
        }
    }
    check(passed == total, format!("{passed}/{total} (instance, delta) pairs"))
}

fn criterion_4_survival() -> Outcome {
    let world = World::load(&MdpSource::default()).map_err(err)?;
    let mdp = world.model();
    let base = build_dataset(&world, &DataConfig::default(), 0).map_err(err)?;
    let pevi = LearnerSpec::Pevi { beta: 1.0, bounds: PeviBounds::Kind };
    let mut lines = Vec::new();
    let mut ok = true;
    for kind in [RewardKind::Zero, RewardKind::Random, RewardKind::Negative] {
        let data = relabel(&base, kind, 0).map_err(err)?;
        let support = data.support();
        let p = train(&pevi, &data, kind, None, 0).map_err(err)?.policy;
        let (escape, violation) = safety(mdp, &p, &support).map_err(err)?;
        let (bc_escape, _) = safety(mdp, &bc_train(&data).map_err(err)?, &support).map_err(err)?;
        ok &= escape == 0.0 && violation == 0.0 && bc_escape > 0.0;
        lines.push(format!("{kind}: pevi {escape}/{violation} bc {bc_escape:.3}"));
    }
    check(ok, lines.join(", "))
}

fn criterion_5_performance_difference() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let ns = 2 + (seed as usize % 6);
        let na = 1 + (seed as usize % 3);
        let mdp = random_mdp(ns, na, 0.9, seed);
        let pi = random_policy(ns, na, seed + 10_000);
        let h = random_vector(ns, -10.0, 10.0, seed + 20_000);
        worst = worst.max(pd_lemma_residual(&mdp, &pi, &h).map_err(err)?);
    }
    check(worst <= 1e-8, format!("100 triples, max residual {worst:.2e}"))
}

fn expert_dataset<'a>(
    mdp: impl Into<survival_lab::mdp::MdpRef<'a>>,
    expert: Policy,
    episodes: usize,
    steps: usize,
    seed: u64,
) -> Result<Dataset, String> {
    let spec = CollectionSpec {
        behaviors: vec![(expert, 1.0)],
        n_episodes: episodes,
        rule: TerminationRule { stop_on_states: BTreeSet::new(), timeout_at: steps },
        seed,
        allocation: Allocation::Exact,
    };
    collect(mdp, &spec).map_err(err)
}

fn criterion_6_positive_bias() -> Outcome {
    let arithmetic = estimate_positive_bias(100.0, 80.0, 90.0, 60.0).map_err(err)?.finite();
    if arithmetic.is_none_or(|x| (x - 2.5).abs() > 1e-12) {
        return Err(format!("(100, 80, 90, 60) gave {arithmetic:?}"));
    }
    let pevi = LearnerSpec::Pevi { beta: 1.0, bounds: PeviBounds::Range };
    let vi_lcb = LearnerSpec::ViLcb { gamma: None, v_max: None, delta_conf: 0.1 };
    let mut infinite = 0;
    for seed in 0..10 {
        let finite = random_finite_mdp(3, 2, 5, seed);
        let (_, expert) = value_iteration(&finite, finite.reward(), 1e-12).map_err(err)?;
        let data = expert_dataset(&finite, expert, 2000, 5, seed)?;
        let r = bias_report(&Mdp::Finite(finite), &data, &pevi, seed).map_err(err)?;
        infinite += r.estimate_infinite as usize;
        if !r.estimate_infinite {
            eprintln!("  pevi seed {seed}: {:?}", (r.j_star, r.j_zero, r.j_rand, r.j_neg));
        }

        let discounted = random_mdp(3, 2, 0.9, seed);
        let (_, expert) = value_iteration(&discounted, discounted.reward(), 1e-12).map_err(err)?;
        let data = expert_dataset(&discounted, expert, 1000, 20, seed)?;
        let r = bias_report(&Mdp::Discounted(discounted), &data, &vi_lcb, seed).map_err(err)?;
        infinite += r.estimate_infinite as usize;
        if !r.estimate_infinite {
            eprintln!("  vi-lcb seed {seed}: {:?}", (r.j_star, r.j_zero, r.j_rand, r.j_neg));
        }
    }
    check(infinite == 20, format!("arithmetic example 2.5, {infinite}/20 expert datasets flagged infinite"))
}

/// Five-state chain: action 1 moves right with probability 0.9 and earns 1
/// at the last state; action 0 jumps back to the start.
fn chain_mdp() -> TabularMdp {
    let n = 5;
    let mut p = vec![0.0; n * 2 * n];
    let mut r = vec![0.0; n * 2];
    for s in 0..n {
        p[(s * 2) * n] = 1.0;
        let right = (s + 1).min(n - 1);
        p[(s * 2 + 1) * n + right] += 0.9;
        p[(s * 2 + 1) * n + s] += 0.1;
    }
    r[(n - 1) * 2 + 1] = 1.0;
    let d0 = vec![1.0 / n as f64; n];
    TabularMdp::new(Dynamics::new(n, 2, p, d0).unwrap(), SaTable::new(n, 2, r).unwrap(), 0.9).unwrap()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len().is_multiple_of(2) {
        (xs[m - 1] + xs[m]) / 2.0
    } else {
        xs[m]
    }
}

fn criterion_7_vi_lcb() -> Outcome {
    let mdp = chain_mdp();
    let (v, _) = value_iteration(&mdp, mdp.reward(), 1e-12).map_err(err)?;
    let v_star = v.at_distribution(mdp.dynamics().d0());
    let behavior = Policy::stationary(SaTable::new(5, 2, [0.3, 0.7].repeat(5)).map_err(err)?).map_err(err)?;
    let mut medians = Vec::new();
    let mut monotone = true;
    let mut conformant = true;
    for n in [100usize, 1000, 10_000] {
        let mut regrets = Vec::new();
        for seed in 0..10 {
            let data = expert_dataset(&mdp, behavior.clone(), n / 20, 20, seed)?;
            let cfg = ViLcbConfig { gamma: 0.9, v_max: 10.0, delta_conf: 0.1, seed };
            let out = vi_lcb_train(&data, &cfg).map_err(err)?;
            monotone &= out.values.windows(2).all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| b >= a));
            conformant &= out.values[0].iter().all(|&x| x == -10.0);
            regrets.push(v_star - evaluate_exact(&mdp, &out.policy).map_err(err)?);
        }
        medians.push(median(regrets));
    }
    let cfg = ViLcbConfig { gamma: 0.9, v_max: 10.0, delta_conf: 0.1, seed: 0 };
    conformant &= cfg.penalty(4.0, 0) == cfg.penalty(4.0, 1) && cfg.penalty(4.0, 4) == 20.0;
    let nonincreasing = medians.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    check(
        monotone && conformant && nonincreasing,
        format!(
            "V_j monotone {monotone}, conformance {conformant}, median regret {:.4} / {:.4} / {:.4}",
            medians[0], medians[1], medians[2]
        ),
    )
}

fn read_dir_files(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = Vec::new();
    for name in ["results.csv", "results.json", "results.md"] {
        out.push((name.to_string(), std::fs::read(dir.join(name)).map_err(err)?));
    }
    Ok(out)
}

fn cli(args: &[&str]) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_survival-lab")).args(args).status().map_err(err)?;
    check(status.success(), format!("{args:?} exited with {status}")).map(|_| ())
}

fn criterion_8_determinism() -> Outcome {
    let world = World::load(&MdpSource::default()).map_err(err)?;
    let data = || build_dataset(&world, &DataConfig::default(), 7).map_err(err);
    let (a, b) = (data()?, data()?);
    if write_dataset(&a) != write_dataset(&b) {
        return Err("dataset bytes differ".into());
    }
    let learners = [
        LearnerSpec::Bc,
        LearnerSpec::Pevi { beta: 1.0, bounds: PeviBounds::Kind },
        LearnerSpec::ViLcb { gamma: Some(0.9), v_max: None, delta_conf: 0.1 },
    ];
    for spec in &learners {
        let p =
            |d: &Dataset| train(spec, d, RewardKind::Original, None, 7).map(|t| write_policy(&t.policy)).map_err(err);
        if p(&a)? != p(&b)? {
            return Err(format!("{} policy bytes differ", spec.label()));
        }
    }

    let tmp = tempfile::tempdir().map_err(err)?;
    let config = |dir: &str| ExperimentConfig {
        mdp: MdpSource::default(),
        data: DataConfig { collection: CollectionConfig::default(), ..DataConfig::default() },
        corruption: RewardKind::ALL.to_vec(),
        learners: learners[..2].to_vec(),
        seeds: vec![0, 1],
        evaluation: Evaluation::Mc { n_episodes: 200 },
        output_dir: tmp.path().join(dir),
    };
    // the digest covers output_dir, so both runs write to the same place
    run_matrix(&config("matrix")).map_err(err)?;
    let first = read_dir_files(&tmp.path().join("matrix"))?;
    run_matrix(&config("matrix")).map_err(err)?;
    if read_dir_files(&tmp.path().join("matrix"))? != first {
        return Err("report bytes differ".into());
    }

    let path = |name: &str| tmp.path().join(name).to_string_lossy().into_owned();
    for out in ["d1.csv", "d2.csv"] {
        cli(&["data", "collect", "--seed", "3", "--out", &path(out)])?;
    }
    for (data, out) in [("d1.csv", "p1.txt"), ("d2.csv", "p2.txt")] {
        cli(&["train", "--data", &path(data), "--learner", "pevi", "--out", &path(out)])?;
    }
    let same = |x: &str, y: &str| -> Result<bool, String> {
        Ok(std::fs::read(path(x)).map_err(err)? == std::fs::read(path(y)).map_err(err)?)
    };
    check(
        same("d1.csv", "d2.csv")? && same("p1.txt", "p2.txt")?,
        "dataset, policy and report bytes identical across reruns (library and CLI)",
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 grid-world reproduction", criterion_1_gridworld_repro),
        ("2 CMDP oracle equivalence", criterion_2_oracle_equivalence),
        ("3 duality inequalities", criterion_3_duality),
        ("4 survival on the grid", criterion_4_survival),
        ("5 performance difference", criterion_5_performance_difference),
        ("6 positive-bias estimate", criterion_6_positive_bias),
        ("7 VI-LCB sanity", criterion_7_vi_lcb),
        ("8 determinism", criterion_8_determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    println!("acceptance: {}/8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
