//! VI-LCB regret on a five-state chain as the dataset grows, as the median
//! over ten logging seeds.
//!
//! $ cargo run --release --example vi_lcb_regret

use std::collections::BTreeSet;

use survival_lab::datagen::{collect, Allocation, CollectionSpec, TerminationRule};
use survival_lab::learners::{evaluate_exact, vi_lcb_train, ViLcbConfig};
use survival_lab::mdp::{value_iteration, Dynamics, Policy, SaTable, TabularMdp};

/// Action 1 moves right with probability 0.9 and pays 1 at the end of the
/// chain; action 0 returns to the first state.
fn chain(n: usize) -> survival_lab::Result<TabularMdp> {
    let mut p = vec![0.0; n * 2 * n];
    let mut r = SaTable::zeros(n, 2);
    for s in 0..n {
        p[(s * 2) * n] = 1.0;
        p[(s * 2 + 1) * n + (s + 1).min(n - 1)] += 0.9;
        p[(s * 2 + 1) * n + s] += 0.1;
    }
    r.set(n - 1, 1, 1.0);
    TabularMdp::new(Dynamics::new(n, 2, p, vec![1.0 / n as f64; n])?, r, 0.9)
}

fn main() -> survival_lab::Result<()> {
    let mdp = chain(5)?;
    let v_star = value_iteration(&mdp, mdp.reward(), 1e-12)?.0.at_distribution(mdp.dynamics().d0());
    let behavior = Policy::stationary(SaTable::new(5, 2, [0.3, 0.7].repeat(5))?)?;
    println!("{:>6} {:>4} {:>14}", "N", "J", "median regret");
    for n in [100, 300, 1000, 3000, 10_000] {
        let mut regrets = Vec::new();
        let mut iterations = 0;
        for seed in 0..10 {
            let spec = CollectionSpec {
                behaviors: vec![(behavior.clone(), 1.0)],
                n_episodes: n / 20,
                rule: TerminationRule { stop_on_states: BTreeSet::new(), timeout_at: 20 },
                seed,
                allocation: Allocation::Exact,
            };
            let data = collect(&mdp, &spec)?;
            let out = vi_lcb_train(&data, &ViLcbConfig { gamma: 0.9, v_max: 10.0, delta_conf: 0.1, seed })?;
            iterations = out.iterations;
            regrets.push((v_star - evaluate_exact(&mdp, &out.policy)?).max(0.0));
        }
        regrets.sort_by(f64::total_cmp);
        println!("{n:>6} {iterations:>4} {:>14.4}", (regrets[4] + regrets[5]) / 2.0);
    }
    Ok(())
}
