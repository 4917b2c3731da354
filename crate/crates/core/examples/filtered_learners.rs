//! PQI and PPI on a uniformly logged random MDP: how the threshold b trims
//! the usable pairs and what that does to the return.
//!
//! $ cargo run --example filtered_learners

use std::collections::BTreeSet;

use survival_lab::datagen::{collect, Allocation, CollectionSpec, TerminationRule};
use survival_lab::learners::{evaluate_exact, ppi_train, pqi_train, FilterConfig};
use survival_lab::mdp::random::random_mdp;
use survival_lab::mdp::{value_iteration, Policy};

fn main() -> survival_lab::Result<()> {
    let mdp = random_mdp(6, 3, 0.9, 4);
    let spec = CollectionSpec {
        behaviors: vec![(Policy::uniform(6, 3), 1.0)],
        n_episodes: 50,
        rule: TerminationRule { stop_on_states: BTreeSet::new(), timeout_at: 30 },
        seed: 4,
        allocation: Allocation::Exact,
    };
    let data = collect(&mdp, &spec)?;
    let v_star = value_iteration(&mdp, mdp.reward(), 1e-12)?.0.at_distribution(mdp.dynamics().d0());
    println!("V* = {v_star:.3}, N = {}", data.n_transitions());
    println!("{:>6} {:>6} {:>8} {:>8}", "b", "kept", "pqi", "ppi");
    for b in [0.001, 0.02, 0.05, 0.08] {
        let cfg = FilterConfig { b, n_iters: 300, gamma: 0.9, v_max: 10.0 };
        let pqi = pqi_train(&data, &cfg)?;
        let ppi = ppi_train(&data, &cfg, 50)?;
        let kept: usize = pqi.filter.iter().map(|row| row.iter().filter(|&&z| z).count()).sum();
        println!(
            "{b:>6} {kept:>6} {:>8.3} {:>8.3}",
            evaluate_exact(&mdp, &pqi.policy)?,
            evaluate_exact(&mdp, &ppi.policy)?
        );
        for w in &pqi.warnings {
            println!("       warning: {w}");
        }
    }
    Ok(())
}
