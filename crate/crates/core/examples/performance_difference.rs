//! Numerical check of the performance-difference identity with an
//! arbitrary potential h, on a few random discounted MDPs.
//!
//! $ cargo run --example performance_difference

use survival_lab::mdp::random::{random_mdp, random_policy, random_vector};
use survival_lab::mdp::{occupancy, pd_lemma_residual, value_at_d0};

fn main() -> survival_lab::Result<()> {
    for seed in 0..5 {
        let mdp = random_mdp(5, 3, 0.95, seed);
        let pi = random_policy(5, 3, seed + 100);
        let h = random_vector(5, -3.0, 3.0, seed + 200);
        let v = value_at_d0(&mdp, &pi, mdp.reward())?;
        let mass: f64 = occupancy(&mdp, &pi)?.as_slice().iter().sum();
        println!(
            "seed {seed}: V(d0) = {v:>8.4}  occupancy mass {mass:.12}  residual {:.2e}",
            pd_lemma_residual(&mdp, &pi, &h)?
        );
    }
    Ok(())
}
