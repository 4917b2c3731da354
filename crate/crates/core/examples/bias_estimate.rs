//! Positive-bias diagnostics on the grid dataset for BC and PEVI, plus the
//! length/return summary that exposes the length bias.
//!
//! $ cargo run --example bias_estimate

use survival_lab::bias::estimate_positive_bias;
use survival_lab::datagen::{extend_absorbing, gridworld_recipe};
use survival_lab::gridworld::{default_gridworld, GOAL_STATE};
use survival_lab::mdp::Mdp;
use survival_lab::runner::{bias_report, LearnerSpec, PeviBounds};

fn main() -> survival_lab::Result<()> {
    println!("estimate(100, 80, 90, 60) = {:?}", estimate_positive_bias(100.0, 80.0, 90.0, 60.0)?);

    let world = default_gridworld();
    let raw = gridworld_recipe(&world, 100, 400, 0)?;
    let data = extend_absorbing(&raw, &world.mdp, &[GOAL_STATE].into())?;
    let mdp = Mdp::Finite(world.mdp.clone());
    for learner in [LearnerSpec::Bc, LearnerSpec::Pevi { beta: 1.0, bounds: PeviBounds::Kind }] {
        let r = bias_report(&mdp, &data, &learner, 0)?;
        println!(
            "{:<5} J*={:.2} J_zero={:.2} J_rand={:.2} J_neg={:.2} estimate={:?}",
            r.learner, r.j_star, r.j_zero, r.j_rand, r.j_neg, r.estimate
        );
    }
    let r = bias_report(&mdp, &data, &LearnerSpec::Bc, 0)?;
    println!(
        "length/return correlation {:.3}, eps_rmax {}, eps_gap {:.3}, eps_full_length {:.3}",
        r.length_return_correlation,
        r.eps_rmax,
        r.eps_gap,
        r.eps_full_length.unwrap_or(f64::NAN).abs()
    );
    Ok(())
}
