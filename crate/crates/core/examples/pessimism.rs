//! PEVI with a sweep of penalty weights on the zero-reward dataset. Any
//! positive weight keeps the agent on the logged route.
//!
//! $ cargo run --example pessimism

use survival_lab::datagen::{corrupt, extend_absorbing, gridworld_recipe};
use survival_lab::gridworld::{default_gridworld, GOAL_STATE};
use survival_lab::learners::{evaluate_exact, pevi_train, PeviConfig, RewardKind};

fn main() -> survival_lab::Result<()> {
    let world = default_gridworld();
    let raw = gridworld_recipe(&world, 100, 400, 0)?;
    let data = corrupt(&extend_absorbing(&raw, &world.mdp, &[GOAL_STATE].into())?, &RewardKind::Zero.corruption(0))?;
    let start = world.start_state();
    println!("{:>6} {:>12} {:>12}", "beta", "V_hat(start)", "true return");
    for beta in [0.0, 0.01, 0.1, 1.0, 5.0] {
        let out = pevi_train(&data, &PeviConfig::for_kind(RewardKind::Zero, beta, 20)?)?;
        println!("{beta:>6} {:>12.3} {:>12.3}", out.v[0][start], evaluate_exact(&world.mdp, &out.policy)?);
    }
    Ok(())
}
