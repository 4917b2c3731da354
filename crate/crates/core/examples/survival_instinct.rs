//! Exact escape probabilities on the grid: PEVI stays inside the data
//! support under every wrong reward, behavior cloning does not.
//!
//! $ cargo run --example survival_instinct

use survival_lab::cmdp::verify_survival;
use survival_lab::datagen::{corrupt, extend_absorbing, gridworld_recipe};
use survival_lab::gridworld::{default_gridworld, GOAL_STATE};
use survival_lab::learners::{bc_train, pevi_train, PeviConfig, RewardKind};
use survival_lab::mdp::Mdp;

fn main() -> survival_lab::Result<()> {
    let world = default_gridworld();
    let raw = gridworld_recipe(&world, 100, 400, 0)?;
    let padded = extend_absorbing(&raw, &world.mdp, &[GOAL_STATE].into())?;
    let mdp = Mdp::Finite(world.mdp.clone());
    println!("{:<9} {:<5} {:>8} {:>10} {:>8}", "reward", "agent", "escape", "violation", "regret");
    for kind in RewardKind::ALL {
        let data = corrupt(&padded, &kind.corruption(0))?;
        let r_tilde = data.empirical_reward();
        let pevi = pevi_train(&data, &PeviConfig::for_kind(kind, 1.0, 20)?)?.policy;
        for (name, policy) in [("pevi", pevi), ("bc", bc_train(&data)?)] {
            let r = verify_survival(&mdp, &data, &r_tilde, &policy)?;
            println!(
                "{:<9} {:<5} {:>8.3} {:>10.3} {:>8.3}",
                kind.as_str(),
                name,
                r.escape_probability,
                r.support_violation,
                r.regret_data_reward
            );
        }
    }
    Ok(())
}
