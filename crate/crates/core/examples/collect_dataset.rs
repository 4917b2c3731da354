//! Logs the 100 optimal + 400 lava episodes, pads goal-reaching episodes
//! to the horizon and prints a few summary numbers and CSV lines.
//!
//! $ cargo run --example collect_dataset

use survival_lab::datagen::{corrupt, extend_absorbing, gridworld_recipe, write_dataset, CorruptionSpec};
use survival_lab::gridworld::{default_gridworld, GOAL_STATE};

fn main() -> survival_lab::Result<()> {
    let world = default_gridworld();
    let raw = gridworld_recipe(&world, 100, 400, 0)?;
    let padded = extend_absorbing(&raw, &world.mdp, &[GOAL_STATE].into())?;
    println!("episodes        {}", raw.trajectories().len());
    println!("transitions     {} raw, {} padded", raw.n_transitions(), padded.n_transitions());
    println!("support pairs   {}", padded.support().len());

    let negated = corrupt(&padded, &CorruptionSpec::Negate)?;
    let csv = write_dataset(&negated);
    println!("\nfirst lines of the negated dataset:");
    for line in csv.lines().take(6) {
        println!("  {line}");
    }
    Ok(())
}
