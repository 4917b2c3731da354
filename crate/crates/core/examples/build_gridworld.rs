//! Builds the lava grid, solves it by backward induction and draws the
//! optimal route.
//!
//! $ cargo run --example build_gridworld

use survival_lab::gridworld::{default_gridworld, render_ascii};
use survival_lab::mdp::value_iteration;

fn main() -> survival_lab::Result<()> {
    let world = default_gridworld();
    let (v, pi) = value_iteration(&world.mdp, world.mdp.reward(), 1e-12)?;
    println!("{}", world.layout);
    println!("{}", render_ascii(&world.layout, Some(&pi)));
    println!("states {}  actions {}  horizon {}", world.mdp.n_states(), world.mdp.n_actions(), world.mdp.horizon());
    println!("V*(start) = {:.2}", v.at(0, world.start_state()));
    Ok(())
}
