//! Lagrangian solve of a small random CMDP against exhaustive search, and
//! the sensitivity curve kappa(delta) with its multiplier bounds.
//!
//! $ cargo run --example cmdp_duality

use survival_lab::cmdp::random::random_cmdp;
use survival_lab::cmdp::{brute_force_oracle, sensitivity_curve, solve_lagrangian};

fn main() -> survival_lab::Result<()> {
    let cmdp = random_cmdp(4, 2, 0.8, 0.0, 11)?;
    let sol = solve_lagrangian(&cmdp, 1e-9)?;
    let oracle = brute_force_oracle(&cmdp)?;
    println!("lagrangian  value {:.6}  violation {:.2e}  lambda {:.4}", sol.value, sol.violation, sol.lambda);
    println!("oracle      value {:.6}  violation {:.2e}", oracle.value, oracle.violation);

    println!("\n{:>6} {:>10} {:>10} {:>12}", "delta", "kappa", "lambda_d", "lambda_0*d");
    for p in sensitivity_curve(&cmdp, &[0.0, 0.01, 0.05, 0.1, 0.2, 0.5], 1e-9)? {
        println!("{:>6} {:>10.5} {:>10.4} {:>12.5}", p.delta, p.kappa, p.lambda, sol.lambda * p.delta);
    }
    Ok(())
}
