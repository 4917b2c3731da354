//! The grid-world table: behavior cloning and PEVI under four reward
//! labelings of the same 500-episode dataset, 1000 rollouts each.
//!
//! $ cargo run --release --example gridworld_repro

use survival_lab::runner::{emit_report, repro_gridworld, ReportFormat, ReproOptions, ResultRow};

fn main() -> survival_lab::Result<()> {
    let report = repro_gridworld(&ReproOptions::default())?;
    println!("{report}\n");

    // the same numbers as a markdown table
    let rows: Vec<ResultRow> = report
        .cells
        .iter()
        .map(|c| ResultRow {
            learner: c.learner.clone(),
            reward_kind: c.reward_kind,
            seed: 0,
            mean_return: Some(c.observed),
            stderr: Some(c.stderr),
            escape_probability: None,
            support_violation: None,
            runtime_ms: 0,
            error: None,
            warnings: String::new(),
        })
        .collect();
    print!("{}", emit_report(&rows, ReportFormat::Markdown, "example", false)?);
    Ok(())
}
