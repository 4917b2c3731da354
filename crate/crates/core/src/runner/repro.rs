use std::fmt;

use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::error::Result;
use crate::gridworld::{build_gridworld, Cell, GridLayout, GridRewards, DEFAULT_HORIZON};
use crate::learners::RewardKind;
use crate::mdp::value_iteration;
use crate::runner::config::{DataConfig, Evaluation, LearnerSpec, PeviBounds};
use crate::runner::pipeline::{build_dataset, relabel, score, train, World};

/// Mean return of behavior cloning on the grid, for every reward kind.
pub const EXPECTED_BC: f64 = -1.19;
/// Mean return of PEVI on the grid (the optimal value), for every kind.
pub const EXPECTED_PEVI: f64 = 0.92;

#[derive(Debug, Clone)]
pub struct ReproOptions {
    pub layout: GridLayout,
    pub beta: f64,
    pub n_eval_episodes: usize,
    pub seed: u64,
    pub tolerance: f64,
    /// Also rerun PEVI with `beta = 0` and record what it scores.
    pub ablation: bool,
}

impl Default for ReproOptions {
    fn default() -> Self {
        Self {
            layout: GridLayout::default(),
            beta: 1.0,
            n_eval_episodes: 1000,
            seed: 0,
            tolerance: 0.005,
            ablation: true,
        }
    }
}

/// The shipped layout with two extra walls that lengthen the safe route,
/// so the expected PEVI values no longer hold.
pub fn negative_control_layout() -> GridLayout {
    let mut layout = GridLayout::default();
    layout.walls.extend([Cell::new(3, 1), Cell::new(4, 3)]);
    layout
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproCell {
    pub learner: String,
    pub reward_kind: RewardKind,
    pub expected: f64,
    pub observed: f64,
    pub stderr: f64,
    pub delta: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub reward_kind: RewardKind,
    pub beta: f64,
    pub observed: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproReport {
    pub v_star: f64,
    pub tolerance: f64,
    pub n_eval_episodes: usize,
    pub cells: Vec<ReproCell>,
    pub ablation: Vec<AblationCell>,
    pub pass: bool,
}

impl ReproReport {
    pub fn failing_cells(&self) -> impl Iterator<Item = &ReproCell> {
        self.cells.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

impl fmt::Display for ReproReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "grid-world reproduction (V* = {:.3}, {} evaluation episodes, tolerance {})",
            self.v_star, self.n_eval_episodes, self.tolerance
        )?;
        for c in &self.cells {
            writeln!(
                f,
                "{} {:<5} {:<9} expected {:>6.2} observed {:>7.3} ± {:.3} delta {:.3}",
                if c.pass { "PASS" } else { "FAIL" },
                c.learner,
                c.reward_kind.as_str(),
                c.expected,
                c.observed,
                c.stderr,
                c.delta
            )?;
        }
        for a in &self.ablation {
            writeln!(
                f,
                "ablation pevi beta={} {:<9} observed {:>7.3} ± {:.3}",
                a.beta,
                a.reward_kind.as_str(),
                a.observed,
                a.stderr
            )?;
        }
        write!(f, "{}", if self.pass { "PASS" } else { "FAIL" })
    }
}

/// Builds the layout, logs the 100 + 400 episode dataset, relabels it for
/// each reward kind, trains BC and PEVI, evaluates each on Monte Carlo
/// rollouts and compares against the expected table.
pub fn repro_gridworld(options: &ReproOptions) -> Result<ReproReport> {
    let world = World::Grid(build_gridworld(&options.layout, GridRewards::default(), DEFAULT_HORIZON)?);
    let mdp = world.model();
    let (v, _) = value_iteration(mdp, mdp.reward(), 1e-12)?;
    let v_star = v.at_distribution(mdp.dynamics().d0());
    let base = build_dataset(&world, &DataConfig::default(), options.seed)?;
    let evaluation = Evaluation::Mc { n_episodes: options.n_eval_episodes };
    let pevi = |beta| LearnerSpec::Pevi { beta, bounds: PeviBounds::Kind };

    let mut cells = Vec::new();
    let mut ablation = Vec::new();
    for kind in RewardKind::ALL {
        let data: Dataset = relabel(&base, kind, options.seed)?;
        for (spec, expected) in [(LearnerSpec::Bc, EXPECTED_BC), (pevi(options.beta), EXPECTED_PEVI)] {
            let policy = train(&spec, &data, kind, None, options.seed)?.policy;
            let (observed, stderr) = score(mdp, &policy, evaluation, options.seed)?;
            let delta = (observed - expected).abs();
            cells.push(ReproCell {
                learner: spec.label().into(),
                reward_kind: kind,
                expected,
                observed,
                stderr,
                delta,
                pass: delta <= options.tolerance,
            });
        }
        if options.ablation {
            let policy = train(&pevi(0.0), &data, kind, None, options.seed)?.policy;
            let (observed, stderr) = score(mdp, &policy, evaluation, options.seed)?;
            ablation.push(AblationCell { reward_kind: kind, beta: 0.0, observed, stderr });
        }
    }
    let pass = cells.iter().all(|c| c.pass);
    Ok(ReproReport {
        v_star,
        tolerance: options.tolerance,
        n_eval_episodes: options.n_eval_episodes,
        cells,
        ablation,
        pass,
    })
}
