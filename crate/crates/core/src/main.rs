use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use survival_lab::cmdp::{brute_force_oracle, build_implicit_cmdp, solve_lagrangian, verify_survival, Cmdp};
use survival_lab::datagen::{corrupt, parse_dataset, write_dataset, CorruptionSpec, Dataset};
use survival_lab::gridworld::{render_ascii, GridLayout, GOAL_STATE};
use survival_lab::learners::RewardKind;
use survival_lab::mdp::io::{parse_policy, write_mdp, write_policy};
use survival_lab::mdp::{value_iteration, Mdp, Policy};
use survival_lab::runner::{
    bias_report, build_dataset, negative_control_layout, repro_gridworld, run_matrix, safety, score, train,
    CollectionConfig, DataConfig, Evaluation, ExperimentConfig, LearnerSpec, MdpSource, PeviBounds, ReproOptions,
    World,
};
use survival_lab::{Error, Result};

#[derive(Parser)]
#[command(name = "survival-lab", version, about = "Tabular offline RL laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Model construction.
    #[command(subcommand)]
    Mdp(MdpCommand),
    /// Logging and relabeling datasets.
    #[command(subcommand)]
    Data(DataCommand),
    /// Train a learner on a dataset and write its policy.
    Train(TrainArgs),
    /// Evaluate a policy under the model's true reward.
    Eval(EvalArgs),
    /// Implicit constrained MDP of a dataset.
    #[command(subcommand)]
    Cmdp(CmdpCommand),
    /// Data-bias diagnostics.
    #[command(subcommand)]
    Bias(BiasCommand),
    /// End-to-end reproductions.
    #[command(subcommand)]
    Repro(ReproCommand),
    /// Experiment matrices.
    #[command(subcommand)]
    Run(RunCommand),
}

#[derive(Subcommand)]
enum MdpCommand {
    /// Write the grid task in the MDP text format.
    BuildGridworld {
        #[arg(long)]
        layout: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        horizon: usize,
        /// Print the layout with the optimal route instead of the model.
        #[arg(long)]
        render: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// `gridworld` (optionally with `--layout`) or a path to an MDP file.
#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long, default_value = "gridworld")]
    mdp: String,
    #[arg(long)]
    layout: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    horizon: usize,
}

impl ModelArgs {
    fn source(&self) -> MdpSource {
        if self.mdp == "gridworld" {
            MdpSource::Gridworld { layout: self.layout.clone(), horizon: self.horizon }
        } else {
            MdpSource::File { path: self.mdp.clone().into() }
        }
    }

    fn load(&self) -> Result<World> {
        World::load(&self.source())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Behavior {
    GridRecipe,
    Uniform,
    Optimal,
}

#[derive(Subcommand)]
enum DataCommand {
    /// Roll out a behavior policy and write the dataset CSV.
    Collect {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "grid-recipe")]
        behavior: Behavior,
        /// Behavior policy file; overrides `--behavior`.
        #[arg(long)]
        behavior_policy: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        n_optimal: usize,
        #[arg(long, default_value_t = 400)]
        n_lava: usize,
        #[arg(long, default_value_t = 500)]
        n_episodes: usize,
        #[arg(long)]
        timeout_at: Option<usize>,
        /// States whose trajectories are padded to the horizon
        /// (comma separated; defaults to the grid goal).
        #[arg(long, value_delimiter = ',')]
        extend_absorbing: Option<Vec<usize>>,
        #[arg(long)]
        no_extend: bool,
        #[arg(long)]
        strip_terminal: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Relabel the rewards of a dataset.
    Corrupt {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        kind: RewardKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        lo: f64,
        #[arg(long, default_value_t = 1.0)]
        hi: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LearnerName {
    Bc,
    Pevi,
    ViLcb,
    Pqi,
    Ppi,
}

#[derive(Args)]
struct LearnerArgs {
    #[arg(long, value_enum)]
    learner: LearnerName,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, value_enum, default_value = "kind")]
    bounds: BoundsArg,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    v_max: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    delta_conf: f64,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long, default_value_t = 500)]
    n_iters: usize,
    #[arg(long, default_value_t = 50)]
    n_eval_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundsArg {
    Kind,
    Range,
}

impl LearnerArgs {
    fn spec(&self) -> LearnerSpec {
        let (gamma, v_max, b, n_iters) = (self.gamma, self.v_max, self.b, self.n_iters);
        match self.learner {
            LearnerName::Bc => LearnerSpec::Bc,
            LearnerName::Pevi => LearnerSpec::Pevi {
                beta: self.beta,
                bounds: match self.bounds {
                    BoundsArg::Kind => PeviBounds::Kind,
                    BoundsArg::Range => PeviBounds::Range,
                },
            },
            LearnerName::ViLcb => LearnerSpec::ViLcb { gamma, v_max, delta_conf: self.delta_conf },
            LearnerName::Pqi => LearnerSpec::Pqi { b, n_iters, gamma, v_max },
            LearnerName::Ppi => LearnerSpec::Ppi { b, n_iters, n_eval_iters: self.n_eval_iters, gamma, v_max },
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Reward labels the dataset carries (selects PEVI's default bounds).
    #[arg(long, default_value = "original")]
    reward_kind: RewardKind,
    #[command(flatten)]
    learner: LearnerArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    policy: PathBuf,
    /// Monte Carlo episodes; exact evaluation when absent.
    #[arg(long)]
    mc: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also report escape probability and support violation against this dataset.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CmdpCommand {
    /// Solve the implicit CMDP of a dataset (objective: its empirical reward).
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        budget: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Enumerate deterministic policies instead (small models only).
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a learned policy with the implicit CMDP optimum.
    Survival {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BiasCommand {
    /// Positive-bias estimate plus sufficient-condition slacks.
    Report {
        #[command(flatten)]
        model: ModelArgs,
        /// Dataset labeled with the true reward.
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        learner: LearnerArgs,
        /// Write the (length, return) table here as CSV.
        #[arg(long)]
        length_csv: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ReproCommand {
    /// BC and PEVI on the lava grid under all four reward kinds.
    Gridworld {
        #[arg(long)]
        layout: Option<PathBuf>,
        /// Use the shipped layout with two extra walls (expected to FAIL).
        #[arg(long, conflicts_with = "layout")]
        negative_control: bool,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 1000)]
        n_eval_episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.005)]
        tolerance: f64,
        #[arg(long)]
        no_ablation: bool,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum RunCommand {
    /// Run every (learner, reward kind, seed) cell of a config.
    Matrix {
        #[arg(long, required_unless_present = "json_config", conflicts_with = "json_config")]
        config: Option<PathBuf>,
        #[arg(long)]
        json_config: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    parse_dataset(&read(path)?)
}

fn read_policy(path: &Path) -> Result<Policy> {
    parse_policy(&read(path)?)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => Ok(std::fs::write(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Exit status of a command that did not fail.
enum Outcome {
    Ok,
    AssertionFailed,
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Mdp(MdpCommand::BuildGridworld { layout, horizon, render, out }) => {
            let world = World::load(&MdpSource::Gridworld { layout, horizon })?;
            let World::Grid(grid) = &world else { unreachable!() };
            let text = if render {
                let (_, optimal) = value_iteration(&grid.mdp, grid.mdp.reward(), 1e-12)?;
                render_ascii(&grid.layout, Some(&optimal))
            } else {
                write_mdp(&world.to_mdp())
            };
            emit(out.as_deref(), &text)?;
        }
        Command::Data(DataCommand::Collect {
            model,
            behavior,
            behavior_policy,
            n_optimal,
            n_lava,
            n_episodes,
            timeout_at,
            extend_absorbing,
            no_extend,
            strip_terminal,
            seed,
            out,
        }) => {
            let world = model.load()?;
            let collection = match (behavior_policy, behavior) {
                (Some(path), _) => CollectionConfig::PolicyFile { path, n_episodes, timeout_at },
                (None, Behavior::GridRecipe) => CollectionConfig::GridRecipe { n_optimal, n_lava },
                (None, Behavior::Uniform) => CollectionConfig::Uniform { n_episodes, timeout_at },
                (None, Behavior::Optimal) => CollectionConfig::Optimal { n_episodes, timeout_at },
            };
            let absorbing: BTreeSet<usize> = match (no_extend, extend_absorbing) {
                (true, _) => BTreeSet::new(),
                (false, Some(states)) => states.into_iter().collect(),
                (false, None) if matches!(world, World::Grid(_)) => [GOAL_STATE].into(),
                (false, None) => BTreeSet::new(),
            };
            let data = DataConfig { collection, extend_absorbing: absorbing, strip_terminal };
            emit(out.as_deref(), &write_dataset(&build_dataset(&world, &data, seed)?))?;
        }
        Command::Data(DataCommand::Corrupt { data, kind, seed, lo, hi, out }) => {
            let ds = read_dataset(&data)?;
            let spec = match kind {
                RewardKind::Random => CorruptionSpec::RandomUniform { lo, hi, seed },
                other => other.corruption(seed),
            };
            emit(out.as_deref(), &write_dataset(&corrupt(&ds, &spec)?))?;
        }
        Command::Train(args) => {
            let ds = read_dataset(&args.data)?;
            let trained = train(&args.learner.spec(), &ds, args.reward_kind, None, args.learner.seed)?;
            for w in &trained.warnings {
                eprintln!("warning: {w}");
            }
            emit(args.out.as_deref(), &write_policy(&trained.policy))?;
        }
        Command::Eval(args) => {
            let world = args.model.load()?;
            let policy = read_policy(&args.policy)?;
            let evaluation = match args.mc {
                Some(n_episodes) => Evaluation::Mc { n_episodes },
                None => Evaluation::Exact,
            };
            let (mean, stderr) = score(world.model(), &policy, evaluation, args.seed)?;
            let mut json = serde_json::json!({ "mean_return": mean, "stderr": stderr });
            if let Some(path) = &args.data {
                let (escape, violation) = safety(world.model(), &policy, &read_dataset(path)?.support())?;
                json["escape_probability"] = escape.into();
                json["support_violation"] = violation.into();
            }
            println!("{}", serde_json::to_string_pretty(&json)?);
        }
        Command::Cmdp(CmdpCommand::Solve { model, data, budget, tol, oracle, out }) => {
            let mdp = model.load()?.to_mdp();
            let ds = read_dataset(&data)?;
            let implicit = build_implicit_cmdp(&mdp, &ds.empirical_reward(), &ds.support())?;
            let cmdp = Cmdp::new(implicit.mdp, implicit.f, implicit.g, budget)?;
            let solution = if oracle { brute_force_oracle(&cmdp)? } else { solve_lagrangian(&cmdp, tol)? };
            emit(out.as_deref(), &(solution.to_json()? + "\n"))?;
        }
        Command::Cmdp(CmdpCommand::Survival { model, data, policy, out }) => {
            let mdp = model.load()?.to_mdp();
            let ds = read_dataset(&data)?;
            let report = verify_survival(&mdp, &ds, &ds.empirical_reward(), &read_policy(&policy)?)?;
            emit(out.as_deref(), &(report.to_json()? + "\n"))?;
        }
        Command::Bias(BiasCommand::Report { model, data, learner, length_csv, out }) => {
            let mdp: Mdp = model.load()?.to_mdp();
            let ds = read_dataset(&data)?;
            let report = bias_report(&mdp, &ds, &learner.spec(), learner.seed)?;
            if let Some(path) = length_csv {
                let table = survival_lab::bias::length_return_table(&ds, mdp.as_ref().reward())?;
                std::fs::write(path, table.to_csv())?;
            }
            emit(out.as_deref(), &(report.to_json()? + "\n"))?;
        }
        Command::Repro(ReproCommand::Gridworld {
            layout,
            negative_control,
            beta,
            n_eval_episodes,
            seed,
            tolerance,
            no_ablation,
            json,
        }) => {
            let layout = match (layout, negative_control) {
                (Some(path), _) => GridLayout::parse(&read(&path)?)?,
                (None, true) => negative_control_layout(),
                (None, false) => GridLayout::default(),
            };
            let options = ReproOptions { layout, beta, n_eval_episodes, seed, tolerance, ablation: !no_ablation };
            let report = repro_gridworld(&options)?;
            println!("{report}");
            if let Some(path) = json {
                std::fs::write(path, report.to_json()?)?;
            }
            if !report.pass {
                for c in report.failing_cells() {
                    eprintln!(
                        "assertion failed: {} / {} observed {:.4}, expected {:.2}",
                        c.learner, c.reward_kind, c.observed, c.expected
                    );
                }
                return Ok(Outcome::AssertionFailed);
            }
        }
        Command::Run(RunCommand::Matrix { config, json_config }) => {
            let config = match (config, json_config) {
                (_, Some(path)) => ExperimentConfig::from_json(&read(&path)?)?,
                (Some(path), None) => ExperimentConfig::load(&path)?,
                (None, None) => unreachable!("clap requires one of the two"),
            };
            let output = run_matrix(&config)?;
            let failed = output.rows.iter().filter(|r| r.error.is_some()).count();
            print!("{}", std::fs::read_to_string(config.output_dir.join("results.md"))?);
            for path in &output.files {
                eprintln!("wrote {}", path.display());
            }
            if failed > 0 {
                eprintln!("{failed} of {} cells failed; see the error column", output.rows.len());
            }
        }
    }
    Ok(Outcome::Ok)
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Infeasible { .. } | Error::MultiplierCap { .. } => 4,
        Error::NotConverged { .. } => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::AssertionFailed) => ExitCode::from(3),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
