use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::learners::RewardKind;
use crate::runner::config::{ExperimentConfig, LearnerSpec};
use crate::runner::pipeline::{build_dataset, relabel, safety, score, train, World};
use crate::runner::report::{emit_report, ReportFormat, ResultRow};

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "SURVIVAL_LAB_THREADS";

/// Worker pool sized by [`THREADS_ENV`] (rayon's default when unset or 0).
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a nonnegative integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Files written by [`run_matrix`].
#[derive(Debug, Clone)]
pub struct MatrixOutput {
    pub rows: Vec<ResultRow>,
    pub digest: String,
    pub files: Vec<PathBuf>,
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "cell panicked".into())
}

fn guarded<T>(f: impl FnOnce() -> Result<T>) -> std::result::Result<T, String> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e)) => Err(e.to_string()),
        Err(payload) => Err(format!("panic: {}", panic_message(payload))),
    }
}

fn run_cell(
    world: &World,
    data: &Dataset,
    spec: &LearnerSpec,
    kind: RewardKind,
    seed: u64,
    cfg: &ExperimentConfig,
) -> ResultRow {
    let start = Instant::now();
    let result = guarded(|| {
        let mdp = world.model();
        let trained = train(spec, data, kind, mdp.gamma(), seed)?;
        let (mean, stderr) = score(mdp, &trained.policy, cfg.evaluation, seed)?;
        let (escape, violation) = safety(mdp, &trained.policy, &data.support())?;
        Ok((mean, stderr, escape, violation, trained.warnings))
    });
    let runtime_ms = start.elapsed().as_millis() as u64;
    match result {
        Ok((mean, stderr, escape, violation, warnings)) => ResultRow {
            learner: spec.label().into(),
            reward_kind: kind,
            seed,
            mean_return: Some(mean),
            stderr: Some(stderr),
            escape_probability: Some(escape),
            support_violation: Some(violation),
            runtime_ms,
            error: None,
            warnings: warnings.join("; "),
        },
        Err(e) => ResultRow { runtime_ms, ..ResultRow::failed(spec.label(), kind, seed, e) },
    }
}

/// Runs every (learner, reward kind, seed) cell; rows come back in
/// seed-major, then kind, then learner order regardless of scheduling. A
/// cell that fails (or whose dataset cannot be built) is reported in its
/// row and does not stop the others.
pub fn run_cells(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let world = World::load(&config.mdp)?;
    let pool = worker_pool()?;
    pool.install(|| {
        let datasets: Vec<(u64, RewardKind, std::result::Result<Dataset, String>)> = config
            .seeds
            .par_iter()
            .flat_map_iter(|&seed| {
                let base = guarded(|| build_dataset(&world, &config.data, seed));
                config
                    .corruption
                    .iter()
                    .map(move |&kind| {
                        let ds = base.clone().and_then(|b| guarded(|| relabel(&b, kind, seed)));
                        (seed, kind, ds)
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let cells: Vec<(&LearnerSpec, usize)> =
            (0..datasets.len()).flat_map(|i| config.learners.iter().map(move |l| (l, i))).collect();
        Ok(cells
            .par_iter()
            .map(|&(spec, i)| {
                let (seed, kind, ds) = &datasets[i];
                match ds {
                    Ok(ds) => run_cell(&world, ds, spec, *kind, *seed, config),
                    Err(e) => ResultRow::failed(spec.label(), *kind, *seed, format!("dataset: {e}")),
                }
            })
            .collect())
    })
}

/// [`run_cells`], then writes `results.{csv,json,md}` (deterministic) and
/// `runtime.csv` (wall clock) into the output directory. Every file
/// carries the config digest in its header.
pub fn run_matrix(config: &ExperimentConfig) -> Result<MatrixOutput> {
    std::fs::create_dir_all(&config.output_dir)
        .map_err(|e| Error::Config(format!("output_dir {} is not writable: {e}", config.output_dir.display())))?;
    let rows = run_cells(config)?;
    let digest = config.digest();
    let mut files = Vec::new();
    for format in [ReportFormat::Csv, ReportFormat::Json, ReportFormat::Markdown] {
        let path = config.output_dir.join(format!("results.{}", format.extension()));
        std::fs::write(&path, emit_report(&rows, format, &digest, false)?)?;
        files.push(path);
    }
    let path = config.output_dir.join("runtime.csv");
    let mut runtime = format!("# config_digest={digest}\nlearner,reward_kind,seed,runtime_ms\n");
    for r in &rows {
        runtime.push_str(&format!("{},{},{},{}\n", r.learner, r.reward_kind, r.seed, r.runtime_ms));
    }
    std::fs::write(&path, runtime)?;
    files.push(path);
    Ok(MatrixOutput { rows, digest, files })
}
