//! Experiment plumbing: configs, the (learner x reward kind x seed) matrix,
//! the grid-world reproduction and report files.

mod config;
mod matrix;
mod pipeline;
mod report;
mod repro;

pub use config::{CollectionConfig, DataConfig, Evaluation, ExperimentConfig, LearnerSpec, MdpSource, PeviBounds};
pub use matrix::{run_cells, run_matrix, worker_pool, MatrixOutput, THREADS_ENV};
pub use pipeline::{bias_report, build_dataset, relabel, safety, score, train, Trained, World};
pub use report::{emit_report, parse_report_csv, parse_report_json, ReportFormat, ResultRow};
pub use repro::{
    negative_control_layout, repro_gridworld, AblationCell, ReproCell, ReproOptions, ReproReport, EXPECTED_BC,
    EXPECTED_PEVI,
};
