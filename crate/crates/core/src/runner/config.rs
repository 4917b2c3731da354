use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gridworld::{DEFAULT_HORIZON, GOAL_STATE};
use crate::learners::RewardKind;

/// Where the true model comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum MdpSource {
    Gridworld {
        /// Layout file; the shipped layout when absent.
        #[serde(default)]
        layout: Option<PathBuf>,
        #[serde(default = "default_horizon")]
        horizon: usize,
    },
    File {
        path: PathBuf,
    },
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

impl Default for MdpSource {
    fn default() -> Self {
        MdpSource::Gridworld { layout: None, horizon: DEFAULT_HORIZON }
    }
}

/// Behavior used to log data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "behavior", rename_all = "snake_case", deny_unknown_fields)]
pub enum CollectionConfig {
    /// Optimal episodes plus episodes that walk into the topmost lava cell.
    GridRecipe {
        #[serde(default = "default_n_optimal")]
        n_optimal: usize,
        #[serde(default = "default_n_lava")]
        n_lava: usize,
    },
    Uniform {
        n_episodes: usize,
        #[serde(default)]
        timeout_at: Option<usize>,
    },
    Optimal {
        n_episodes: usize,
        #[serde(default)]
        timeout_at: Option<usize>,
    },
    PolicyFile {
        path: PathBuf,
        n_episodes: usize,
        #[serde(default)]
        timeout_at: Option<usize>,
    },
}

fn default_n_optimal() -> usize {
    100
}

fn default_n_lava() -> usize {
    400
}

impl Default for CollectionConfig {
    fn default() -> Self {
        CollectionConfig::GridRecipe { n_optimal: 100, n_lava: 400 }
    }
}

// unknown keys are rejected by the flattened collection variant
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    #[serde(flatten)]
    pub collection: CollectionConfig,
    /// Trajectories ending in one of these states are padded with
    /// self-transitions to the full horizon.
    #[serde(default = "default_absorbing")]
    pub extend_absorbing: BTreeSet<usize>,
    #[serde(default)]
    pub strip_terminal: bool,
}

fn default_absorbing() -> BTreeSet<usize> {
    [GOAL_STATE].into()
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { collection: CollectionConfig::default(), extend_absorbing: default_absorbing(), strip_terminal: false }
    }
}

/// How PEVI picks its value bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PeviBounds {
    /// Per reward kind, for rewards shaped like the grid task.
    #[default]
    Kind,
    /// From the observed reward range of the training data.
    Range,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LearnerSpec {
    Bc,
    Pevi {
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default)]
        bounds: PeviBounds,
    },
    ViLcb {
        #[serde(default)]
        gamma: Option<f64>,
        #[serde(default)]
        v_max: Option<f64>,
        #[serde(default = "default_delta_conf")]
        delta_conf: f64,
    },
    Pqi {
        #[serde(default)]
        b: Option<f64>,
        #[serde(default = "default_n_iters")]
        n_iters: usize,
        #[serde(default)]
        gamma: Option<f64>,
        #[serde(default)]
        v_max: Option<f64>,
    },
    Ppi {
        #[serde(default)]
        b: Option<f64>,
        #[serde(default = "default_n_iters")]
        n_iters: usize,
        #[serde(default = "default_n_eval_iters")]
        n_eval_iters: usize,
        #[serde(default)]
        gamma: Option<f64>,
        #[serde(default)]
        v_max: Option<f64>,
    },
}

fn default_beta() -> f64 {
    1.0
}

fn default_delta_conf() -> f64 {
    0.1
}

fn default_n_iters() -> usize {
    500
}

fn default_n_eval_iters() -> usize {
    50
}

impl LearnerSpec {
    pub fn label(&self) -> &'static str {
        match self {
            LearnerSpec::Bc => "bc",
            LearnerSpec::Pevi { .. } => "pevi",
            LearnerSpec::ViLcb { .. } => "vi-lcb",
            LearnerSpec::Pqi { .. } => "pqi",
            LearnerSpec::Ppi { .. } => "ppi",
        }
    }

    /// Column heading in the markdown report.
    pub fn display_name(&self) -> &'static str {
        match self {
            LearnerSpec::Bc => "Behavior Cloning",
            LearnerSpec::Pevi { .. } => "PEVI",
            LearnerSpec::ViLcb { .. } => "VI-LCB",
            LearnerSpec::Pqi { .. } => "PQI",
            LearnerSpec::Ppi { .. } => "PPI",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "snake_case", deny_unknown_fields)]
pub enum Evaluation {
    Exact,
    Mc { n_episodes: usize },
}

impl Default for Evaluation {
    fn default() -> Self {
        Evaluation::Mc { n_episodes: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub mdp: MdpSource,
    #[serde(default)]
    pub data: DataConfig,
    pub corruption: Vec<RewardKind>,
    pub learners: Vec<LearnerSpec>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub evaluation: Evaluation,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {} column {}: {e}", e.line(), e.column())))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads TOML, or JSON when the file name ends in `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.learners.is_empty() {
            return Err(Error::Config("`learners` must list at least one learner".into()));
        }
        if self.corruption.is_empty() {
            return Err(Error::Config("`corruption` must list at least one reward kind".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("`seeds` must list at least one seed".into()));
        }
        if let Evaluation::Mc { n_episodes: 0 } = self.evaluation {
            return Err(Error::Config("evaluation.n_episodes must be at least 1".into()));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::Config("`output_dir` must not be empty".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON rendering, so equivalent TOML and JSON
    /// files share a digest.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
