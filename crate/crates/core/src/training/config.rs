use serde::{Deserialize, Serialize};

use crate::data::SyntheticSpec;
use crate::error::{Error, Result};
use crate::models::ModelConfig;
use crate::numeric::Dtype;

pub const DEFAULT_SEED: u64 = 42;
pub const SHUFFLE_SEED_OFFSET: u64 = 0x1000;
pub const SYNTHETIC_SEED_OFFSET: u64 = 0x2000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchedulerConfig {
    None,
    Plateau { factor: f64, patience: usize, min_lr: f64 },
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig::Plateau {
            factor: 0.5,
            patience: 1,
            min_lr: 1e-6,
        }
    }
}

fn default_lr() -> f64 {
    1e-3
}
fn default_batch_size() -> usize {
    4096
}
fn default_max_epochs() -> usize {
    10
}
fn default_patience() -> usize {
    2
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_eval_batch_size() -> usize {
    16384
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_patience")]
    pub early_stop_patience: usize,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub precision: Dtype,
    #[serde(default = "default_eval_batch_size")]
    pub eval_batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: default_lr(),
            batch_size: default_batch_size(),
            max_epochs: default_max_epochs(),
            early_stop_patience: default_patience(),
            scheduler: SchedulerConfig::default(),
            seed: DEFAULT_SEED,
            precision: Dtype::F32,
            eval_batch_size: default_eval_batch_size(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("`lr` must be non-negative, got {}", self.lr)));
        }
        if self.batch_size == 0 || self.eval_batch_size == 0 {
            return Err(Error::Config("batch sizes must be positive".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("`max_epochs` must be at least 1".into()));
        }
        if self.early_stop_patience == 0 {
            return Err(Error::Config("`early_stop_patience` must be at least 1".into()));
        }
        if let SchedulerConfig::Plateau { factor, patience, min_lr } = self.scheduler {
            if !(factor > 0.0 && factor < 1.0) || patience == 0 || min_lr < 0.0 {
                return Err(Error::Config("plateau scheduler needs 0 < factor < 1, patience >= 1, min_lr >= 0".into()));
            }
        }
        Ok(())
    }

    pub fn shuffle_seed(&self) -> u64 {
        self.seed.wrapping_add(SHUFFLE_SEED_OFFSET)
    }
}

/// Where a run's examples come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// A directory written by `prepare`.
    Processed { path: String },
    /// Generated in memory; `seed` defaults to the run seed plus a fixed offset.
    Synthetic {
        scenarios: usize,
        rows: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spec: Option<SyntheticSpec>,
    },
}

/// Everything needed to re-run one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub version: String,
    pub data: DataSource,
    /// Keep only the k most frequent scenarios.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k_scenarios: Option<usize>,
    #[serde(default = "default_seed")]
    pub split_seed: u64,
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        if let Some(m) = value.get("model") {
            ModelConfig::from_json(m)?;
        }
        let c: Self = serde_json::from_value(value.clone())?;
        c.model.validate()?;
        c.train.validate()?;
        Ok(c)
    }

    /// Fills derived fields (version, synthetic seed) so the result fully
    /// determines the run.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.version = crate::VERSION.to_string();
        if let DataSource::Synthetic { seed, spec, scenarios, .. } = &mut c.data {
            seed.get_or_insert(self.train.seed.wrapping_add(SYNTHETIC_SEED_OFFSET));
            spec.get_or_insert_with(|| SyntheticSpec::uniform(*scenarios, 0.3));
        }
        c
    }
}
