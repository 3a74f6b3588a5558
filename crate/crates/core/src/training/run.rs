//! Run directories: `config.resolved.json`, `log.jsonl`, `model.best.swr`,
//! `metrics.json` and `status`.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{gen_synthetic, prepare_splits, read_processed, top_k_scenarios, ProcessedDataset, Splits};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_per_scenario, ScenarioReport};
use crate::models::{build_model, Model};
use crate::numeric::{Dtype, Scalar};
use crate::training::{train, DataSource, EpochLog, Failure, RunConfig, RunStatus};

pub const CONFIG_FILE: &str = "config.resolved.json";
pub const LOG_FILE: &str = "log.jsonl";
pub const CHECKPOINT_FILE: &str = "model.best.swr";
pub const METRICS_FILE: &str = "metrics.json";
pub const STATUS_FILE: &str = "status";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub model: String,
    pub seed: u64,
    pub status: RunStatus,
    pub best_epoch: Option<usize>,
    pub best_val_auc: Option<f64>,
    pub param_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
    pub test: Option<ScenarioReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub epochs: Vec<EpochLog>,
    pub status: RunStatus,
    pub checkpoint: Option<PathBuf>,
    pub metrics: RunMetrics,
}

/// Loads (or generates) the examples a config refers to, after the
/// top-k scenario filter.
pub fn load_dataset(cfg: &RunConfig) -> Result<ProcessedDataset> {
    let cfg = cfg.resolved();
    let ds = match &cfg.data {
        DataSource::Processed { path } => read_processed(Path::new(path))?,
        DataSource::Synthetic {
            scenarios,
            rows,
            seed,
            spec,
        } => {
            let spec = spec.clone().expect("resolved");
            if spec.scenario_count() != *scenarios {
                return Err(Error::Config(format!(
                    "synthetic spec describes {} scenarios, config says {scenarios}",
                    spec.scenario_count()
                )));
            }
            gen_synthetic(&spec, *rows, seed.expect("resolved"))?
        }
    };
    match cfg.top_k_scenarios {
        Some(k) => top_k_scenarios(&ds, k),
        None => Ok(ds),
    }
}

fn write_json<V: Serialize>(path: &Path, value: &V) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Trains one configuration on `data` and fills `out` with the run files.
pub fn run_experiment(cfg: &RunConfig, data: &ProcessedDataset, out: &Path) -> Result<RunRecord> {
    let cfg = cfg.resolved();
    cfg.model.validate()?;
    cfg.train.validate()?;
    std::fs::create_dir_all(out)?;
    write_json(&out.join(CONFIG_FILE), &cfg)?;
    let splits = prepare_splits(data, cfg.split_seed)?;
    match cfg.train.precision {
        Dtype::F32 => run_typed::<f32>(&cfg, data, &splits, out),
        Dtype::F64 => run_typed::<f64>(&cfg, data, &splits, out),
    }
}

fn run_typed<T: Scalar>(cfg: &RunConfig, data: &ProcessedDataset, splits: &Splits, out: &Path) -> Result<RunRecord> {
    let mut model: Model<T> = build_model(&cfg.model, &data.space, data.space.scenario_count(), cfg.train.seed)?;
    let ckpt = out.join(CHECKPOINT_FILE);
    let _ = std::fs::remove_file(&ckpt);
    let mut log = std::io::BufWriter::new(std::fs::File::create(out.join(LOG_FILE))?);
    let outcome = train(&mut model, splits, &cfg.train, |entry, improved, m| {
        serde_json::to_writer(&mut log, entry)?;
        log.write_all(b"\n")?;
        log.flush()?;
        if improved {
            m.save(&ckpt)?;
        }
        Ok(())
    })?;
    drop(log);
    let test = match outcome.status {
        RunStatus::Failed => None,
        _ => Some(evaluate_per_scenario(&model, &splits.test, cfg.train.eval_batch_size)?),
    };
    let metrics = RunMetrics {
        model: cfg.model.kind.to_string(),
        seed: cfg.train.seed,
        status: outcome.status,
        best_epoch: outcome.best_epoch,
        best_val_auc: outcome.best_val_auc,
        param_count: model.param_count(),
        failure: outcome.failure.clone(),
        test,
    };
    write_json(&out.join(METRICS_FILE), &metrics)?;
    std::fs::write(out.join(STATUS_FILE), format!("{}\n", outcome.status.as_str()))?;
    Ok(RunRecord {
        config: cfg.clone(),
        epochs: outcome.epochs,
        status: outcome.status,
        checkpoint: ckpt.exists().then_some(ckpt),
        metrics,
    })
}

pub fn read_config(run_dir: &Path) -> Result<RunConfig> {
    let path = run_dir.join(CONFIG_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    RunConfig::from_json(&serde_json::from_str(&text)?)
}

pub fn read_log(run_dir: &Path) -> Result<Vec<EpochLog>> {
    let text = std::fs::read_to_string(run_dir.join(LOG_FILE))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

pub fn read_metrics(run_dir: &Path) -> Result<RunMetrics> {
    Ok(serde_json::from_str(&std::fs::read_to_string(run_dir.join(METRICS_FILE))?)?)
}

/// Re-loads a run's best checkpoint and evaluates it on the run's test split.
pub fn evaluate_run(run_dir: &Path, data: Option<&ProcessedDataset>) -> Result<ScenarioReport> {
    let cfg = read_config(run_dir)?;
    let loaded;
    let data = match data {
        Some(d) => d,
        None => {
            loaded = load_dataset(&cfg)?;
            &loaded
        }
    };
    let splits = prepare_splits(data, cfg.split_seed)?;
    match cfg.train.precision {
        Dtype::F32 => evaluate_typed::<f32>(&cfg, data, &splits, run_dir),
        Dtype::F64 => evaluate_typed::<f64>(&cfg, data, &splits, run_dir),
    }
}

fn evaluate_typed<T: Scalar>(cfg: &RunConfig, data: &ProcessedDataset, splits: &Splits, run_dir: &Path) -> Result<ScenarioReport> {
    let mut model: Model<T> = build_model(&cfg.model, &data.space, data.space.scenario_count(), cfg.train.seed)?;
    let ckpt = run_dir.join(CHECKPOINT_FILE);
    model.load_params(&ckpt).map_err(|e| match e {
        Error::Io(io) => Error::Checkpoint(format!("{}: {io}", ckpt.display())),
        Error::ParamMismatch(m) => Error::Checkpoint(m),
        other => other,
    })?;
    evaluate_per_scenario(&model, &splits.test, cfg.train.eval_batch_size)
}
