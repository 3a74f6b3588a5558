use serde::{Deserialize, Serialize};

use crate::data::{make_batches, Batch, Splits};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_per_scenario, predict_all, MetricRow};
use crate::models::Model;
use crate::numeric::{adam_step, AdamConfig, AdamState, Graph, ParameterStore, Scalar};
use crate::training::{early_stop_check, EarlyStop, Scheduler, Stopwatch, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    EarlyStopped,
    Failed,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::EarlyStopped => "early_stopped",
            RunStatus::Failed => "failed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: Option<f64>,
    pub val_logloss: Option<f64>,
    pub lr: f64,
    pub wall_seconds: f64,
}

impl EpochLog {
    /// The fields that must match across reruns (everything except timing).
    pub fn metric_fields(&self) -> (usize, u64, Option<u64>, Option<u64>, u64) {
        (
            self.epoch,
            self.train_loss.to_bits(),
            self.val_auc.map(f64::to_bits),
            self.val_logloss.map(f64::to_bits),
            self.lr.to_bits(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub epoch: usize,
    pub batch: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub epochs: Vec<EpochLog>,
    pub status: RunStatus,
    pub best_epoch: Option<usize>,
    pub best_val_auc: Option<f64>,
    pub failure: Option<Failure>,
}

/// Result of one pass over the training split.
pub(crate) enum EpochResult {
    Loss(f64),
    Failed { batch: usize, message: String },
}

pub(crate) fn train_epoch<T: Scalar>(
    model: &mut Model<T>,
    adam: &mut AdamState<T>,
    train: &Batch,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<EpochResult> {
    let mut total = 0.0;
    let mut rows = 0usize;
    for (b, batch) in make_batches(train, cfg.batch_size, cfg.shuffle_seed(), epoch).iter().enumerate() {
        match train_step(model, adam, batch) {
            Ok(loss) if loss.is_finite() => {
                total += loss * batch.len() as f64;
                rows += batch.len();
            }
            Ok(loss) => {
                return Ok(EpochResult::Failed {
                    batch: b,
                    message: format!("non-finite loss {loss}"),
                })
            }
            Err(e @ Error::NonFinite { .. }) => {
                return Ok(EpochResult::Failed {
                    batch: b,
                    message: e.to_string(),
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(EpochResult::Loss(if rows == 0 { 0.0 } else { total / rows as f64 }))
}

/// One Adam step on `batch`; returns the batch's mean loss before the step.
pub fn train_step<T: Scalar>(model: &mut Model<T>, adam: &mut AdamState<T>, batch: &Batch) -> Result<f64> {
    let labels: Vec<T> = batch.label.iter().map(|&y| T::lit(f64::from(y))).collect();
    let (loss, grads, fwd) = {
        let mut g = Graph::new(&model.params);
        let fwd = model.forward(&mut g, batch)?;
        let loss = g.bce_with_logits(fwd.logits, &labels)?;
        let grads = g.backward(loss)?;
        (g.value(loss)[0].as_f64(), grads, fwd)
    };
    adam_step(&mut model.params, adam, &grads)?;
    model.after_step(&fwd)?;
    Ok(loss)
}

pub fn validation_metrics<T: Scalar>(model: &Model<T>, val: &Batch, batch_size: usize) -> Result<MetricRow> {
    let scores = predict_all(model, val, batch_size)?;
    Ok(MetricRow::compute(&val.label, &scores))
}

/// Adam on binary cross-entropy with per-epoch validation, early stopping on
/// validation AUC and a plateau scheduler. The best-AUC parameters are
/// restored before returning. `on_epoch` sees every log entry as it is made.
pub fn train<T: Scalar>(
    model: &mut Model<T>,
    splits: &Splits,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog, bool, &Model<T>) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut adam = AdamState::new(
        &model.params,
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
    );
    let mut scheduler = Scheduler::new(cfg.scheduler, cfg.lr);
    let mut history = Vec::new();
    let mut epochs = Vec::new();
    let mut best: Option<(usize, f64, ParameterStore<T>)> = None;
    let mut status = RunStatus::Completed;
    let mut failure = None;
    for epoch in 1..=cfg.max_epochs {
        let clock = Stopwatch::start();
        let lr = scheduler.lr;
        adam.set_lr(lr);
        let loss = match train_epoch(model, &mut adam, &splits.train, cfg, epoch)? {
            EpochResult::Loss(l) => l,
            EpochResult::Failed { batch, message } => {
                log::error!("epoch {epoch} batch {batch}: {message}");
                status = RunStatus::Failed;
                failure = Some(Failure { epoch, batch, message });
                break;
            }
        };
        let val = validation_metrics(model, &splits.val, cfg.eval_batch_size)?;
        // A single-class validation split has no AUC; it never counts as improvement.
        let metric = val.auc.unwrap_or(f64::NEG_INFINITY);
        let improved = best.as_ref().is_none_or(|(_, b, _)| metric > *b);
        if improved {
            best = Some((epoch, metric, model.params.clone()));
        }
        let entry = EpochLog {
            epoch,
            train_loss: loss,
            val_auc: val.auc,
            val_logloss: val.logloss,
            lr,
            wall_seconds: clock.seconds(),
        };
        log::info!(
            "epoch {epoch}: loss {loss:.5} val auc {} lr {lr:e}",
            val.auc.map_or("n/a".into(), |a| format!("{a:.5}"))
        );
        on_epoch(&entry, improved, model)?;
        epochs.push(entry);
        history.push(metric);
        scheduler.step(metric);
        if early_stop_check(&history, cfg.early_stop_patience) == EarlyStop::Stop && epoch < cfg.max_epochs {
            status = RunStatus::EarlyStopped;
            break;
        }
    }
    let (best_epoch, best_val_auc) = match best {
        Some((e, auc, params)) => {
            model.params = params;
            (Some(e), auc.is_finite().then_some(auc))
        }
        None => (None, None),
    };
    Ok(TrainOutcome {
        epochs,
        status,
        best_epoch,
        best_val_auc,
        failure,
    })
}

/// Trains and reports test metrics of the restored best model.
pub fn train_and_test<T: Scalar>(
    model: &mut Model<T>,
    splits: &Splits,
    cfg: &TrainConfig,
) -> Result<(TrainOutcome, crate::evaluation::ScenarioReport)> {
    let outcome = train(model, splits, cfg, |_, _, _| Ok(()))?;
    let report = evaluate_per_scenario(model, &splits.test, cfg.eval_batch_size)?;
    Ok((outcome, report))
}
