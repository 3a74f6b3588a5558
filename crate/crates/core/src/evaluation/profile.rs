use serde::{Deserialize, Serialize};

use crate::data::{sequential_batches, Splits};
use crate::error::{Error, Result};
use crate::models::Model;
use crate::numeric::{AdamConfig, AdamState, Scalar};
use crate::training::{train_epoch, train_step, EpochResult, Stopwatch, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub train_seconds_per_epoch: f64,
    pub infer_ms_per_batch: f64,
    pub param_count: usize,
    pub epochs_timed: usize,
    pub batches_timed: usize,
}

/// Times `epochs` training epochs and batched inference over the test split.
/// One untimed warm-up batch precedes each measurement. Trains `model` in place.
pub fn profile<T: Scalar>(model: &mut Model<T>, splits: &Splits, cfg: &TrainConfig, epochs: usize) -> Result<EfficiencyReport> {
    let mut adam = AdamState::new(
        &model.params,
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
    );
    let train_batches = sequential_batches(&splits.train, cfg.batch_size);
    if let Some(b) = train_batches.first() {
        train_step(model, &mut adam, b)?;
    }
    let mut train_time = 0.0;
    for epoch in 1..=epochs.max(1) {
        let clock = Stopwatch::start();
        if let EpochResult::Failed { batch, message } = train_epoch(model, &mut adam, &splits.train, cfg, epoch)? {
            return Err(Error::Data(format!("profiling epoch {epoch} failed at batch {batch}: {message}")));
        }
        train_time += clock.seconds();
    }
    let test_batches = sequential_batches(&splits.test, cfg.batch_size);
    let timed = if test_batches.len() > 1 { &test_batches[1..] } else { &test_batches[..] };
    if let Some(b) = test_batches.first() {
        model.predict(b)?;
    }
    let clock = Stopwatch::start();
    for b in timed {
        model.predict(b)?;
    }
    let infer = clock.seconds();
    Ok(EfficiencyReport {
        train_seconds_per_epoch: train_time / epochs.max(1) as f64,
        infer_ms_per_batch: if timed.is_empty() { 0.0 } else { 1e3 * infer / timed.len() as f64 },
        param_count: model.param_count(),
        epochs_timed: epochs.max(1),
        batches_timed: timed.len(),
    })
}
