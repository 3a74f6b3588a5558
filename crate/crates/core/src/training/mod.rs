//! Epoch loop, early stopping, learning-rate schedule and run directories.

mod clock;
mod config;
pub mod run;
mod schedule;
mod train;

pub use clock::Stopwatch;
pub use config::{DataSource, RunConfig, SchedulerConfig, TrainConfig, DEFAULT_SEED, SHUFFLE_SEED_OFFSET, SYNTHETIC_SEED_OFFSET};
pub use run::{evaluate_run, load_dataset, run_experiment, RunMetrics, RunRecord};
pub use schedule::{early_stop_check, EarlyStop, Scheduler};
pub use train::{train, train_and_test, train_step, validation_metrics, EpochLog, Failure, RunStatus, TrainOutcome};
pub(crate) use train::{train_epoch, EpochResult};
