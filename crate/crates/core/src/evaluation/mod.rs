//! Metrics, per-scenario reports, significance tests and efficiency profiling.

mod metrics;
mod profile;
mod report;
mod welch;

pub use metrics::{auc, logloss, LOGLOSS_CLIP};
pub use profile::{profile, EfficiencyReport};
pub use report::{evaluate_per_scenario, predict_all, MeanStd, MetricRow, ScenarioMetrics, ScenarioReport, SeedAggregate};
pub use welch::{welch_ttest, WelchResult};
