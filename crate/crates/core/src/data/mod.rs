//! Manifest-driven ingestion, splitting, batching and scenario statistics.

mod batch;
mod dataset;
mod ingest;
pub mod io;
pub mod manifest;
mod split;
mod stats;
mod synthetic;

pub use batch::{make_batches, sequential_batches, Batch};
pub use dataset::{FeatureSpace, IngestReport, ProcessedDataset, SparseField};
pub use ingest::{ingest, quantile_buckets};
pub use io::{read_processed, read_stats, top_k_scenarios, write_processed, DatasetStats};
pub use manifest::{DatasetManifest, FeatureKind, FeatureSpec, LabelRule, Source, SourceFile, SplitRule};
pub use split::{apportion_811, prepare_splits, split_811, split_dataset, DenseStats, SplitIndices, Splits};
pub use stats::{coefficient_of_variation, scenario_stats, Intersection, ScenarioStats};
pub use synthetic::{gen_synthetic, SyntheticSpec};
