use serde::{Deserialize, Serialize};

use crate::data::Batch;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseField {
    pub name: String,
    /// Number of indices including the reserved out-of-vocabulary index 0.
    pub vocab: usize,
}

/// Encoded feature layout shared by a dataset and every model built on it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpace {
    pub sparse: Vec<SparseField>,
    pub dense: Vec<String>,
    pub scenario_name: String,
    /// Raw label of each scenario id.
    pub scenario_labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_feature: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_feature: Option<String>,
}

impl FeatureSpace {
    pub fn scenario_count(&self) -> usize {
        self.scenario_labels.len()
    }

    pub fn sparse_index(&self, name: &str) -> Option<usize> {
        self.sparse.iter().position(|f| f.name == name)
    }

    /// Width of the concatenated embedding + dense input for dimension `d`.
    pub fn input_dim(&self, d: usize) -> usize {
        self.sparse.len() * d + self.dense.len()
    }

    pub fn embedding_params(&self, d: usize) -> usize {
        self.sparse.iter().map(|f| f.vocab * d).sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub kept: usize,
    pub dropped_unmapped_scenario: usize,
    pub unparseable: usize,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProcessedDataset {
    pub name: String,
    pub space: FeatureSpace,
    /// All examples; `ids` are row positions. Dense values are raw
    /// (normalization happens per split with training statistics).
    pub examples: Batch,
    /// Predefined fold per example (0 train, 1 val, 2 test), when the
    /// manifest declares one.
    pub fold: Option<Vec<u8>>,
    pub report: IngestReport,
}

impl ProcessedDataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn scenario_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.space.scenario_count()];
        for &s in &self.examples.scenario {
            c[s as usize] += 1;
        }
        c
    }
}
