use serde::{Deserialize, Serialize};

use crate::data::Batch;
use crate::error::{Error, Result};
use crate::evaluation::{auc, logloss};
use crate::models::Model;
use crate::numeric::Scalar;

/// Metrics over one slice of the examples. `auc` is absent when the slice
/// holds a single class, `logloss` when it is empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub auc: Option<f64>,
    pub logloss: Option<f64>,
    pub count: usize,
    pub positives: usize,
}

impl MetricRow {
    pub fn compute(labels: &[u8], scores: &[f64]) -> Self {
        Self {
            auc: auc(labels, scores),
            logloss: (!labels.is_empty()).then(|| logloss(labels, scores)),
            count: labels.len(),
            positives: labels.iter().filter(|&&y| y == 1).count(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMetrics {
    pub id: usize,
    pub label: String,
    #[serde(flatten)]
    pub metrics: MetricRow,
}

/// Overall metrics pool every example (micro); `weighted_auc` is the
/// example-count-weighted mean of the per-scenario AUCs that exist.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub overall: MetricRow,
    pub weighted_auc: Option<f64>,
    pub scenarios: Vec<ScenarioMetrics>,
    pub overall_aggregation: String,
}

impl ScenarioReport {
    pub fn from_predictions(labels: &[u8], scores: &[f64], scenario: &[u32], scenario_labels: &[String]) -> Result<Self> {
        if labels.len() != scores.len() || labels.len() != scenario.len() {
            return Err(Error::ShapeMismatch {
                op: "report",
                left: vec![labels.len()],
                right: vec![scores.len(), scenario.len()],
            });
        }
        let count = scenario_labels.len();
        let mut split: Vec<(Vec<u8>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); count];
        for ((&y, &p), &s) in labels.iter().zip(scores).zip(scenario) {
            let s = s as usize;
            if s >= count {
                return Err(Error::ScenarioOutOfRange { id: s, count });
            }
            split[s].0.push(y);
            split[s].1.push(p);
        }
        let scenarios: Vec<ScenarioMetrics> = split
            .iter()
            .enumerate()
            .map(|(id, (y, p))| ScenarioMetrics {
                id,
                label: scenario_labels[id].clone(),
                metrics: MetricRow::compute(y, p),
            })
            .collect();
        let (mut num, mut den) = (0.0, 0usize);
        for s in &scenarios {
            if let Some(a) = s.metrics.auc {
                num += a * s.metrics.count as f64;
                den += s.metrics.count;
            }
        }
        Ok(Self {
            overall: MetricRow::compute(labels, scores),
            weighted_auc: (den > 0).then(|| num / den as f64),
            scenarios,
            overall_aggregation: "micro".into(),
        })
    }
}

/// Predicts `data` in chunks of `batch_size` rows.
pub fn predict_all<T: Scalar>(model: &Model<T>, data: &Batch, batch_size: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(data.len());
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(batch_size.max(1)) {
        out.extend(model.predict(&data.select(chunk))?);
    }
    Ok(out)
}

pub fn evaluate_per_scenario<T: Scalar>(model: &Model<T>, test: &Batch, batch_size: usize) -> Result<ScenarioReport> {
    if test.is_empty() {
        return Err(Error::Data("cannot evaluate an empty split".into()));
    }
    let scores = predict_all(model, test, batch_size)?;
    ScenarioReport::from_predictions(&test.label, &scores, &test.scenario, &model.space.scenario_labels)
}

/// Mean and sample (n-1) standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    /// `None` for an empty sample; the std of a single value is 0.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Some(Self { mean, std, n })
    }
}

/// Per-seed reports of one model folded into mean +- std.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedAggregate {
    pub seeds: Vec<u64>,
    pub overall_auc: Option<MeanStd>,
    pub overall_logloss: Option<MeanStd>,
    pub weighted_auc: Option<MeanStd>,
    pub scenario_auc: Vec<Option<MeanStd>>,
    pub scenario_logloss: Vec<Option<MeanStd>>,
}

impl SeedAggregate {
    /// Metrics missing in any seed are aggregated over the seeds that have them.
    pub fn from_reports(seeds: &[u64], reports: &[ScenarioReport]) -> Self {
        let collect = |f: &dyn Fn(&ScenarioReport) -> Option<f64>| -> Option<MeanStd> {
            MeanStd::of(&reports.iter().filter_map(f).collect::<Vec<_>>())
        };
        let count = reports.first().map_or(0, |r| r.scenarios.len());
        Self {
            seeds: seeds.to_vec(),
            overall_auc: collect(&|r| r.overall.auc),
            overall_logloss: collect(&|r| r.overall.logloss),
            weighted_auc: collect(&|r| r.weighted_auc),
            scenario_auc: (0..count).map(|s| collect(&|r| r.scenarios.get(s).and_then(|m| m.metrics.auc))).collect(),
            scenario_logloss: (0..count)
                .map(|s| collect(&|r| r.scenarios.get(s).and_then(|m| m.metrics.logloss)))
                .collect(),
        }
    }
}
