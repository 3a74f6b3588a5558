//! Processed dataset directory: `data.csv` plus `stats.json`.

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::data::{prepare_splits, scenario_stats, Batch, FeatureSpace, IngestReport, ProcessedDataset, ScenarioStats};
use crate::error::{Error, Result};

pub const DATA_FILE: &str = "data.csv";
pub const STATS_FILE: &str = "stats.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub name: String,
    pub rows: usize,
    pub vocab_sizes: IndexMap<String, usize>,
    /// Training-split ranges for `split_seed`.
    pub dense: Vec<DenseRange>,
    pub split_seed: u64,
    pub has_fold: bool,
    pub space: FeatureSpace,
    pub scenarios: ScenarioStats,
    pub ingest: IngestReport,
}

pub fn dataset_stats(ds: &ProcessedDataset, split_seed: u64) -> Result<DatasetStats> {
    let dense = if ds.is_empty() || ds.space.dense.is_empty() {
        Vec::new()
    } else {
        let s = prepare_splits(ds, split_seed)?.dense_stats;
        s.names
            .iter()
            .zip(s.min.iter().zip(&s.max))
            .map(|(n, (&min, &max))| DenseRange {
                name: n.clone(),
                min,
                max,
            })
            .collect()
    };
    Ok(DatasetStats {
        name: ds.name.clone(),
        rows: ds.len(),
        vocab_sizes: ds.space.sparse.iter().map(|f| (f.name.clone(), f.vocab)).collect(),
        dense,
        split_seed,
        has_fold: ds.fold.is_some(),
        space: ds.space.clone(),
        scenarios: scenario_stats(ds),
        ingest: ds.report.clone(),
    })
}

pub fn write_processed(ds: &ProcessedDataset, dir: &Path, split_seed: u64) -> Result<DatasetStats> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join(DATA_FILE))?;
    let mut header: Vec<String> = ds.space.sparse.iter().map(|f| f.name.clone()).collect();
    header.extend(ds.space.dense.iter().cloned());
    header.push("scenario".into());
    header.push("label".into());
    if ds.fold.is_some() {
        header.push("fold".into());
    }
    w.write_record(&header)?;
    let ex = &ds.examples;
    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for i in 0..ex.len() {
        rec.clear();
        rec.extend(ex.sparse_row(i).iter().map(u32::to_string));
        rec.extend(ex.dense_row(i).iter().map(f64::to_string));
        rec.push(ex.scenario[i].to_string());
        rec.push(ex.label[i].to_string());
        if let Some(f) = &ds.fold {
            rec.push(f[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    let stats = dataset_stats(ds, split_seed)?;
    std::fs::write(dir.join(STATS_FILE), serde_json::to_string_pretty(&stats)? + "\n")?;
    Ok(stats)
}

pub fn read_stats(dir: &Path) -> Result<DatasetStats> {
    let path = dir.join(STATS_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_processed(dir: &Path) -> Result<ProcessedDataset> {
    let stats = read_stats(dir)?;
    let space = stats.space.clone();
    let (ns, nd) = (space.sparse.len(), space.dense.len());
    let mut rdr = csv::Reader::from_path(dir.join(DATA_FILE))?;
    let width = ns + nd + 2 + usize::from(stats.has_fold);
    if rdr.headers()?.len() != width {
        return Err(Error::Data(format!(
            "{} has {} columns, stats declare {width}",
            DATA_FILE,
            rdr.headers()?.len()
        )));
    }
    let mut ex = Batch::empty(ns, nd);
    let mut fold = Vec::new();
    let s_count = space.scenario_count();
    let bad = |line: usize, what: &str| Error::Data(format!("{DATA_FILE} row {line}: bad {what}"));
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (j, f) in space.sparse.iter().enumerate() {
            let v: u32 = rec[j].parse().map_err(|_| bad(line, &f.name))?;
            if v as usize >= f.vocab {
                return Err(Error::IndexOutOfRange {
                    feature: f.name.clone(),
                    index: v as usize,
                    vocab: f.vocab,
                });
            }
            ex.sparse.push(v);
        }
        for j in 0..nd {
            let v: f64 = rec[ns + j].parse().map_err(|_| bad(line, &space.dense[j]))?;
            ex.dense.push(v);
        }
        let s: u32 = rec[ns + nd].parse().map_err(|_| bad(line, "scenario"))?;
        if s as usize >= s_count {
            return Err(Error::ScenarioOutOfRange {
                id: s as usize,
                count: s_count,
            });
        }
        let y: u8 = rec[ns + nd + 1].parse().map_err(|_| bad(line, "label"))?;
        if y > 1 {
            return Err(bad(line, "label"));
        }
        ex.scenario.push(s);
        ex.label.push(y);
        ex.ids.push(line);
        if stats.has_fold {
            fold.push(rec[ns + nd + 2].parse().map_err(|_| bad(line, "fold"))?);
        }
    }
    if ex.len() != stats.rows {
        return Err(Error::Data(format!("{DATA_FILE} has {} rows, stats declare {}", ex.len(), stats.rows)));
    }
    Ok(ProcessedDataset {
        name: stats.name,
        space,
        examples: ex,
        fold: stats.has_fold.then_some(fold),
        report: stats.ingest,
    })
}

/// Keeps only the `k` largest scenarios (by interaction count, ties to the
/// lower id) and renumbers them `0..k` in decreasing size.
pub fn top_k_scenarios(ds: &ProcessedDataset, k: usize) -> Result<ProcessedDataset> {
    let counts = ds.scenario_counts();
    if k < 2 || k > counts.len() {
        return Err(Error::Config(format!(
            "cannot keep {k} scenarios out of {} (need 2 <= k <= available)",
            counts.len()
        )));
    }
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    let mut remap = vec![None; counts.len()];
    for (new, &old) in order.iter().take(k).enumerate() {
        remap[old] = Some(new as u32);
    }
    let mut ex = Batch::empty(ds.examples.n_sparse, ds.examples.n_dense);
    let mut fold = ds.fold.as_ref().map(|_| Vec::new());
    for i in 0..ds.len() {
        if let Some(new) = remap[ds.examples.scenario[i] as usize] {
            ex.push_from(&ds.examples, i);
            *ex.scenario.last_mut().expect("just pushed") = new;
            *ex.ids.last_mut().expect("just pushed") = ex.ids.len() - 1;
            if let (Some(f), Some(src)) = (fold.as_mut(), ds.fold.as_ref()) {
                f.push(src[i]);
            }
        }
    }
    let mut space = ds.space.clone();
    space.scenario_labels = order.iter().take(k).map(|&o| ds.space.scenario_labels[o].clone()).collect();
    Ok(ProcessedDataset {
        name: format!("{}-top{k}", ds.name),
        space,
        examples: ex,
        fold,
        report: ds.report.clone(),
    })
}
