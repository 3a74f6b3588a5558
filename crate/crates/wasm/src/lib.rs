//! Three small entry points for the static demo page in `www/`. Each takes
//! plain numbers and returns a JSON string.

use serde::Serialize;
use swr::data::{coefficient_of_variation, gen_synthetic, prepare_splits, SyntheticSpec};
use swr::evaluation::{evaluate_per_scenario, ScenarioReport};
use swr::models::blocks::{binarization_factor, fusion_factor};
use swr::models::{build_model, Model, ModelConfig, ModelKind};
use swr::training::{train, TrainConfig};
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct CovReport {
    counts: Vec<f64>,
    mean: f64,
    cov: f64,
}

pub fn cov_report(counts: &str) -> Result<String, String> {
    let counts: Vec<f64> = counts
        .split([',', ' ', '\n', '\t'])
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().replace('_', "").parse::<f64>().map_err(|_| format!("not a number: `{s}`")))
        .collect::<Result<_, _>>()?;
    if counts.len() < 2 {
        return Err("need at least two scenario counts".into());
    }
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    let cov = coefficient_of_variation(&counts);
    serde_json::to_string(&CovReport { counts, mean, cov }).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Curves {
    x: Vec<f64>,
    scaling: Vec<f64>,
    binarization: Vec<f64>,
    fusion: Vec<f64>,
}

/// Pruning factors of AdaSparse over logits in [-6, 6]. `fusion` varies both
/// logits together.
pub fn factor_curves(alpha: f64, beta: f64, points: usize) -> Result<String, String> {
    if alpha.is_nan() || beta.is_nan() || alpha <= 0.0 || beta < 1.0 {
        return Err("alpha must be > 0 and beta >= 1".into());
    }
    let points = points.clamp(2, 2000);
    let x: Vec<f64> = (0..points).map(|i| -6.0 + 12.0 * i as f64 / (points - 1) as f64).collect();
    let c = Curves {
        scaling: x.iter().map(|&v| 2.0 * alpha * swr::numeric::sigmoid(v)).collect(),
        binarization: x.iter().map(|&v| binarization_factor(v, beta)).collect(),
        fusion: x.iter().map(|&v| fusion_factor(v, v, alpha, beta)).collect(),
        x,
    };
    serde_json::to_string(&c).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct EpochPoint {
    epoch: usize,
    train_loss: f64,
    val_auc: Option<f64>,
}

#[derive(Serialize)]
struct TrainReport {
    model: String,
    params: usize,
    epochs: Vec<EpochPoint>,
    best_epoch: Option<usize>,
    test: ScenarioReport,
}

/// Trains a small model on generated data whose scenario-specific effect
/// flips sign across scenarios.
pub fn train_report(kind: &str, scenarios: usize, rows: usize, epochs: usize, seed: u64) -> Result<String, String> {
    let kind: ModelKind = kind.parse().map_err(|e: swr::Error| e.to_string())?;
    if !(2..=8).contains(&scenarios) || !(500..=50_000).contains(&rows) || !(1..=20).contains(&epochs) {
        return Err("keep 2-8 scenarios, 500-50000 rows and 1-20 epochs".into());
    }
    let ds = gen_synthetic(&SyntheticSpec::uniform(scenarios, 0.3), rows, seed).map_err(|e| e.to_string())?;
    let splits = prepare_splits(&ds, 42).map_err(|e| e.to_string())?;
    let mut mc = ModelConfig::with_defaults(kind);
    mc.embed_dim = 8;
    mc.tower_dims = vec![64, 32];
    let mut model: Model<f32> = build_model(&mc, &ds.space, scenarios, seed).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        lr: 3e-3,
        batch_size: 256,
        max_epochs: epochs,
        early_stop_patience: epochs.max(1),
        seed,
        ..TrainConfig::default()
    };
    let out = train(&mut model, &splits, &cfg, |_, _, _| Ok(())).map_err(|e| e.to_string())?;
    let test = evaluate_per_scenario(&model, &splits.test, 4096).map_err(|e| e.to_string())?;
    let report = TrainReport {
        model: kind.to_string(),
        params: model.param_count(),
        epochs: out
            .epochs
            .iter()
            .map(|e| EpochPoint {
                epoch: e.epoch,
                train_loss: e.train_loss,
                val_auc: e.val_auc,
            })
            .collect(),
        best_epoch: out.best_epoch,
        test,
    };
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn scenario_cov(counts: &str) -> Result<String, JsValue> {
    cov_report(counts).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn adasparse_curves(alpha: f64, beta: f64, points: usize) -> Result<String, JsValue> {
    factor_curves(alpha, beta, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn train_synthetic(kind: &str, scenarios: usize, rows: usize, epochs: usize, seed: u32) -> Result<String, JsValue> {
    train_report(kind, scenarios, rows, epochs, u64::from(seed)).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn model_kinds() -> String {
    ModelKind::names().join(",")
}
