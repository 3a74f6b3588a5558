//! Model x seed run matrices, their summaries and the scenario-count sweep.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use swr::data::{top_k_scenarios, ProcessedDataset};
use swr::evaluation::{welch_ttest, MeanStd, ScenarioReport, SeedAggregate};
use swr::models::{ModelConfig, ModelKind};
use swr::training::{run_experiment, DataSource, RunConfig, RunStatus, TrainConfig};

use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED_COUNT: usize = 10;
pub const SWEEP_TOWERS: [usize; 2] = [64, 32];
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_TRACKED_CSV: &str = "sweep_tracked.csv";
pub const SWEEP_JSON: &str = "sweep.json";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchPlan {
    pub data: DataSource,
    pub top_k_scenarios: Option<usize>,
    pub split_seed: u64,
    pub models: Vec<ModelConfig>,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    pub out: PathBuf,
}

impl BenchPlan {
    pub fn run_dir(&self, kind: ModelKind, seed: u64) -> PathBuf {
        self.out.join(kind.as_str()).join(format!("seed-{seed}"))
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.models.is_empty() || self.seeds.is_empty() {
            return Err(CliError::Usage("a plan needs at least one model and one seed".into()));
        }
        let mut kinds: Vec<&str> = self.models.iter().map(|m| m.kind.as_str()).collect();
        kinds.sort_unstable();
        if kinds.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::Usage("each model kind may appear once per plan".into()));
        }
        for m in &self.models {
            m.validate()?;
        }
        self.train.validate()?;
        Ok(())
    }

    fn configs(&self) -> Vec<RunConfig> {
        let mut out = Vec::new();
        for m in &self.models {
            for &seed in &self.seeds {
                out.push(
                    RunConfig {
                        version: String::new(),
                        data: self.data.clone(),
                        top_k_scenarios: self.top_k_scenarios,
                        split_seed: self.split_seed,
                        model: m.clone(),
                        train: TrainConfig {
                            seed,
                            ..self.train.clone()
                        },
                    }
                    .resolved(),
                );
            }
        }
        out
    }
}

/// Outcome of one cell of the run matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResult {
    pub model: ModelKind,
    pub seed: u64,
    pub dir: PathBuf,
    pub status: RunStatus,
    pub param_count: Option<usize>,
    pub test: Option<ScenarioReport>,
    pub error: Option<String>,
}

impl RunResult {
    pub fn failed(&self) -> bool {
        self.status == RunStatus::Failed || self.test.is_none()
    }
}

/// Runs every (model, seed) cell, up to `jobs` at a time. Results come back
/// in plan order whatever the completion order.
pub fn run_matrix(plan: &BenchPlan, data: &ProcessedDataset, jobs: usize) -> CliResult<Vec<RunResult>> {
    plan.validate()?;
    std::fs::create_dir_all(&plan.out)?;
    let configs = plan.configs();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<RunResult>>> = Mutex::new(vec![None; configs.len()]);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, configs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(cfg) = configs.get(i) else { break };
                let res = run_one(plan, cfg, data);
                results.lock().expect("no poisoned runs")[i] = Some(res);
            });
        }
    });
    Ok(results.into_inner().expect("no poisoned runs").into_iter().map(|r| r.expect("every cell ran")).collect())
}

fn run_one(plan: &BenchPlan, cfg: &RunConfig, data: &ProcessedDataset) -> RunResult {
    let dir = plan.run_dir(cfg.model.kind, cfg.train.seed);
    log::info!("run {} seed {}", cfg.model.kind, cfg.train.seed);
    match run_experiment(cfg, data, &dir) {
        Ok(rec) => RunResult {
            model: cfg.model.kind,
            seed: cfg.train.seed,
            dir,
            status: rec.status,
            param_count: Some(rec.metrics.param_count),
            test: rec.metrics.test,
            error: rec.metrics.failure.map(|f| format!("epoch {} batch {}: {}", f.epoch, f.batch, f.message)),
        },
        Err(e) => {
            log::error!("run {} seed {} failed: {e}", cfg.model.kind, cfg.train.seed);
            RunResult {
                model: cfg.model.kind,
                seed: cfg.train.seed,
                dir,
                status: RunStatus::Failed,
                param_count: None,
                test: None,
                error: Some(e.to_string()),
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: ModelKind,
    pub runs: usize,
    pub failed: usize,
    pub param_count: Option<usize>,
    /// Per-seed overall test AUC of the successful runs, in seed order.
    pub seed_auc: Vec<f64>,
    pub aggregate: SeedAggregate,
    pub best: bool,
    pub second: bool,
    /// Welch test of this model's per-seed AUC against the best model's.
    pub welch_t: Option<f64>,
    pub welch_p: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchSummary {
    pub scenario_labels: Vec<String>,
    pub models: Vec<ModelSummary>,
    pub runs: Vec<RunResult>,
}

impl BenchSummary {
    pub fn failed(&self) -> usize {
        self.runs.iter().filter(|r| r.failed()).count()
    }

    pub fn get(&self, kind: ModelKind) -> Option<&ModelSummary> {
        self.models.iter().find(|m| m.model == kind)
    }
}

pub fn summarize(plan: &BenchPlan, scenario_labels: &[String], runs: Vec<RunResult>) -> BenchSummary {
    let mut models: Vec<ModelSummary> = plan
        .models
        .iter()
        .map(|m| {
            let mine: Vec<&RunResult> = runs.iter().filter(|r| r.model == m.kind).collect();
            let ok: Vec<&RunResult> = mine.iter().copied().filter(|r| !r.failed()).collect();
            let reports: Vec<ScenarioReport> = ok.iter().filter_map(|r| r.test.clone()).collect();
            let seeds: Vec<u64> = ok.iter().map(|r| r.seed).collect();
            ModelSummary {
                model: m.kind,
                runs: mine.len(),
                failed: mine.len() - ok.len(),
                param_count: mine.iter().find_map(|r| r.param_count),
                seed_auc: reports.iter().filter_map(|r| r.overall.auc).collect(),
                aggregate: SeedAggregate::from_reports(&seeds, &reports),
                best: false,
                second: false,
                welch_t: None,
                welch_p: None,
            }
        })
        .collect();
    let mut ranked: Vec<usize> = (0..models.len()).filter(|&i| models[i].aggregate.overall_auc.is_some()).collect();
    let mean = |i: usize| models[i].aggregate.overall_auc.map_or(f64::NEG_INFINITY, |m| m.mean);
    ranked.sort_by(|&a, &b| mean(b).total_cmp(&mean(a)).then(a.cmp(&b)));
    if let Some(&b) = ranked.first() {
        models[b].best = true;
        let best_auc = models[b].seed_auc.clone();
        for (i, m) in models.iter_mut().enumerate() {
            if i != b {
                if let Ok(w) = welch_ttest(&m.seed_auc, &best_auc) {
                    m.welch_t = Some(w.t);
                    m.welch_p = Some(w.p);
                }
            }
        }
    }
    if let Some(&s) = ranked.get(1) {
        models[s].second = true;
    }
    BenchSummary {
        scenario_labels: scenario_labels.to_vec(),
        models,
        runs,
    }
}

fn fmt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| format!("{v:.6}"))
}

fn fmt_ms(v: Option<MeanStd>) -> [String; 2] {
    [fmt(v.map(|m| m.mean)), fmt(v.map(|m| m.std))]
}

pub fn write_summary(summary: &BenchSummary, dir: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_path(dir.join(SUMMARY_CSV))?;
    let mut header: Vec<String> = [
        "model", "runs", "failed", "params", "auc_mean", "auc_std", "logloss_mean", "logloss_std", "weighted_auc_mean",
    ]
    .map(String::from)
    .to_vec();
    for s in 0..summary.scenario_labels.len() {
        header.extend([format!("s{s}_auc_mean"), format!("s{s}_auc_std"), format!("s{s}_logloss_mean")]);
    }
    header.extend(["best", "second", "welch_t_vs_best", "welch_p_vs_best"].map(String::from));
    w.write_record(&header)?;
    for m in &summary.models {
        let a = &m.aggregate;
        let mut row = vec![
            m.model.to_string(),
            m.runs.to_string(),
            m.failed.to_string(),
            m.param_count.map_or(String::new(), |p| p.to_string()),
        ];
        row.extend(fmt_ms(a.overall_auc));
        row.extend(fmt_ms(a.overall_logloss));
        row.push(fmt(a.weighted_auc.map(|m| m.mean)));
        for s in 0..summary.scenario_labels.len() {
            row.extend(fmt_ms(a.scenario_auc.get(s).copied().flatten()));
            row.push(fmt(a.scenario_logloss.get(s).copied().flatten().map(|m| m.mean)));
        }
        row.push(u8::from(m.best).to_string());
        row.push(u8::from(m.second).to_string());
        row.push(fmt(m.welch_t));
        row.push(fmt(m.welch_p));
        w.write_record(&row)?;
    }
    w.flush()?;
    std::fs::write(dir.join(SUMMARY_JSON), serde_json::to_string_pretty(summary)? + "\n")?;
    Ok(())
}

/// Human-readable table of a summary.
pub fn render_summary(summary: &BenchSummary) -> String {
    let mut out = format!("{:<14} {:>6} {:>19} {:>19} {:>9}\n", "model", "runs", "auc", "logloss", "p vs best");
    for m in &summary.models {
        let ms = |v: Option<MeanStd>| v.map_or("-".to_string(), |v| format!("{:.4} +- {:.4}", v.mean, v.std));
        let mark = if m.best {
            " *"
        } else if m.second {
            " +"
        } else {
            ""
        };
        out.push_str(&format!(
            "{:<14} {:>6} {:>19} {:>19} {:>9}{mark}\n",
            m.model.as_str(),
            format!("{}/{}", m.runs - m.failed, m.runs),
            ms(m.aggregate.overall_auc),
            ms(m.aggregate.overall_logloss),
            m.welch_p.map_or("-".to_string(), |p| format!("{p:.4}")),
        ));
    }
    out
}

pub fn bench(plan: &BenchPlan, data: &ProcessedDataset, jobs: usize) -> CliResult<BenchSummary> {
    let runs = run_matrix(plan, data, jobs)?;
    let summary = summarize(plan, &data.space.scenario_labels, runs);
    std::fs::write(plan.out.join("plan.json"), serde_json::to_string_pretty(plan)? + "\n")?;
    write_summary(&summary, &plan.out)?;
    Ok(summary)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepPlan {
    pub data: DataSource,
    pub ks: Vec<usize>,
    pub kinds: Vec<ModelKind>,
    pub seeds: Vec<u64>,
    pub split_seed: u64,
    pub train: TrainConfig,
    pub embed_dim: usize,
    /// Scenario ranks (0 = largest) reported side by side for every k.
    pub track: Vec<usize>,
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub model: ModelKind,
    pub scenario: usize,
    pub label: String,
    pub test_count: usize,
    pub auc_mean: Option<f64>,
    pub auc_std: Option<f64>,
    pub logloss_mean: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub overall: Vec<(usize, ModelKind, Option<f64>)>,
    pub failed: usize,
    pub total: usize,
}

/// The sweep's model preset: defaults with the two-layer [64, 32] towers.
pub fn sweep_model(kind: ModelKind, embed_dim: usize) -> ModelConfig {
    let mut c = ModelConfig::with_defaults(kind);
    c.embed_dim = embed_dim;
    c.tower_dims = SWEEP_TOWERS.to_vec();
    c
}

pub fn sweep(plan: &SweepPlan, base: &ProcessedDataset, jobs: usize) -> CliResult<SweepTable> {
    let available = base.space.scenario_count();
    for &k in &plan.ks {
        if k < 2 || k > available {
            return Err(CliError::Usage(format!("k = {k} outside 2..={available} available scenarios")));
        }
    }
    let mut table = SweepTable {
        rows: Vec::new(),
        overall: Vec::new(),
        failed: 0,
        total: 0,
    };
    for &k in &plan.ks {
        let data = top_k_scenarios(base, k)?;
        let bp = BenchPlan {
            data: plan.data.clone(),
            top_k_scenarios: Some(k),
            split_seed: plan.split_seed,
            models: plan.kinds.iter().map(|&kind| sweep_model(kind, plan.embed_dim)).collect(),
            seeds: plan.seeds.clone(),
            train: plan.train.clone(),
            out: plan.out.join(format!("k-{k}")),
        };
        let summary = bench(&bp, &data, jobs)?;
        table.failed += summary.failed();
        table.total += summary.runs.len();
        for m in &summary.models {
            table.overall.push((k, m.model, m.aggregate.overall_auc.map(|v| v.mean)));
            let counts: Vec<usize> = summary
                .runs
                .iter()
                .find(|r| r.model == m.model && r.test.is_some())
                .and_then(|r| r.test.as_ref())
                .map(|t| t.scenarios.iter().map(|s| s.metrics.count).collect())
                .unwrap_or_else(|| vec![0; k]);
            for s in 0..k {
                let auc = m.aggregate.scenario_auc.get(s).copied().flatten();
                table.rows.push(SweepRow {
                    k,
                    model: m.model,
                    scenario: s,
                    label: data.space.scenario_labels[s].clone(),
                    test_count: counts[s],
                    auc_mean: auc.map(|v| v.mean),
                    auc_std: auc.map(|v| v.std),
                    logloss_mean: m.aggregate.scenario_logloss.get(s).copied().flatten().map(|v| v.mean),
                });
            }
        }
    }
    write_sweep(plan, &table)?;
    Ok(table)
}

fn write_sweep(plan: &SweepPlan, table: &SweepTable) -> CliResult<()> {
    let mut w = csv::Writer::from_path(plan.out.join(SWEEP_CSV))?;
    w.write_record(["k", "model", "scenario", "label", "test_count", "auc_mean", "auc_std", "logloss_mean"])?;
    for r in &table.rows {
        w.write_record([
            r.k.to_string(),
            r.model.to_string(),
            r.scenario.to_string(),
            r.label.clone(),
            r.test_count.to_string(),
            fmt(r.auc_mean),
            fmt(r.auc_std),
            fmt(r.logloss_mean),
        ])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(plan.out.join(SWEEP_TRACKED_CSV))?;
    let mut header = vec!["k".to_string(), "model".to_string(), "overall_auc".to_string()];
    header.extend(plan.track.iter().map(|s| format!("scenario_{s}_auc")));
    w.write_record(&header)?;
    for &(k, model, overall) in &table.overall {
        let mut row = vec![k.to_string(), model.to_string(), fmt(overall)];
        for &s in &plan.track {
            let v = table.rows.iter().find(|r| r.k == k && r.model == model && r.scenario == s).and_then(|r| r.auc_mean);
            row.push(fmt(v));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    std::fs::write(plan.out.join(SWEEP_JSON), serde_json::to_string_pretty(table)? + "\n")?;
    Ok(())
}
