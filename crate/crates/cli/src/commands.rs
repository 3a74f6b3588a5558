use std::path::Path;

use swr::data::manifest::{bundled, DatasetManifest};
use swr::data::{
    coefficient_of_variation, gen_synthetic, ingest, scenario_stats, top_k_scenarios, write_processed, DatasetStats, ProcessedDataset,
    ScenarioStats, SyntheticSpec,
};
use swr::evaluation::{profile, ScenarioReport};
use swr::models::{build_model, Model, ModelConfig, ModelKind};
use swr::numeric::Dtype;
use swr::training::run::{read_metrics, METRICS_FILE};
use swr::training::{evaluate_run, load_dataset, run_experiment, DataSource, RunConfig, RunRecord, TrainConfig, DEFAULT_SEED, SYNTHETIC_SEED_OFFSET};

use crate::bench::{bench, render_summary, sweep, BenchPlan, BenchSummary, SweepPlan, SweepTable};
use crate::cli::{AnalyzeArgs, BenchArgs, Cli, Command, DataArgs, Precision, PrepareArgs, SweepArgs, SynthArgs, SynthSpecArgs, TrainArgs, TrainOverrides};
use crate::error::{CliError, CliResult};
use crate::paths;

pub fn load_manifest(name_or_path: &str) -> CliResult<DatasetManifest> {
    if let Some(m) = bundled(name_or_path) {
        return Ok(m);
    }
    let path = Path::new(name_or_path);
    if !path.exists() {
        return Err(CliError::Usage(format!("manifest `{name_or_path}` is neither a file nor a bundled name")));
    }
    DatasetManifest::load(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Ingests, optionally keeps the k largest scenarios, and writes the processed dataset.
pub fn prepare(manifest: &DatasetManifest, raw: &Path, out: &Path, top_k: Option<usize>, split_seed: u64) -> CliResult<(ProcessedDataset, DatasetStats)> {
    if !raw.is_dir() {
        return Err(CliError::Usage(format!("raw path not found: {}", raw.display())));
    }
    let mut ds = ingest(manifest, raw)?;
    if let Some(k) = top_k {
        ds = top_k_scenarios(&ds, k)?;
    }
    let stats = write_processed(&ds, out, split_seed)?;
    Ok((ds, stats))
}

pub fn render_stats(labels: &[String], st: &ScenarioStats) -> String {
    let mut out = format!("{:<10} {:<16} {:>12} {:>10} {:>10} {:>8}\n", "scenario", "label", "interactions", "users", "items", "ctr");
    for (s, &n) in st.interactions.iter().enumerate() {
        let opt = |v: &Option<Vec<usize>>| v.as_ref().map_or("-".to_string(), |v| v[s].to_string());
        out.push_str(&format!(
            "{:<10} {:<16} {:>12} {:>10} {:>10} {:>8.4}\n",
            format!("S-{s}"),
            labels.get(s).map_or("", String::as_str),
            n,
            opt(&st.users),
            opt(&st.items),
            st.positive_rate[s]
        ));
    }
    out.push_str(&format!("COV {:.4}\n", st.cov));
    for i in &st.intersections {
        out.push_str(&format!(
            "S-{} & S-{}: users {} items {}\n",
            i.a,
            i.b,
            i.users.map_or("-".to_string(), |u| u.to_string()),
            i.items.map_or("-".to_string(), |u| u.to_string())
        ));
    }
    out
}

pub fn synthetic_spec(a: &SynthSpecArgs) -> SyntheticSpec {
    match a.ratio {
        Some(r) => SyntheticSpec::geometric(a.scenarios, r, a.ctr),
        None => SyntheticSpec::uniform(a.scenarios, a.ctr),
    }
}

/// Synthetic data is tied to the base seed, not to each run's seed, so
/// every run of a plan sees the same examples.
pub fn synthetic_source(a: &SynthSpecArgs, base_seed: u64) -> DataSource {
    DataSource::Synthetic {
        scenarios: a.scenarios,
        rows: a.rows,
        seed: Some(base_seed.wrapping_add(SYNTHETIC_SEED_OFFSET)),
        spec: Some(synthetic_spec(a)),
    }
}

fn data_source(a: &DataArgs, base_seed: u64) -> CliResult<DataSource> {
    if a.synthetic {
        return Ok(synthetic_source(&a.synth, base_seed));
    }
    let Some(p) = &a.data else {
        return Err(CliError::Usage("give --data DIR or --synthetic".into()));
    };
    let p = paths::resolve(p);
    if !p.exists() {
        return Err(CliError::Usage(format!("data directory not found: {}", p.display())));
    }
    Ok(DataSource::Processed {
        path: paths::absolute(&p).display().to_string(),
    })
}

pub fn parse_kinds(list: &str) -> CliResult<Vec<ModelKind>> {
    if list.trim() == "all" {
        return Ok(ModelKind::ALL.to_vec());
    }
    list.split(',').map(|s| Ok(s.trim().parse::<ModelKind>()?)).collect()
}

fn apply_overrides(mut t: TrainConfig, o: &TrainOverrides, precision: Option<Precision>) -> TrainConfig {
    if let Some(v) = o.epochs {
        t.max_epochs = v;
    }
    if let Some(v) = o.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = o.lr {
        t.lr = v;
    }
    if let Some(v) = o.patience {
        t.early_stop_patience = v;
    }
    if let Some(p) = precision {
        t.precision = dtype(p);
    }
    t
}

fn dtype(p: Precision) -> Dtype {
    match p {
        Precision::F32 => Dtype::F32,
        Precision::F64 => Dtype::F64,
    }
}

fn seeds(base: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| base + i).collect()
}

pub fn read_run_config(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    RunConfig::from_json(&value).map_err(|e| match e {
        swr::Error::Json(j) => CliError::Usage(format!("{}: {j}", path.display())),
        other => other.into(),
    })
}

/// Resolves data paths and global flags, then trains.
pub fn train(mut cfg: RunConfig, seed: Option<u64>, precision: Option<Precision>, out: &Path) -> CliResult<RunRecord> {
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    if let Some(p) = precision {
        cfg.train.precision = dtype(p);
    }
    if let DataSource::Processed { path } = &mut cfg.data {
        let p = paths::resolve(Path::new(path));
        if !p.exists() {
            return Err(CliError::Usage(format!("data directory not found: {}", p.display())));
        }
        *path = paths::absolute(&p).display().to_string();
    }
    let data = load_dataset(&cfg)?;
    Ok(run_experiment(&cfg, &data, out)?)
}

/// Re-evaluates the checkpoint and stores the report in `metrics.json`.
pub fn evaluate(run: &Path) -> CliResult<ScenarioReport> {
    let report = evaluate_run(run, None)?;
    let mut metrics = read_metrics(run)?;
    metrics.test = Some(report.clone());
    std::fs::write(run.join(METRICS_FILE), serde_json::to_string_pretty(&metrics)? + "\n")?;
    Ok(report)
}

pub fn bench_plan(args: &BenchArgs, seed: u64, precision: Option<Precision>) -> CliResult<BenchPlan> {
    let kinds = parse_kinds(&args.models)?;
    let models = kinds
        .into_iter()
        .map(|k| {
            let mut c = ModelConfig::with_defaults(k);
            if let Some(d) = args.train.embed_dim {
                c.embed_dim = d;
            }
            if let Some(t) = &args.towers {
                c.tower_dims = t.clone();
            }
            c
        })
        .collect();
    Ok(BenchPlan {
        data: data_source(&args.data, seed)?,
        top_k_scenarios: args.top_k,
        split_seed: args.data.split_seed,
        models,
        seeds: seeds(seed, args.seeds),
        train: apply_overrides(TrainConfig::default(), &args.train, precision),
        out: args.out.clone(),
    })
}

pub fn plan_data(data: &DataSource, top_k: Option<usize>, split_seed: u64) -> CliResult<ProcessedDataset> {
    let probe = RunConfig {
        version: String::new(),
        data: data.clone(),
        top_k_scenarios: top_k,
        split_seed,
        model: ModelConfig::with_defaults(ModelKind::SingleTower),
        train: TrainConfig::default(),
    };
    Ok(load_dataset(&probe)?)
}

/// Per-model timing on seed `seed`, written next to the summary.
pub fn profile_models(plan: &BenchPlan, data: &ProcessedDataset, seed: u64) -> CliResult<()> {
    let splits = swr::data::prepare_splits(data, plan.split_seed)?;
    let mut w = csv::Writer::from_path(plan.out.join("efficiency.csv"))?;
    w.write_record(["model", "params", "train_seconds_per_epoch", "infer_ms_per_batch"])?;
    for m in &plan.models {
        let mut model: Model<f32> = build_model(m, &data.space, data.space.scenario_count(), seed)?;
        let r = profile(&mut model, &splits, &plan.train, 1)?;
        w.write_record([
            m.kind.to_string(),
            r.param_count.to_string(),
            format!("{:.3}", r.train_seconds_per_epoch),
            format!("{:.3}", r.infer_ms_per_batch),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn sweep_plan(args: &SweepArgs, seed: u64, precision: Option<Precision>) -> CliResult<SweepPlan> {
    Ok(SweepPlan {
        data: data_source(&args.data, seed)?,
        ks: args.k.clone(),
        kinds: parse_kinds(&args.models)?,
        seeds: seeds(seed, args.seeds),
        split_seed: args.data.split_seed,
        train: apply_overrides(TrainConfig::default(), &args.train, precision),
        embed_dim: args.train.embed_dim.unwrap_or(ModelConfig::with_defaults(ModelKind::SingleTower).embed_dim),
        track: args.track.clone(),
        out: args.out.clone(),
    })
}

fn check_partial(failed: usize, total: usize) -> CliResult<()> {
    if failed > 0 {
        return Err(CliError::Partial { failed, total });
    }
    Ok(())
}

fn print_sweep(t: &SweepTable) {
    println!("{:>3} {:<14} {:>8} {:<12} {:>8}", "k", "model", "scenario", "label", "auc");
    for r in &t.rows {
        println!(
            "{:>3} {:<14} {:>8} {:<12} {:>8}",
            r.k,
            r.model.as_str(),
            r.scenario,
            r.label,
            r.auc_mean.map_or("-".into(), |a| format!("{a:.4}"))
        );
    }
}

fn print_bench(s: &BenchSummary) {
    print!("{}", render_summary(s));
}

pub fn run(cli: Cli) -> CliResult<()> {
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    match cli.command {
        Command::Prepare(PrepareArgs {
            manifest,
            raw,
            out,
            top_k,
            split_seed,
        }) => {
            let m = load_manifest(&manifest)?;
            let raw = paths::resolve(&raw);
            let (ds, stats) = prepare(&m, &raw, &out, top_k, split_seed)?;
            for w in &ds.report.warnings {
                log::warn!("{w}");
            }
            println!("{}: {} examples, {} dropped (unmapped scenario), {} unparseable", ds.name, ds.len(), ds.report.dropped_unmapped_scenario, ds.report.unparseable);
            print!("{}", render_stats(&ds.space.scenario_labels, &stats.scenarios));
        }
        Command::Analyze(AnalyzeArgs { data, counts, json }) => match (data, counts) {
            (_, Some(c)) => {
                let cov = coefficient_of_variation(&c);
                if json {
                    println!("{}", serde_json::json!({ "counts": c, "cov": cov }));
                } else {
                    println!("COV {cov:.4}");
                }
            }
            (Some(d), None) => {
                let ds = swr::data::read_processed(&paths::resolve(&d))?;
                let st = scenario_stats(&ds);
                if json {
                    println!("{}", serde_json::to_string_pretty(&st)?);
                } else {
                    print!("{}", render_stats(&ds.space.scenario_labels, &st));
                }
            }
            (None, None) => return Err(CliError::Usage("give --data DIR or --counts".into())),
        },
        Command::Synth(SynthArgs { spec, out }) => {
            let ds = gen_synthetic(&synthetic_spec(&spec), spec.rows, seed.wrapping_add(SYNTHETIC_SEED_OFFSET))?;
            let stats = write_processed(&ds, &out, DEFAULT_SEED)?;
            print!("{}", render_stats(&ds.space.scenario_labels, &stats.scenarios));
        }
        Command::Train(TrainArgs { config, out }) => {
            let cfg = read_run_config(&config)?;
            let rec = train(cfg, cli.seed, cli.precision, &out)?;
            let auc = rec.metrics.test.as_ref().and_then(|t| t.overall.auc);
            println!(
                "{} after {} epochs; best epoch {:?}; test auc {}",
                rec.status.as_str(),
                rec.epochs.len(),
                rec.metrics.best_epoch,
                auc.map_or("-".into(), |a| format!("{a:.4}"))
            );
            if rec.status == swr::training::RunStatus::Failed {
                return Err(CliError::Core(swr::Error::Data(
                    rec.metrics.failure.map_or("training failed".into(), |f| f.message),
                )));
            }
        }
        Command::Evaluate(a) => {
            let r = evaluate(&a.run)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
        }
        Command::Bench(a) => {
            let plan = bench_plan(&a, seed, cli.precision)?;
            let data = plan_data(&plan.data, plan.top_k_scenarios, plan.split_seed)?;
            let summary = bench(&plan, &data, cli.jobs)?;
            if a.profile {
                profile_models(&plan, &data, seed)?;
            }
            print_bench(&summary);
            check_partial(summary.failed(), summary.runs.len())?;
        }
        Command::Sweep(a) => {
            let plan = sweep_plan(&a, seed, cli.precision)?;
            let data = plan_data(&plan.data, None, plan.split_seed)?;
            let table = sweep(&plan, &data, cli.jobs)?;
            print_sweep(&table);
            check_partial(table.failed, table.total)?;
        }
    }
    Ok(())
}
