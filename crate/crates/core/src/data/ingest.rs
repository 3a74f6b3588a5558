//! Raw files to encoded examples.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::data::manifest::{DatasetManifest, FeatureKind, Source, SourceFile, SplitRule};
use crate::data::{Batch, FeatureSpace, IngestReport, ProcessedDataset, SparseField};
use crate::error::{Error, Result};

/// First-appearance interning of raw strings; ids start at 1.
#[derive(Default)]
struct Interner {
    ids: HashMap<String, u32>,
    counts: Vec<u64>,
}

impl Interner {
    fn intern(&mut self, v: &str) -> u32 {
        if let Some(&id) = self.ids.get(v) {
            self.counts[id as usize - 1] += 1;
            return id;
        }
        self.counts.push(1);
        let id = self.counts.len() as u32;
        self.ids.insert(v.to_string(), id);
        id
    }

    /// Remap so that at most `cap - 1` values keep an index, most frequent
    /// first (ties by first appearance). Returns old id -> new id.
    fn capped_remap(&self, cap: usize) -> Vec<u32> {
        let mut order: Vec<usize> = (0..self.counts.len()).collect();
        order.sort_by(|&a, &b| self.counts[b].cmp(&self.counts[a]).then(a.cmp(&b)));
        let mut remap = vec![0u32; self.counts.len() + 1];
        let mut kept: Vec<usize> = order.into_iter().take(cap.saturating_sub(1)).collect();
        kept.sort_unstable();
        for (new, old) in kept.into_iter().enumerate() {
            remap[old + 1] = new as u32 + 1;
        }
        remap
    }
}

enum Slot {
    Sparse(usize),
    Bucket(usize, Vec<f64>),
    Dense(usize),
}

struct Encoder<'m> {
    manifest: &'m DatasetManifest,
    slots: Vec<(String, Slot)>,
    interners: Vec<Interner>,
    n_sparse: usize,
    out: Batch,
    fold: Vec<u8>,
    report: IngestReport,
    row_sparse: Vec<u32>,
    row_dense: Vec<f64>,
}

impl<'m> Encoder<'m> {
    fn new(manifest: &'m DatasetManifest) -> Self {
        let mut slots = Vec::new();
        let (mut ns, mut nd) = (0, 0);
        for f in &manifest.features {
            match (f.kind, &f.buckets) {
                (FeatureKind::Sparse, _) => {
                    slots.push((f.column().to_string(), Slot::Sparse(ns)));
                    ns += 1;
                }
                (FeatureKind::Dense, Some(b)) => {
                    slots.push((f.column().to_string(), Slot::Bucket(ns, b.clone())));
                    ns += 1;
                }
                (FeatureKind::Dense, None) => {
                    slots.push((f.column().to_string(), Slot::Dense(nd)));
                    nd += 1;
                }
                (FeatureKind::Scenario, _) => {}
            }
        }
        Self {
            manifest,
            slots,
            interners: (0..ns).map(|_| Interner::default()).collect(),
            n_sparse: ns,

            out: Batch::empty(ns, nd),
            fold: Vec::new(),
            report: IngestReport::default(),
            row_sparse: vec![0; ns],
            row_dense: vec![0.0; nd],
        }
    }

    /// Columns every source row must provide.
    fn required_columns(&self) -> Vec<String> {
        let m = self.manifest;
        let scen_col = m
            .features
            .iter()
            .find(|f| f.kind == FeatureKind::Scenario)
            .map(|f| f.column().to_string())
            .unwrap_or_else(|| m.scenario_feature.clone());
        let mut cols: Vec<String> = self.slots.iter().map(|(c, _)| c.clone()).collect();
        cols.push(scen_col);
        cols.push(m.label_rule.column().to_string());
        cols
    }

    /// `values` are aligned with [`Encoder::required_columns`].
    fn push(&mut self, values: &[&str], fold: Option<u8>) {
        self.report.rows_read += 1;
        let n = self.slots.len();
        let Some(&scenario) = self.manifest.scenario_map.get(values[n].trim()) else {
            self.report.dropped_unmapped_scenario += 1;
            return;
        };
        let Some(label) = self.manifest.label_rule.apply(values[n + 1]) else {
            self.report.unparseable += 1;
            return;
        };
        for (k, (_, slot)) in self.slots.iter().enumerate() {
            let raw = values[k].trim();
            match slot {
                Slot::Sparse(i) => self.row_sparse[*i] = self.interners[*i].intern(raw),
                Slot::Bucket(i, b) => match parse_finite(raw) {
                    Some(v) => self.row_sparse[*i] = 1 + b.iter().filter(|&&x| x <= v).count() as u32,
                    None => {
                        self.report.unparseable += 1;
                        return;
                    }
                },
                Slot::Dense(i) => match parse_finite(raw) {
                    Some(v) => self.row_dense[*i] = v,
                    None => {
                        self.report.unparseable += 1;
                        return;
                    }
                },
            }
        }
        self.out.sparse.extend_from_slice(&self.row_sparse);
        self.out.dense.extend_from_slice(&self.row_dense);
        self.out.scenario.push(scenario as u32);
        self.out.label.push(label);
        self.out.ids.push(self.out.ids.len());
        self.fold.push(fold.unwrap_or(0));
    }

    fn finish(mut self) -> Result<ProcessedDataset> {
        let m = self.manifest;
        let mut sparse_fields = Vec::with_capacity(self.n_sparse);
        for f in &m.features {
            let Some((_, slot)) = self.slots.iter().find(|(c, _)| c == f.column()) else {
                continue;
            };
            match slot {
                Slot::Sparse(i) => {
                    let inter = &self.interners[*i];
                    let distinct = inter.counts.len() + 1;
                    let vocab = match f.vocab_size {
                        Some(cap) if cap < distinct => {
                            let remap = inter.capped_remap(cap);
                            let ns = self.n_sparse;
                            for row in self.out.sparse.chunks_mut(ns) {
                                row[*i] = remap[row[*i] as usize];
                            }
                            cap
                        }
                        Some(cap) => cap,
                        None => distinct,
                    };
                    sparse_fields.push(SparseField {
                        name: f.name.clone(),
                        vocab,
                    });
                }
                Slot::Bucket(_, b) => sparse_fields.push(SparseField {
                    name: f.name.clone(),
                    vocab: b.len() + 2,
                }),
                Slot::Dense(_) => {}
            }
        }
        let dense: Vec<String> = m
            .features
            .iter()
            .filter(|f| f.kind == FeatureKind::Dense && f.buckets.is_none())
            .map(|f| f.name.clone())
            .collect();
        let mut labels = vec![String::new(); m.scenario_count()];
        for (raw, &id) in &m.scenario_map {
            if labels[id].is_empty() {
                labels[id] = raw.clone();
            } else {
                labels[id] = format!("{}|{raw}", labels[id]);
            }
        }
        self.report.kept = self.out.len();
        if self.out.is_empty() {
            let w = format!("dataset `{}` produced no examples", m.name);
            log::warn!("{w}");
            self.report.warnings.push(w);
        }
        if self.report.unparseable > 0 {
            let w = format!("skipped {} unparseable rows", self.report.unparseable);
            log::warn!("{w}");
            self.report.warnings.push(w);
        }
        let fold = (m.split == SplitRule::PredefinedFolds).then_some(self.fold);
        Ok(ProcessedDataset {
            name: m.name.clone(),
            space: FeatureSpace {
                sparse: sparse_fields,
                dense,
                scenario_name: m.scenario_feature.clone(),
                scenario_labels: labels,
                user_feature: m.user_feature.clone(),
                item_feature: m.item_feature.clone(),
            },
            examples: self.out,
            fold,
            report: self.report,
        })
    }
}

/// Parses raw files under `raw` according to `manifest` and encodes them.
pub fn ingest(manifest: &DatasetManifest, raw: &Path) -> Result<ProcessedDataset> {
    manifest.validate()?;
    if !raw.exists() {
        return Err(Error::Config(format!("raw path not found: {}", raw.display())));
    }
    let mut enc = Encoder::new(manifest);
    let required = enc.required_columns();
    match &manifest.source {
        Source::Movielens1m => read_movielens(raw, &required, &mut enc)?,
        Source::Delimited {
            files,
            delimiter,
            columns,
        } => {
            for f in files {
                read_delimited(raw, f, *delimiter, columns.as_deref(), &required, &mut enc)?;
            }
        }
        Source::JsonLines { files } => {
            for f in files {
                read_json_lines(raw, f, &required, &mut enc)?;
            }
        }
        Source::Mind { behaviors, news } => read_mind(raw, behaviors, news, &required, &mut enc)?,
    }
    enc.finish()
}

/// How one required column is filled for a source file.
enum Plan<'a> {
    Field { index: usize, prefix: Option<&'a str> },
    Constant(&'a str),
}

/// Resolves each required column to a header position or a file constant.
fn resolve<'a>(header: &[String], file: &'a SourceFile, required: &[String]) -> Result<Vec<Plan<'a>>> {
    required
        .iter()
        .map(|c| {
            if let Some(v) = file.constants.get(c) {
                return Ok(Plan::Constant(v.as_str()));
            }
            let raw = file.raw_column(c);
            match header.iter().position(|h| h.trim() == raw) {
                Some(index) => Ok(Plan::Field {
                    index,
                    prefix: file.prefix.get(c).map(String::as_str),
                }),
                None => Err(Error::MissingColumn(c.clone())),
            }
        })
        .collect()
}

fn push_resolved(enc: &mut Encoder, fields: &[&str], plan: &[Plan], fold: Option<u8>) {
    let mut values: Vec<std::borrow::Cow<str>> = Vec::with_capacity(plan.len());
    for p in plan {
        match p {
            Plan::Field { index, prefix } => match fields.get(*index) {
                Some(v) => values.push(match prefix {
                    Some(pre) => format!("{pre}{}", v.trim()).into(),
                    None => (*v).into(),
                }),
                None => {
                    enc.report.rows_read += 1;
                    enc.report.unparseable += 1;
                    return;
                }
            },
            Plan::Constant(c) => values.push((*c).into()),
        }
    }
    let refs: Vec<&str> = values.iter().map(|v| v.as_ref()).collect();
    enc.push(&refs, fold);
}

fn read_latin1(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    Ok(bytes.iter().map(|&b| b as char).collect())
}

const MOVIELENS_COLUMNS: [&str; 11] = [
    "user_id",
    "movie_id",
    "rating",
    "timestamp",
    "gender",
    "age",
    "occupation",
    "zip",
    "title",
    "genres",
    "genre",
];

fn read_movielens(raw: &Path, required: &[String], enc: &mut Encoder) -> Result<()> {
    let header: Vec<String> = MOVIELENS_COLUMNS.iter().map(|s| s.to_string()).collect();
    let no_constants = SourceFile::default();
    let plan = resolve(&header, &no_constants, required)?;
    let users_text = read_latin1(&raw.join("users.dat"))?;
    let mut users: HashMap<&str, [&str; 4]> = HashMap::new();
    for line in users_text.lines().filter(|l| !l.trim().is_empty()) {
        let p: Vec<&str> = line.split("::").collect();
        if p.len() == 5 {
            users.insert(p[0], [p[1], p[2], p[3], p[4]]);
        }
    }
    let movies_text = read_latin1(&raw.join("movies.dat"))?;
    let mut movies: HashMap<&str, (&str, &str)> = HashMap::new();
    for line in movies_text.lines().filter(|l| !l.trim().is_empty()) {
        let p: Vec<&str> = line.split("::").collect();
        if p.len() == 3 {
            movies.insert(p[0], (p[1], p[2]));
        }
    }
    let ratings = read_latin1(&raw.join("ratings.dat"))?;
    for line in ratings.lines().filter(|l| !l.trim().is_empty()) {
        let p: Vec<&str> = line.split("::").collect();
        let joined = (p.len() == 4)
            .then(|| Some((users.get(p[0])?, movies.get(p[1])?)))
            .flatten();
        let Some((u, (title, genres))) = joined else {
            enc.report.rows_read += 1;
            enc.report.unparseable += 1;
            continue;
        };
        let genre = genres.split('|').next().unwrap_or("");
        let fields = [p[0], p[1], p[2], p[3], u[0], u[1], u[2], u[3], title, genres, genre];
        push_resolved(enc, &fields, &plan, None);
    }
    Ok(())
}

fn read_delimited(
    raw: &Path,
    file: &SourceFile,
    delimiter: char,
    columns: Option<&[String]>,
    required: &[String],
    enc: &mut Encoder,
) -> Result<()> {
    let path = raw.join(&file.path);
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter as u8)
        .has_headers(columns.is_none())
        .flexible(true)
        .from_path(&path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = match columns {
        Some(c) => c.to_vec(),
        None => rdr.headers()?.iter().map(str::to_string).collect(),
    };
    if header.iter().all(|h| h.is_empty()) {
        let w = format!("{} is empty", path.display());
        log::warn!("{w}");
        enc.report.warnings.push(w);
        return Ok(());
    }
    let plan = resolve(&header, file, required)?;
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(true) => {
                let fields: Vec<&str> = record.iter().collect();
                push_resolved(enc, &fields, &plan, file.fold);
            }
            Ok(false) => break,
            Err(_) => {
                enc.report.rows_read += 1;
                enc.report.unparseable += 1;
            }
        }
    }
    Ok(())
}

fn json_scalar(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        serde_json::Value::Bool(b) => Some(u8::from(*b).to_string()),
        _ => None,
    }
}

fn read_json_lines(raw: &Path, file: &SourceFile, required: &[String], enc: &mut Encoder) -> Result<()> {
    let path = raw.join(&file.path);
    let reader = BufReader::new(std::fs::File::open(&path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?);
    let mut first = true;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let Ok(serde_json::Value::Object(obj)) = serde_json::from_str::<serde_json::Value>(&line) else {
            enc.report.rows_read += 1;
            enc.report.unparseable += 1;
            continue;
        };
        let mut values = Vec::with_capacity(required.len());
        let mut missing = None;
        for c in required {
            let found = file.constants.get(c).cloned().or_else(|| {
                let v = obj.get(file.raw_column(c)).and_then(json_scalar)?;
                Some(match file.prefix.get(c) {
                    Some(pre) => format!("{pre}{v}"),
                    None => v,
                })
            });
            match found {
                Some(v) => values.push(v),
                None => {
                    missing = Some(c.clone());
                    break;
                }
            }
        }
        if let Some(c) = missing {
            if first {
                return Err(Error::MissingColumn(c));
            }
            enc.report.rows_read += 1;
            enc.report.unparseable += 1;
            continue;
        }
        first = false;
        let refs: Vec<&str> = values.iter().map(String::as_str).collect();
        enc.push(&refs, file.fold);
    }
    Ok(())
}

const MIND_COLUMNS: [&str; 7] = ["impression_id", "user_id", "time", "news_id", "category", "subcategory", "click"];

fn read_mind(raw: &Path, behaviors: &[SourceFile], news: &[String], required: &[String], enc: &mut Encoder) -> Result<()> {
    let header: Vec<String> = MIND_COLUMNS.iter().map(|s| s.to_string()).collect();
    let mut meta: HashMap<String, (String, String)> = HashMap::new();
    for n in news {
        let text = std::fs::read_to_string(raw.join(n))?;
        for line in text.lines() {
            let p: Vec<&str> = line.split('\t').collect();
            if p.len() >= 3 {
                meta.entry(p[0].to_string()).or_insert_with(|| (p[1].to_string(), p[2].to_string()));
            }
        }
    }
    for file in behaviors {
        let plan = resolve(&header, file, required)?;
        let text = std::fs::read_to_string(raw.join(&file.path))?;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let p: Vec<&str> = line.split('\t').collect();
            if p.len() != 5 {
                enc.report.rows_read += 1;
                enc.report.unparseable += 1;
                continue;
            }
            for imp in p[4].split_whitespace() {
                let Some((nid, click)) = imp.rsplit_once('-') else {
                    enc.report.rows_read += 1;
                    enc.report.unparseable += 1;
                    continue;
                };
                let (cat, sub) = meta.get(nid).map_or(("", ""), |(c, s)| (c.as_str(), s.as_str()));
                let fields = [p[0], p[1], p[2], nid, cat, sub, click];
                push_resolved(enc, &fields, &plan, file.fold);
            }
        }
    }
    Ok(())
}

/// Quantile boundaries for bucketizing a dense column into `k` buckets.
pub fn quantile_buckets(values: &[f64], k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() || k < 2 {
        return Vec::new();
    }
    v.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = (1..k)
        .map(|q| v[(q * (v.len() - 1)) / k])
        .collect();
    out.dedup();
    out
}

fn parse_finite(raw: &str) -> Option<f64> {
    raw.parse::<f64>().ok().filter(|v| v.is_finite())
}
