use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Sparse,
    Dense,
    Scenario,
}

/// One declared input column.
///
/// `vocab_size` on a sparse feature caps the vocabulary: the most frequent
/// `vocab_size - 1` values keep their own index and the rest share index 0.
/// `buckets` on a dense feature turns it into a sparse bucket index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buckets: Option<Vec<f64>>,
    /// Raw column to read; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
}

impl FeatureSpec {
    pub fn column(&self) -> &str {
        self.column.as_deref().unwrap_or(&self.name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    /// `value > t` is positive.
    Threshold { column: String, t: f64 },
    /// Column already holds 0/1.
    Binary { column: String },
}

impl LabelRule {
    pub fn column(&self) -> &str {
        match self {
            LabelRule::Threshold { column, .. } | LabelRule::Binary { column } => column,
        }
    }

    pub fn apply(&self, raw: &str) -> Option<u8> {
        let v: f64 = raw.trim().parse().ok()?;
        match self {
            LabelRule::Threshold { t, .. } => Some(u8::from(v > *t)),
            LabelRule::Binary { .. } if v == 0.0 => Some(0),
            LabelRule::Binary { .. } if v == 1.0 => Some(1),
            LabelRule::Binary { .. } => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    #[default]
    #[serde(rename = "ratio_811")]
    Ratio811,
    /// Source files carry fold indices 0/1/2 for train/val/test.
    PredefinedFolds,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SourceFile {
    pub path: String,
    /// Extra columns with a fixed value for every row of this file.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub constants: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold: Option<u8>,
    /// Raw column name to the name the features refer to.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub rename: BTreeMap<String, String>,
    /// Prepended to every value of a column, keeping ids of different files apart.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub prefix: BTreeMap<String, String>,
}

impl SourceFile {
    /// Raw column holding the canonical column `name`.
    pub fn raw_column<'a>(&'a self, name: &'a str) -> &'a str {
        self.rename.iter().find(|(_, to)| to.as_str() == name).map_or(name, |(from, _)| from.as_str())
    }
}

/// Raw file layout. Paths are relative to the raw directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case")]
pub enum Source {
    /// `ratings.dat`, `users.dat`, `movies.dat` joined on user and movie id.
    Movielens1m,
    /// Headered delimited text (KuaiRand logs, processed Ali-CCP folds, Douban tables).
    Delimited {
        files: Vec<SourceFile>,
        #[serde(default = "default_delimiter")]
        delimiter: char,
        /// Column names when the files have no header row.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        columns: Option<Vec<String>>,
    },
    /// One JSON object per line (Amazon review dumps).
    JsonLines { files: Vec<SourceFile> },
    /// MIND `behaviors.tsv` impressions joined with `news.tsv`.
    Mind {
        behaviors: Vec<SourceFile>,
        news: Vec<String>,
    },
}

fn default_delimiter() -> char {
    ','
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub source: Source,
    pub features: Vec<FeatureSpec>,
    pub label_rule: LabelRule,
    pub scenario_feature: String,
    /// Raw scenario value to scenario id; ids must be exactly `0..S`.
    pub scenario_map: BTreeMap<String, usize>,
    #[serde(default)]
    pub split: SplitRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_feature: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_feature: Option<String>,
}

impl DatasetManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn scenario_count(&self) -> usize {
        self.scenario_map.values().max().map_or(0, |m| m + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let scen: Vec<_> = self.features.iter().filter(|f| f.kind == FeatureKind::Scenario).collect();
        if scen.len() != 1 {
            return Err(Error::Config(format!(
                "exactly one scenario feature required, found {}",
                scen.len()
            )));
        }
        if scen[0].name != self.scenario_feature {
            return Err(Error::Config(format!(
                "scenario_feature `{}` does not match the scenario-kind feature `{}`",
                self.scenario_feature, scen[0].name
            )));
        }
        let s = self.scenario_count();
        let mut used = vec![false; s];
        for &id in self.scenario_map.values() {
            used[id] = true;
        }
        if s < 2 || used.iter().any(|u| !u) {
            return Err(Error::Config(format!(
                "scenario ids must be contiguous 0..S with S >= 2 (got ids {:?})",
                self.scenario_map.values().collect::<Vec<_>>()
            )));
        }
        let mut names = std::collections::HashSet::new();
        for f in &self.features {
            if !names.insert(f.name.as_str()) {
                return Err(Error::Config(format!("duplicate feature `{}`", f.name)));
            }
            if let Some(b) = &f.buckets {
                if f.kind != FeatureKind::Dense {
                    return Err(Error::Config(format!("buckets on non-dense feature `{}`", f.name)));
                }
                if b.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Config(format!("buckets of `{}` must be strictly ascending", f.name)));
                }
            }
            if f.vocab_size == Some(0) {
                return Err(Error::Config(format!("vocab_size of `{}` must be positive", f.name)));
            }
        }
        for key in [&self.user_feature, &self.item_feature].into_iter().flatten() {
            let ok = self
                .features
                .iter()
                .any(|f| &f.name == key && f.kind == FeatureKind::Sparse && f.buckets.is_none());
            if !ok {
                return Err(Error::Config(format!("`{key}` must name a sparse feature")));
            }
        }
        Ok(())
    }
}

/// Manifests shipped with the crate for the public datasets.
pub const BUNDLED: [(&str, &str); 6] = [
    ("movielens", include_str!("../../manifests/movielens.json")),
    ("kuairand", include_str!("../../manifests/kuairand.json")),
    ("aliccp", include_str!("../../manifests/aliccp.json")),
    ("amazon", include_str!("../../manifests/amazon.json")),
    ("douban", include_str!("../../manifests/douban.json")),
    ("mind", include_str!("../../manifests/mind.json")),
];

pub fn bundled(name: &str) -> Option<DatasetManifest> {
    let (_, text) = BUNDLED.iter().find(|(n, _)| *n == name)?;
    Some(DatasetManifest::from_json(text).expect("bundled manifests are valid"))
}
