use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    SingleTower,
    SharedBottom,
    Mmoe,
    Ple,
    Star,
    SarNet,
    M2m,
    Adasparse,
    Adl,
    Epnet,
    Ppnet,
    Hamur,
    M3oe,
}

impl ModelKind {
    pub const ALL: [ModelKind; 13] = [
        ModelKind::SingleTower,
        ModelKind::SharedBottom,
        ModelKind::Mmoe,
        ModelKind::Ple,
        ModelKind::Star,
        ModelKind::SarNet,
        ModelKind::M2m,
        ModelKind::Adasparse,
        ModelKind::Adl,
        ModelKind::Epnet,
        ModelKind::Ppnet,
        ModelKind::Hamur,
        ModelKind::M3oe,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::SingleTower => "single_tower",
            ModelKind::SharedBottom => "shared_bottom",
            ModelKind::Mmoe => "mmoe",
            ModelKind::Ple => "ple",
            ModelKind::Star => "star",
            ModelKind::SarNet => "sar_net",
            ModelKind::M2m => "m2m",
            ModelKind::Adasparse => "adasparse",
            ModelKind::Adl => "adl",
            ModelKind::Epnet => "epnet",
            ModelKind::Ppnet => "ppnet",
            ModelKind::Hamur => "hamur",
            ModelKind::M3oe => "m3oe",
        }
    }

    pub fn names() -> Vec<&'static str> {
        Self::ALL.iter().map(|k| k.as_str()).collect()
    }

    /// Kind-specific fields this kind needs; every other optional field must be absent.
    pub fn required_fields(self) -> &'static [&'static str] {
        match self {
            ModelKind::SingleTower => &[],
            ModelKind::SharedBottom => &["bottom_dim"],
            ModelKind::Mmoe => &["experts", "expert_dim"],
            ModelKind::Ple => &["shared_experts", "specific_experts", "cgc_layers", "expert_dim"],
            ModelKind::Star => &["aux_dim"],
            ModelKind::SarNet => &["shared_experts", "specific_experts", "expert_dim"],
            ModelKind::M2m => &["experts", "meta_dim", "ff_dim", "enc_layers", "dec_layers"],
            ModelKind::Adasparse => &["alpha", "beta"],
            ModelKind::Adl => &["bottom_dim", "clusters", "momentum"],
            ModelKind::Epnet | ModelKind::Ppnet => &["gate_hidden"],
            ModelKind::Hamur => &["hyper_hidden", "hyper_matrix"],
            ModelKind::M3oe => &["n_experts_m3oe", "expert_dim"],
        }
    }

    /// Whether the model has scenario-dependent parameters or routing.
    pub fn is_scenario_aware(self) -> bool {
        self != ModelKind::SingleTower
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownModelKind(s.to_string()))
    }
}

fn default_embed_dim() -> usize {
    16
}

fn default_tower_dims() -> Vec<usize> {
    vec![256, 128, 64]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default = "default_embed_dim")]
    pub embed_dim: usize,
    #[serde(default = "default_tower_dims")]
    pub tower_dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bottom_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expert_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared_experts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub specific_experts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cgc_layers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ff_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enc_layers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dec_layers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clusters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_hidden: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyper_hidden: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyper_matrix: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_experts_m3oe: Option<usize>,
}

impl ModelConfig {
    /// Config with only the shared fields set; kind-specific fields are left empty.
    pub fn bare(kind: ModelKind) -> Self {
        Self {
            kind,
            embed_dim: default_embed_dim(),
            tower_dims: default_tower_dims(),
            bottom_dim: None,
            experts: None,
            expert_dim: None,
            shared_experts: None,
            specific_experts: None,
            cgc_layers: None,
            aux_dim: None,
            meta_dim: None,
            ff_dim: None,
            enc_layers: None,
            dec_layers: None,
            alpha: None,
            beta: None,
            clusters: None,
            momentum: None,
            gate_hidden: None,
            hyper_hidden: None,
            hyper_matrix: None,
            n_experts_m3oe: None,
        }
    }

    /// The benchmark's default hyperparameters for `kind`.
    pub fn with_defaults(kind: ModelKind) -> Self {
        let mut c = Self::bare(kind);
        match kind {
            ModelKind::SingleTower => {}
            ModelKind::SharedBottom => c.bottom_dim = Some(128),
            ModelKind::Mmoe => {
                c.experts = Some(4);
                c.expert_dim = Some(128);
            }
            ModelKind::Ple => {
                c.shared_experts = Some(2);
                c.specific_experts = Some(1);
                c.cgc_layers = Some(1);
                c.expert_dim = Some(128);
            }
            ModelKind::Star => c.aux_dim = Some(16),
            ModelKind::SarNet => {
                c.shared_experts = Some(4);
                c.specific_experts = Some(1);
                c.expert_dim = Some(128);
            }
            ModelKind::M2m => {
                c.experts = Some(4);
                c.meta_dim = Some(32);
                c.ff_dim = Some(128);
                c.enc_layers = Some(1);
                c.dec_layers = Some(1);
            }
            ModelKind::Adasparse => {
                c.alpha = Some(1.0);
                c.beta = Some(2.0);
            }
            ModelKind::Adl => {
                c.bottom_dim = Some(128);
                c.clusters = Some(4);
                c.momentum = Some(0.1);
            }
            ModelKind::Epnet | ModelKind::Ppnet => c.gate_hidden = Some(64),
            ModelKind::Hamur => {
                c.hyper_hidden = Some(64);
                c.hyper_matrix = Some(35);
            }
            ModelKind::M3oe => {
                c.n_experts_m3oe = Some(4);
                c.expert_dim = Some(128);
            }
        }
        c
    }

    /// Toy dimensions for tests, gradient checks and demos.
    pub fn tiny(kind: ModelKind) -> Self {
        let mut c = Self::with_defaults(kind);
        c.embed_dim = 3;
        c.tower_dims = vec![4, 3];
        let shrink = |v: &mut Option<usize>, to: usize| {
            if v.is_some() {
                *v = Some(to);
            }
        };
        shrink(&mut c.bottom_dim, 5);
        shrink(&mut c.experts, 2);
        shrink(&mut c.expert_dim, 4);
        shrink(&mut c.shared_experts, 2);
        shrink(&mut c.specific_experts, 1);
        shrink(&mut c.cgc_layers, 2);
        shrink(&mut c.aux_dim, 3);
        shrink(&mut c.meta_dim, 3);
        shrink(&mut c.ff_dim, 4);
        shrink(&mut c.clusters, 3);
        shrink(&mut c.gate_hidden, 4);
        shrink(&mut c.hyper_hidden, 4);
        shrink(&mut c.hyper_matrix, 2);
        shrink(&mut c.n_experts_m3oe, 2);
        c
    }

    /// Parses a JSON object, reporting unknown kinds with the list of valid ones.
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        if let Some(kind) = value.get("kind").and_then(|k| k.as_str()) {
            kind.parse::<ModelKind>()?;
        }
        let c: Self = serde_json::from_value(value.clone())?;
        c.validate()?;
        Ok(c)
    }

    fn present_fields(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut mark = |name: &'static str, set: bool| {
            if set {
                out.push(name);
            }
        };
        mark("bottom_dim", self.bottom_dim.is_some());
        mark("experts", self.experts.is_some());
        mark("expert_dim", self.expert_dim.is_some());
        mark("shared_experts", self.shared_experts.is_some());
        mark("specific_experts", self.specific_experts.is_some());
        mark("cgc_layers", self.cgc_layers.is_some());
        mark("aux_dim", self.aux_dim.is_some());
        mark("meta_dim", self.meta_dim.is_some());
        mark("ff_dim", self.ff_dim.is_some());
        mark("enc_layers", self.enc_layers.is_some());
        mark("dec_layers", self.dec_layers.is_some());
        mark("alpha", self.alpha.is_some());
        mark("beta", self.beta.is_some());
        mark("clusters", self.clusters.is_some());
        mark("momentum", self.momentum.is_some());
        mark("gate_hidden", self.gate_hidden.is_some());
        mark("hyper_hidden", self.hyper_hidden.is_some());
        mark("hyper_matrix", self.hyper_matrix.is_some());
        mark("n_experts_m3oe", self.n_experts_m3oe.is_some());
        out
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.kind.as_str();
        let required = self.kind.required_fields();
        let present = self.present_fields();
        if let Some(f) = required.iter().find(|f| !present.contains(f)) {
            return Err(Error::MissingField { kind, field: f });
        }
        if let Some(f) = present.iter().find(|f| !required.contains(f)) {
            return Err(Error::UnexpectedField { kind, field: f });
        }
        let positive = [
            ("embed_dim", Some(self.embed_dim)),
            ("bottom_dim", self.bottom_dim),
            ("experts", self.experts),
            ("expert_dim", self.expert_dim),
            ("shared_experts", self.shared_experts),
            ("specific_experts", self.specific_experts),
            ("aux_dim", self.aux_dim),
            ("meta_dim", self.meta_dim),
            ("ff_dim", self.ff_dim),
            ("enc_layers", self.enc_layers),
            ("dec_layers", self.dec_layers),
            ("gate_hidden", self.gate_hidden),
            ("hyper_hidden", self.hyper_hidden),
            ("hyper_matrix", self.hyper_matrix),
            ("n_experts_m3oe", self.n_experts_m3oe),
        ];
        for (name, v) in positive {
            if v == Some(0) {
                return Err(Error::Config(format!("`{name}` must be positive")));
            }
        }
        if self.tower_dims.is_empty() || self.tower_dims.contains(&0) {
            return Err(Error::Config("`tower_dims` must be a non-empty list of positive widths".into()));
        }
        if let Some(l) = self.cgc_layers {
            if !(1..=2).contains(&l) {
                return Err(Error::Config(format!("`cgc_layers` must be 1 or 2, got {l}")));
            }
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::Config(format!("`alpha` must be positive, got {a}")));
            }
        }
        if let Some(b) = self.beta {
            if !(b >= 1.0 && b.is_finite()) {
                return Err(Error::Config(format!("`beta` must be at least 1, got {b}")));
            }
        }
        if let Some(k) = self.clusters {
            if k < 2 {
                return Err(Error::Config(format!("`clusters` must be at least 2, got {k}")));
            }
        }
        if let Some(m) = self.momentum {
            if !(m > 0.0 && m <= 1.0) {
                return Err(Error::Config(format!("`momentum` must lie in (0, 1], got {m}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_for_every_kind() {
        for k in ModelKind::ALL {
            ModelConfig::with_defaults(k).validate().unwrap();
        }
    }

    #[test]
    fn unknown_kind_lists_valid_kinds() {
        let err = ModelConfig::from_json(&serde_json::json!({"kind": "bogus"})).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown model kind"), "{msg}");
        assert!(msg.contains("shared_bottom") && msg.contains("m3oe"), "{msg}");
    }

    #[test]
    fn missing_and_extra_fields_are_named() {
        let err = ModelConfig::from_json(&serde_json::json!({"kind": "mmoe", "experts": 4})).unwrap_err();
        assert_eq!(err.to_string(), "model kind `mmoe` requires field `expert_dim`");
        let err = ModelConfig::from_json(&serde_json::json!({"kind": "single_tower", "alpha": 1.0})).unwrap_err();
        assert!(err.to_string().contains("does not use field `alpha`"));
    }

    #[test]
    fn json_round_trip() {
        let c = ModelConfig::with_defaults(ModelKind::M2m);
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(ModelConfig::from_json(&v).unwrap(), c);
    }
}
