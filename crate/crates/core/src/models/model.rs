use std::path::Path;

use crate::data::{Batch, FeatureSpace};
use crate::error::{Error, Result};
use crate::models::arch::{AdlTrace, Arch, Context, Dims, ADL_CENTROIDS};
use crate::models::blocks::{adl_update, ScenarioRouting};
use crate::models::input::InputLayer;
use crate::models::{ModelConfig, ModelKind};
use crate::numeric::{checkpoint, sigmoid, Graph, NodeId, ParameterStore, Scalar};

/// A built model: configuration, feature space and parameters.
#[derive(Clone, Debug)]
pub struct Model<T: Scalar> {
    pub config: ModelConfig,
    pub space: FeatureSpace,
    pub scenario_count: usize,
    pub params: ParameterStore<T>,
    input: InputLayer,
    arch: Arch,
    dims: Dims,
}

/// Logits of one forward pass plus anything the optimizer step needs afterwards.
pub struct Forward<T> {
    pub logits: NodeId,
    pub adl: Option<AdlTrace<T>>,
}

pub fn build_model<T: Scalar>(config: &ModelConfig, space: &FeatureSpace, scenario_count: usize, seed: u64) -> Result<Model<T>> {
    config.validate()?;
    if config.kind.is_scenario_aware() && scenario_count < 2 {
        return Err(Error::Config(format!(
            "model kind `{}` needs at least 2 scenarios, got {scenario_count}",
            config.kind
        )));
    }
    let scenario_count = scenario_count.max(1);
    let mut params = ParameterStore::new(seed);
    let input = InputLayer::register(&mut params, space, config.embed_dim)?;
    let dims = Dims {
        input: input.output_dim(),
        embed: config.embed_dim,
        towers: config.tower_dims.clone(),
        scenarios: scenario_count,
        field_widths: input.field_widths(),
    };
    let arch = Arch::register(&mut params, config, &dims)?;
    Ok(Model {
        config: config.clone(),
        space: space.clone(),
        scenario_count,
        params,
        input,
        arch,
        dims,
    })
}

impl<T: Scalar> Model<T> {
    pub fn kind(&self) -> ModelKind {
        self.config.kind
    }

    /// Builds the graph for `batch` on top of `g`, which must borrow `self.params`.
    pub fn forward(&self, g: &mut Graph<T>, batch: &Batch) -> Result<Forward<T>> {
        let count = if self.config.kind.is_scenario_aware() {
            self.scenario_count
        } else {
            // The scenario-blind baseline accepts any id.
            batch.scenario.iter().map(|&s| s as usize + 1).max().unwrap_or(1)
        };
        let routing = ScenarioRouting::new(&batch.scenario, count)?;
        let x = self.input.forward(g, batch)?;
        let ctx = Context {
            x,
            scenario_ids: &routing.scenario,
            routing: &routing,
        };
        let (logits, adl) = self.arch.forward(g, &ctx, &self.dims)?;
        Ok(Forward { logits, adl })
    }

    pub fn logits(&self, batch: &Batch) -> Result<Vec<T>> {
        let mut g = Graph::new(&self.params);
        let f = self.forward(&mut g, batch)?;
        Ok(g.value(f.logits).to_vec())
    }

    /// Click probabilities, one per row.
    pub fn predict(&self, batch: &Batch) -> Result<Vec<f64>> {
        Ok(self.logits(batch)?.into_iter().map(|z| sigmoid(z.as_f64())).collect())
    }

    /// Training-time state updates that are not gradient steps (ADL centroids).
    pub fn after_step(&mut self, fwd: &Forward<T>) -> Result<()> {
        if let (Some(trace), Some(m)) = (&fwd.adl, self.config.momentum) {
            let h = self.config.bottom_dim.expect("validated");
            let c = self
                .params
                .get_mut(ADL_CENTROIDS)
                .ok_or_else(|| Error::ParamMismatch(format!("no parameter `{ADL_CENTROIDS}`")))?;
            adl_update(c.values_mut(), h, &trace.reprs, &trace.assign, m);
        }
        Ok(())
    }

    /// Number of trainable values.
    pub fn param_count(&self) -> usize {
        self.params.trainable_count()
    }

    pub fn with_params<U: Scalar>(&self, params: ParameterStore<U>) -> Model<U> {
        Model {
            config: self.config.clone(),
            space: self.space.clone(),
            scenario_count: self.scenario_count,
            params,
            input: self.input.clone(),
            arch: self.arch.clone(),
            dims: self.dims.clone(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        self.with_params(self.params.cast())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(&self.params, path)
    }

    /// Replaces the parameters with a checkpoint's; layouts must match exactly.
    pub fn load_params(&mut self, path: &Path) -> Result<()> {
        let loaded = checkpoint::load::<T>(path, self.params.rng_seed())?;
        self.params.copy_values_from(&loaded)
    }
}

/// Closed-form trainable parameter count for `config` over `space`.
pub fn analytic_param_count(config: &ModelConfig, space: &FeatureSpace, scenario_count: usize) -> usize {
    let lin = |i: usize, o: usize| i * o + o;
    let mlp = |i: usize, dims: &[usize], head: bool| {
        let mut prev = i;
        let mut n = 0;
        for &d in dims {
            n += lin(prev, d);
            prev = d;
        }
        if head {
            n += lin(prev, 1);
        }
        n
    };
    let d = config.embed_dim;
    let s = scenario_count;
    let input = space.sparse.len() * d + space.dense.len();
    let fields = space.sparse.len() + space.dense.len();
    let emb: usize = space.sparse.iter().map(|f| f.vocab * d).sum();
    let tw = &config.tower_dims;
    let tower = |i: usize| mlp(i, tw, true);
    let scen_table = s * d;
    let gate_nu = |i: usize, h: usize, o: usize| lin(i, h) + lin(h, o);
    let body = match config.kind {
        ModelKind::SingleTower => tower(input),
        ModelKind::SharedBottom => {
            let b = config.bottom_dim.unwrap_or(0);
            lin(input, b) + s * tower(b)
        }
        ModelKind::Mmoe => {
            let (k, h) = (config.experts.unwrap_or(0), config.expert_dim.unwrap_or(0));
            k * lin(input, h) + s * lin(input, k) + s * tower(h)
        }
        ModelKind::Ple => {
            let ns = config.shared_experts.unwrap_or(0);
            let nm = config.specific_experts.unwrap_or(0);
            let layers = config.cgc_layers.unwrap_or(0);
            let h = config.expert_dim.unwrap_or(0);
            let mut n = 0;
            let mut level_in = input;
            for l in 0..layers {
                n += (ns + s * nm) * lin(level_in, h) + s * lin(level_in, ns + nm);
                if l + 1 < layers {
                    n += lin(level_in, ns + s * nm);
                }
                level_in = h;
            }
            n + s * tower(h)
        }
        ModelKind::Star => {
            let main = tower(input);
            scen_table + (1 + s) * main + mlp(d + input, &[config.aux_dim.unwrap_or(0)], true)
        }
        ModelKind::SarNet => {
            let ns = config.shared_experts.unwrap_or(0);
            let nm = config.specific_experts.unwrap_or(0);
            let h = config.expert_dim.unwrap_or(0);
            scen_table + lin(d, fields) + (ns + s * nm) * lin(input, h) + s * lin(input + d, ns + nm) + tower(h)
        }
        ModelKind::M2m => {
            let k = config.experts.unwrap_or(0);
            let m = config.meta_dim.unwrap_or(0);
            let ff = config.ff_dim.unwrap_or(0);
            let enc = config.enc_layers.unwrap_or(0);
            let dec = config.dec_layers.unwrap_or(0);
            let meta = (d + 1) * m * m + (d + 1) * m;
            scen_table + k * (mlp(input, &vec![ff; enc], false) + lin(ff, m)) + meta + m + dec * meta + lin(m, 1)
        }
        ModelKind::Adasparse => {
            let mut prev = input;
            let mut n = 0;
            for &w in tw {
                n += lin(prev, w) + lin(d + prev, 2 * w);
                prev = w;
            }
            scen_table + n + lin(prev, 1)
        }
        ModelKind::Adl => {
            let b = config.bottom_dim.unwrap_or(0);
            let k = config.clusters.unwrap_or(0);
            lin(input, b) + (1 + k) * tower(b)
        }
        ModelKind::Epnet => scen_table + gate_nu(d + input, config.gate_hidden.unwrap_or(0), input) + tower(input),
        ModelKind::Ppnet => {
            let gh = config.gate_hidden.unwrap_or(0);
            scen_table + tw.iter().map(|&w| gate_nu(d + input, gh, w)).sum::<usize>() + s * tower(input)
        }
        ModelKind::Hamur => {
            let hh = config.hyper_hidden.unwrap_or(0);
            let k = config.hyper_matrix.unwrap_or(0);
            let adapters: usize = tw.iter().map(|&w| 2 * w * k + 2 * w).sum();
            scen_table + tower(input) + adapters + lin(d, hh) + lin(hh, tw.len() * 2 * k * k)
        }
        ModelKind::M3oe => {
            let k = config.n_experts_m3oe.unwrap_or(0);
            let h = config.expert_dim.unwrap_or(0);
            3 * k * lin(input, h) + (2 + s) * lin(input, k) + 4 + tower(h)
        }
    };
    emb + body
}
