//! Per-kind parameter layouts and forward passes.

use crate::error::{Error, Result};
use crate::models::blocks::{
    adasparse_factors, adl_route, hamur_adapter, moe_mix, normalize_rows, star_combine, GateNu, HamurAdapter, MetaUnit,
    Pruner, ScenarioRouting,
};
use crate::models::{ModelConfig, ModelKind};
use crate::numeric::{Activation, Graph, Init, Linear, Mlp, NodeId, ParameterStore, Scalar};

pub(crate) const SCENARIO_TABLE: &str = "scenario.emb";
pub(crate) const ADL_CENTROIDS: &str = "adl.centroids";

/// Shapes every architecture is built from.
#[derive(Clone, Debug)]
pub(crate) struct Dims {
    pub input: usize,
    pub embed: usize,
    pub towers: Vec<usize>,
    pub scenarios: usize,
    pub field_widths: Vec<usize>,
}

/// Per-batch values an architecture needs besides the input matrix.
pub(crate) struct Context<'r> {
    pub x: NodeId,
    pub scenario_ids: &'r [usize],
    pub routing: &'r ScenarioRouting,
}

/// Cluster assignments recorded during an ADL forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct AdlTrace<T> {
    pub reprs: Vec<T>,
    pub assign: Vec<usize>,
    pub zero_norm: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Arch {
    SingleTower {
        tower: Mlp,
    },
    SharedBottom {
        bottom: Linear,
        towers: Vec<Mlp>,
    },
    Mmoe {
        experts: Vec<Linear>,
        gates: Vec<Linear>,
        towers: Vec<Mlp>,
    },
    Ple {
        levels: Vec<PleLevel>,
        towers: Vec<Mlp>,
    },
    Star {
        shared: Vec<Linear>,
        scenario: Vec<Vec<Linear>>,
        aux: Mlp,
    },
    SarNet {
        attention: Linear,
        shared: Vec<Linear>,
        specific: Vec<Vec<Linear>>,
        gates: Vec<Linear>,
        tower: Mlp,
    },
    M2m {
        experts: Vec<(Mlp, Linear)>,
        attention: MetaUnit,
        score: String,
        blocks: Vec<MetaUnit>,
        head: Linear,
    },
    Adasparse {
        layers: Vec<Linear>,
        pruners: Vec<Pruner>,
        head: Linear,
        alpha: f64,
        beta: f64,
    },
    Adl {
        bottom: Linear,
        clusters: usize,
        shared: Mlp,
        towers: Vec<Mlp>,
    },
    Epnet {
        gate: GateNu,
        tower: Mlp,
    },
    Ppnet {
        gates: Vec<GateNu>,
        towers: Vec<Mlp>,
    },
    Hamur {
        layers: Vec<Linear>,
        adapters: Vec<HamurAdapter>,
        hyper: (Linear, Linear),
        head: Linear,
    },
    M3oe {
        shared: Vec<Linear>,
        shared_gate: Linear,
        domain: Vec<Linear>,
        domain_gates: Vec<Linear>,
        task: Vec<Linear>,
        task_gate: Linear,
        fuse: (String, String),
        tower: Mlp,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct PleLevel {
    shared: Vec<Linear>,
    specific: Vec<Vec<Linear>>,
    specific_gates: Vec<Linear>,
    shared_gate: Option<Linear>,
}

fn req<V: Copy>(v: Option<V>, kind: ModelKind, field: &'static str) -> Result<V> {
    v.ok_or(Error::MissingField {
        kind: kind.as_str(),
        field,
    })
}

fn experts<T: Scalar>(store: &mut ParameterStore<T>, prefix: &str, count: usize, input: usize, width: usize) -> Result<Vec<Linear>> {
    (0..count)
        .map(|e| Linear::register(store, &format!("{prefix}.{e}"), input, width))
        .collect()
}

fn towers<T: Scalar>(store: &mut ParameterStore<T>, prefix: &str, count: usize, input: usize, dims: &[usize]) -> Result<Vec<Mlp>> {
    (0..count)
        .map(|s| Mlp::register(store, &format!("{prefix}.{s}"), input, dims, true))
        .collect()
}

fn needs_scenario_table(kind: ModelKind) -> bool {
    matches!(
        kind,
        ModelKind::Star
            | ModelKind::SarNet
            | ModelKind::M2m
            | ModelKind::Adasparse
            | ModelKind::Epnet
            | ModelKind::Ppnet
            | ModelKind::Hamur
    )
}

impl Arch {
    pub fn register<T: Scalar>(store: &mut ParameterStore<T>, cfg: &ModelConfig, dims: &Dims) -> Result<Self> {
        let kind = cfg.kind;
        let (input, d, s_count) = (dims.input, dims.embed, dims.scenarios);
        let tw = &dims.towers;
        if needs_scenario_table(kind) {
            store.add(SCENARIO_TABLE, &[s_count, d], Init::Normal { std: 0.1 })?;
        }
        let arch = match kind {
            ModelKind::SingleTower => Arch::SingleTower {
                tower: Mlp::register(store, "tower", input, tw, true)?,
            },
            ModelKind::SharedBottom => {
                let b = req(cfg.bottom_dim, kind, "bottom_dim")?;
                Arch::SharedBottom {
                    bottom: Linear::register(store, "bottom", input, b)?,
                    towers: towers(store, "tower", s_count, b, tw)?,
                }
            }
            ModelKind::Mmoe => {
                let k = req(cfg.experts, kind, "experts")?;
                let h = req(cfg.expert_dim, kind, "expert_dim")?;
                Arch::Mmoe {
                    experts: experts(store, "expert", k, input, h)?,
                    gates: experts(store, "gate", s_count, input, k)?,
                    towers: towers(store, "tower", s_count, h, tw)?,
                }
            }
            ModelKind::Ple => {
                let ns = req(cfg.shared_experts, kind, "shared_experts")?;
                let nm = req(cfg.specific_experts, kind, "specific_experts")?;
                let layers = req(cfg.cgc_layers, kind, "cgc_layers")?;
                let h = req(cfg.expert_dim, kind, "expert_dim")?;
                let mut levels = Vec::with_capacity(layers);
                let mut level_in = input;
                for l in 0..layers {
                    let p = format!("cgc.{l}");
                    let shared = experts(store, &format!("{p}.shared"), ns, level_in, h)?;
                    let specific = (0..s_count)
                        .map(|s| experts(store, &format!("{p}.specific.{s}"), nm, level_in, h))
                        .collect::<Result<Vec<_>>>()?;
                    let specific_gates = experts(store, &format!("{p}.gate"), s_count, level_in, ns + nm)?;
                    let shared_gate = if l + 1 < layers {
                        Some(Linear::register(store, &format!("{p}.shared_gate"), level_in, ns + s_count * nm)?)
                    } else {
                        None
                    };
                    levels.push(PleLevel {
                        shared,
                        specific,
                        specific_gates,
                        shared_gate,
                    });
                    level_in = h;
                }
                Arch::Ple {
                    levels,
                    towers: towers(store, "tower", s_count, h, tw)?,
                }
            }
            ModelKind::Star => {
                let aux_dim = req(cfg.aux_dim, kind, "aux_dim")?;
                let mut widths = tw.clone();
                widths.push(1);
                let mut shared = Vec::with_capacity(widths.len());
                let mut prev = input;
                for (l, &w) in widths.iter().enumerate() {
                    shared.push(Linear::register(store, &format!("star.shared.{l}"), prev, w)?);
                    prev = w;
                }
                let mut scenario = Vec::with_capacity(s_count);
                for s in 0..s_count {
                    let mut layers = Vec::with_capacity(widths.len());
                    let mut prev = input;
                    for (l, &w) in widths.iter().enumerate() {
                        layers.push(Linear::register_with(store, &format!("star.scenario.{s}.{l}"), prev, w, Init::ONES)?);
                        prev = w;
                    }
                    scenario.push(layers);
                }
                Arch::Star {
                    shared,
                    scenario,
                    aux: Mlp::register(store, "star.aux", d + input, &[aux_dim], true)?,
                }
            }
            ModelKind::SarNet => {
                let ns = req(cfg.shared_experts, kind, "shared_experts")?;
                let nm = req(cfg.specific_experts, kind, "specific_experts")?;
                let h = req(cfg.expert_dim, kind, "expert_dim")?;
                Arch::SarNet {
                    attention: Linear::register(store, "sar.attention", d, dims.field_widths.len())?,
                    shared: experts(store, "sar.shared", ns, input, h)?,
                    specific: (0..s_count)
                        .map(|s| experts(store, &format!("sar.specific.{s}"), nm, input, h))
                        .collect::<Result<Vec<_>>>()?,
                    gates: experts(store, "sar.gate", s_count, input + d, ns + nm)?,
                    tower: Mlp::register(store, "tower", h, tw, true)?,
                }
            }
            ModelKind::M2m => {
                let k = req(cfg.experts, kind, "experts")?;
                let m = req(cfg.meta_dim, kind, "meta_dim")?;
                let ff = req(cfg.ff_dim, kind, "ff_dim")?;
                let enc = req(cfg.enc_layers, kind, "enc_layers")?;
                let dec = req(cfg.dec_layers, kind, "dec_layers")?;
                let experts = (0..k)
                    .map(|e| {
                        let body = Mlp::register(store, &format!("m2m.expert.{e}"), input, &vec![ff; enc], false)?;
                        let proj = Linear::register(store, &format!("m2m.expert.{e}.proj"), ff, m)?;
                        Ok((body, proj))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let attention = MetaUnit::register(store, "m2m.attention", d, m, m)?;
                store.add("m2m.score", &[m, 1], Init::FanIn(m))?;
                let blocks = (0..dec)
                    .map(|l| MetaUnit::register(store, &format!("m2m.tower.{l}"), d, m, m))
                    .collect::<Result<Vec<_>>>()?;
                Arch::M2m {
                    experts,
                    attention,
                    score: "m2m.score".into(),
                    blocks,
                    head: Linear::register(store, "m2m.head", m, 1)?,
                }
            }
            ModelKind::Adasparse => {
                let alpha = req(cfg.alpha, kind, "alpha")?;
                let beta = req(cfg.beta, kind, "beta")?;
                let mut layers = Vec::with_capacity(tw.len());
                let mut pruners = Vec::with_capacity(tw.len());
                let mut prev = input;
                for (l, &w) in tw.iter().enumerate() {
                    layers.push(Linear::register(store, &format!("tower.{l}"), prev, w)?);
                    pruners.push(Pruner::register(store, &format!("pruner.{l}"), d, prev, w)?);
                    prev = w;
                }
                Arch::Adasparse {
                    layers,
                    pruners,
                    head: Linear::register(store, "tower.out", prev, 1)?,
                    alpha,
                    beta,
                }
            }
            ModelKind::Adl => {
                let b = req(cfg.bottom_dim, kind, "bottom_dim")?;
                let k = req(cfg.clusters, kind, "clusters")?;
                let idx = store.add_buffer(ADL_CENTROIDS, &[k, b], Init::Normal { std: 1.0 })?;
                normalize_rows(store.entry_mut(idx).1.tensor.values_mut(), b);
                Arch::Adl {
                    bottom: Linear::register(store, "bottom", input, b)?,
                    clusters: k,
                    shared: Mlp::register(store, "shared", b, tw, true)?,
                    towers: towers(store, "cluster", k, b, tw)?,
                }
            }
            ModelKind::Epnet => {
                let gh = req(cfg.gate_hidden, kind, "gate_hidden")?;
                Arch::Epnet {
                    gate: GateNu::register(store, "epnet.gate", d + input, gh, input)?,
                    tower: Mlp::register(store, "tower", input, tw, true)?,
                }
            }
            ModelKind::Ppnet => {
                let gh = req(cfg.gate_hidden, kind, "gate_hidden")?;
                let gates = tw
                    .iter()
                    .enumerate()
                    .map(|(l, &w)| GateNu::register(store, &format!("ppnet.gate.{l}"), d + input, gh, w))
                    .collect::<Result<Vec<_>>>()?;
                Arch::Ppnet {
                    gates,
                    towers: towers(store, "tower", s_count, input, tw)?,
                }
            }
            ModelKind::Hamur => {
                let hh = req(cfg.hyper_hidden, kind, "hyper_hidden")?;
                let k = req(cfg.hyper_matrix, kind, "hyper_matrix")?;
                let mut layers = Vec::with_capacity(tw.len());
                let mut adapters = Vec::with_capacity(tw.len());
                let mut prev = input;
                for (l, &w) in tw.iter().enumerate() {
                    layers.push(Linear::register(store, &format!("tower.{l}"), prev, w)?);
                    adapters.push(HamurAdapter::register(store, &format!("adapter.{l}"), w, k)?);
                    prev = w;
                }
                let hyper = (
                    Linear::register(store, "hyper.0", d, hh)?,
                    Linear::register(store, "hyper.1", hh, tw.len() * 2 * k * k)?,
                );
                Arch::Hamur {
                    layers,
                    adapters,
                    hyper,
                    head: Linear::register(store, "tower.out", prev, 1)?,
                }
            }
            ModelKind::M3oe => {
                let k = req(cfg.n_experts_m3oe, kind, "n_experts_m3oe")?;
                let h = req(cfg.expert_dim, kind, "expert_dim")?;
                let shared = experts(store, "m3oe.shared", k, input, h)?;
                let shared_gate = Linear::register(store, "m3oe.shared_gate", input, k)?;
                let domain = experts(store, "m3oe.domain", k, input, h)?;
                let domain_gates = experts(store, "m3oe.domain_gate", s_count, input, k)?;
                let task = experts(store, "m3oe.task", k, input, h)?;
                let task_gate = Linear::register(store, "m3oe.task_gate", input, k)?;
                store.add("m3oe.fuse.0", &[1, 2], Init::ZEROS)?;
                store.add("m3oe.fuse.1", &[1, 2], Init::ZEROS)?;
                Arch::M3oe {
                    shared,
                    shared_gate,
                    domain,
                    domain_gates,
                    task,
                    task_gate,
                    fuse: ("m3oe.fuse.0".into(), "m3oe.fuse.1".into()),
                    tower: Mlp::register(store, "tower", h, tw, true)?,
                }
            }
        };
        Ok(arch)
    }

    /// Returns the `n x 1` logits and, for ADL, the routing trace.
    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, ctx: &Context<'_>, dims: &Dims) -> Result<(NodeId, Option<AdlTrace<T>>)> {
        let x = ctx.x;
        let routing = ctx.routing;
        let logits = match self {
            Arch::SingleTower { tower } => tower.forward(g, x)?,
            Arch::SharedBottom { bottom, towers } => {
                let b = bottom.forward(g, x, Activation::Relu)?;
                routing.route(g, &[b], |g, s, ins| towers[s].forward(g, ins[0]))?
            }
            Arch::Mmoe { experts, gates, towers } => {
                let mut inputs = vec![x];
                for e in experts {
                    inputs.push(e.forward(g, x, Activation::Relu)?);
                }
                routing.route(g, &inputs, |g, s, ins| {
                    let gl = gates[s].forward(g, ins[0], Activation::Identity)?;
                    let mixed = moe_mix(g, &ins[1..], gl)?;
                    towers[s].forward(g, mixed)
                })?
            }
            Arch::Ple { levels, towers } => {
                let s_count = towers.len();
                let mut shared_in = x;
                let mut specific_in = vec![x; s_count];
                for level in levels {
                    let sh = level
                        .shared
                        .iter()
                        .map(|e| e.forward(g, shared_in, Activation::Relu))
                        .collect::<Result<Vec<_>>>()?;
                    let mut all = sh.clone();
                    let mut next = Vec::with_capacity(s_count);
                    for s in 0..s_count {
                        let sp = level.specific[s]
                            .iter()
                            .map(|e| e.forward(g, specific_in[s], Activation::Relu))
                            .collect::<Result<Vec<_>>>()?;
                        let mut pool = sh.clone();
                        pool.extend(&sp);
                        all.extend(&sp);
                        let gl = level.specific_gates[s].forward(g, specific_in[s], Activation::Identity)?;
                        next.push(moe_mix(g, &pool, gl)?);
                    }
                    if let Some(gate) = &level.shared_gate {
                        let gl = gate.forward(g, shared_in, Activation::Identity)?;
                        shared_in = moe_mix(g, &all, gl)?;
                    }
                    specific_in = next;
                }
                routing.route(g, &specific_in, |g, s, ins| towers[s].forward(g, ins[s]))?
            }
            Arch::Star { shared, scenario, aux } => {
                let main = routing.route(g, &[x], |g, s, ins| {
                    let mut h = ins[0];
                    let last = shared.len() - 1;
                    for (l, (sh, sc)) in shared.iter().zip(&scenario[s]).enumerate() {
                        let (ws, bs) = (g.param(&sh.w)?, g.param(&sh.b)?);
                        let (wc, bc) = (g.param(&sc.w)?, g.param(&sc.b)?);
                        let (w, b) = star_combine(g, ws, bs, wc, bc)?;
                        let act = if l == last { Activation::Identity } else { Activation::Relu };
                        h = crate::numeric::dense_layer(g, h, w, b, act)?;
                    }
                    Ok(h)
                })?;
                let z = scenario_rows(g, ctx)?;
                let aux_in = g.concat(&[z, x])?;
                let a = aux.forward(g, aux_in)?;
                g.add(main, a)?
            }
            Arch::SarNet {
                attention,
                shared,
                specific,
                gates,
                tower,
            } => {
                let z = scenario_rows(g, ctx)?;
                let a = attention.forward(g, z, Activation::Sigmoid)?;
                let expand = g.input(dims.field_widths.len(), dims.input, field_expansion(&dims.field_widths))?;
                let a = g.matmul(a, expand)?;
                let xr = g.mul(x, a)?;
                let mut inputs = vec![xr, z];
                for e in shared {
                    inputs.push(e.forward(g, xr, Activation::Relu)?);
                }
                let mixed = routing.route(g, &inputs, |g, s, ins| {
                    let mut pool = ins[2..].to_vec();
                    for e in &specific[s] {
                        pool.push(e.forward(g, ins[0], Activation::Relu)?);
                    }
                    let gin = g.concat(&[ins[0], ins[1]])?;
                    let gl = gates[s].forward(g, gin, Activation::Identity)?;
                    moe_mix(g, &pool, gl)
                })?;
                tower.forward(g, mixed)?
            }
            Arch::M2m {
                experts,
                attention,
                score,
                blocks,
                head,
            } => {
                let mut outs = Vec::with_capacity(experts.len());
                for (body, proj) in experts {
                    let h = body.forward(g, x)?;
                    outs.push(proj.forward(g, h, Activation::Identity)?);
                }
                let table = g.param(SCENARIO_TABLE)?;
                let v = g.param(score)?;
                routing.route(g, &outs, |g, s, ins| {
                    let z = g.embedding(table, &[s], "scenario")?;
                    let (w, b) = attention.generate(g, z)?;
                    let mut scores = Vec::with_capacity(ins.len());
                    for &e in ins {
                        let t = g.matmul(e, w)?;
                        let t = g.add(t, b)?;
                        let t = g.tanh(t)?;
                        scores.push(g.matmul(t, v)?);
                    }
                    let scores = g.concat(&scores)?;
                    let mut h = moe_mix(g, ins, scores)?;
                    for block in blocks {
                        let (w, b) = block.generate(g, z)?;
                        let r = crate::numeric::dense_layer(g, h, w, b, Activation::Relu)?;
                        h = g.add(h, r)?;
                    }
                    head.forward(g, h, Activation::Identity)
                })?
            }
            Arch::Adasparse {
                layers,
                pruners,
                head,
                alpha,
                beta,
            } => {
                let z = scenario_rows(g, ctx)?;
                let mut h = x;
                for (layer, pruner) in layers.iter().zip(pruners) {
                    let pi = adasparse_factors(g, pruner, z, h, *alpha, *beta)?;
                    let out = layer.forward(g, h, Activation::Relu)?;
                    h = g.mul(out, pi)?;
                }
                head.forward(g, h, Activation::Identity)?
            }
            Arch::Adl {
                bottom,
                clusters,
                shared,
                towers,
            } => {
                let h0 = bottom.forward(g, x, Activation::Relu)?;
                let width = g.shape(h0).1;
                let reprs = g.value(h0).to_vec();
                let (assign, zero_norm) = adl_route(&reprs, width, g.store().require(ADL_CENTROIDS)?.values());
                if zero_norm > 0 {
                    log::warn!("{zero_norm} zero-norm representation(s) routed to cluster 0");
                }
                let ids: Vec<u32> = assign.iter().map(|&c| c as u32).collect();
                let cluster_routing = ScenarioRouting::new(&ids, *clusters)?;
                let own = cluster_routing.route(g, &[h0], |g, c, ins| towers[c].forward(g, ins[0]))?;
                let common = shared.forward(g, h0)?;
                let logits = g.add(common, own)?;
                return Ok((
                    logits,
                    Some(AdlTrace {
                        reprs,
                        assign,
                        zero_norm,
                    }),
                ));
            }
            Arch::Epnet { gate, tower } => {
                let z = scenario_rows(g, ctx)?;
                let detached = g.stop_gradient(x)?;
                let gin = g.concat(&[z, detached])?;
                let f = gate.forward(g, gin)?;
                let scaled = g.mul(x, f)?;
                tower.forward(g, scaled)?
            }
            Arch::Ppnet { gates, towers } => {
                let z = scenario_rows(g, ctx)?;
                let detached = g.stop_gradient(x)?;
                let gin = g.concat(&[z, detached])?;
                let mut inputs = vec![x];
                for gate in gates {
                    inputs.push(gate.forward(g, gin)?);
                }
                routing.route(g, &inputs, |g, s, ins| {
                    let tower = &towers[s];
                    let mut h = ins[0];
                    for (l, layer) in tower.layers.iter().enumerate() {
                        let out = layer.forward(g, h, Activation::Relu)?;
                        h = g.mul(out, ins[1 + l])?;
                    }
                    tower.head.as_ref().expect("towers have heads").forward(g, h, Activation::Identity)
                })?
            }
            Arch::Hamur {
                layers,
                adapters,
                hyper,
                head,
            } => {
                let table = g.param(SCENARIO_TABLE)?;
                routing.route(g, &[x], |g, s, ins| {
                    let z = g.embedding(table, &[s], "scenario")?;
                    let hv = hyper.0.forward(g, z, Activation::Relu)?;
                    let hv = hyper.1.forward(g, hv, Activation::Identity)?;
                    let mut h = ins[0];
                    for (l, (layer, adapter)) in layers.iter().zip(adapters).enumerate() {
                        h = layer.forward(g, h, Activation::Relu)?;
                        let part = g.slice_cols(hv, l * adapter.hyper_len(), adapter.hyper_len())?;
                        h = hamur_adapter(g, h, part, adapter)?;
                    }
                    head.forward(g, h, Activation::Identity)
                })?
            }
            Arch::M3oe {
                shared,
                shared_gate,
                domain,
                domain_gates,
                task,
                task_gate,
                fuse,
                tower,
            } => {
                let run = |g: &mut Graph<T>, es: &[Linear]| -> Result<Vec<NodeId>> {
                    es.iter().map(|e| e.forward(g, x, Activation::Relu)).collect()
                };
                let sh = run(g, shared)?;
                let gl = shared_gate.forward(g, x, Activation::Identity)?;
                let shared_mix = moe_mix(g, &sh, gl)?;
                let mut inputs = vec![x];
                inputs.extend(run(g, domain)?);
                let domain_mix = routing.route(g, &inputs, |g, s, ins| {
                    let gl = domain_gates[s].forward(g, ins[0], Activation::Identity)?;
                    moe_mix(g, &ins[1..], gl)
                })?;
                let tk = run(g, task)?;
                let gl = task_gate.forward(g, x, Activation::Identity)?;
                let task_mix = moe_mix(g, &tk, gl)?;
                let first = fuse2(g, &fuse.0, shared_mix, domain_mix)?;
                let fused = fuse2(g, &fuse.1, first, task_mix)?;
                tower.forward(g, fused)?
            }
        };
        Ok((logits, None))
    }
}

/// Scenario embedding of every row.
fn scenario_rows<T: Scalar>(g: &mut Graph<T>, ctx: &Context<'_>) -> Result<NodeId> {
    let table = g.param(SCENARIO_TABLE)?;
    g.embedding(table, ctx.scenario_ids, "scenario")
}

/// 0/1 matrix copying each field weight onto every column of that field.
fn field_expansion<T: Scalar>(widths: &[usize]) -> Vec<T> {
    let total: usize = widths.iter().sum();
    let mut out = vec![T::zero(); widths.len() * total];
    let mut col = 0;
    for (f, &w) in widths.iter().enumerate() {
        for c in col..col + w {
            out[f * total + c] = T::one();
        }
        col += w;
    }
    out
}

/// `softmax(w)[0] * a + softmax(w)[1] * b` for a learned `1 x 2` weight.
fn fuse2<T: Scalar>(g: &mut Graph<T>, path: &str, a: NodeId, b: NodeId) -> Result<NodeId> {
    let w = g.param(path)?;
    let w = g.softmax(w)?;
    let wa = g.slice_cols(w, 0, 1)?;
    let wb = g.slice_cols(w, 1, 1)?;
    let ta = g.mul(a, wa)?;
    let tb = g.mul(b, wb)?;
    g.add(ta, tb)
}
