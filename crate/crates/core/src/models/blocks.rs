//! Building blocks shared by several architectures.

use crate::error::{Error, Result};
use crate::numeric::{Graph, Init, Linear, NodeId, ParameterStore, Scalar};

/// Per-scenario positions of the rows of one batch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioRouting {
    pub scenario: Vec<usize>,
    pub groups: Vec<Vec<usize>>,
}

impl ScenarioRouting {
    pub fn new(scenario: &[u32], count: usize) -> Result<Self> {
        let mut groups = vec![Vec::new(); count];
        for (i, &s) in scenario.iter().enumerate() {
            let s = s as usize;
            if s >= count {
                return Err(Error::ScenarioOutOfRange { id: s, count });
            }
            groups[s].push(i);
        }
        Ok(Self {
            scenario: scenario.iter().map(|&s| s as usize).collect(),
            groups,
        })
    }

    pub fn len(&self) -> usize {
        self.scenario.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenario.is_empty()
    }

    /// Non-empty groups as `(scenario, rows)`.
    pub fn active(&self) -> impl Iterator<Item = (usize, &[usize])> {
        self.groups
            .iter()
            .enumerate()
            .filter(|(_, g)| !g.is_empty())
            .map(|(s, g)| (s, g.as_slice()))
    }

    /// Gathers each input's rows for every scenario, applies `f`, and scatters
    /// the per-scenario results back into batch order.
    pub fn route<T: Scalar, F>(&self, g: &mut Graph<T>, inputs: &[NodeId], mut f: F) -> Result<NodeId>
    where
        F: FnMut(&mut Graph<T>, usize, &[NodeId]) -> Result<NodeId>,
    {
        let mut parts = Vec::new();
        for (s, rows) in self.active() {
            let gathered = inputs
                .iter()
                .map(|&x| g.gather_rows(x, rows))
                .collect::<Result<Vec<_>>>()?;
            let out = f(g, s, &gathered)?;
            parts.push((out, rows.to_vec()));
        }
        g.scatter_rows(self.len(), &parts)
    }
}

/// `sum_e softmax(gate_logits)[:, e] * expert_e`.
pub fn moe_mix<T: Scalar>(g: &mut Graph<T>, experts: &[NodeId], gate_logits: NodeId) -> Result<NodeId> {
    let (n, k) = g.shape(gate_logits);
    if experts.is_empty() || k != experts.len() {
        return Err(Error::ShapeMismatch {
            op: "moe_mix",
            left: vec![n, k],
            right: vec![experts.len()],
        });
    }
    let h = g.shape(experts[0]).1;
    for &e in experts {
        if g.shape(e) != (n, h) {
            let (er, ec) = g.shape(e);
            return Err(Error::ShapeMismatch {
                op: "moe_mix",
                left: vec![n, h],
                right: vec![er, ec],
            });
        }
    }
    let w = g.softmax(gate_logits)?;
    let mut acc: Option<NodeId> = None;
    for (i, &e) in experts.iter().enumerate() {
        let wi = g.slice_cols(w, i, 1)?;
        let term = g.mul(e, wi)?;
        acc = Some(match acc {
            None => term,
            Some(a) => g.add(a, term)?,
        });
    }
    Ok(acc.expect("at least one expert"))
}

/// STAR's per-layer combination: `W = W_shared * W_scenario`, `b = b_shared + b_scenario`.
pub fn star_combine<T: Scalar>(
    g: &mut Graph<T>,
    w_shared: NodeId,
    b_shared: NodeId,
    w_scenario: NodeId,
    b_scenario: NodeId,
) -> Result<(NodeId, NodeId)> {
    for (a, b) in [(w_shared, w_scenario), (b_shared, b_scenario)] {
        if g.shape(a) != g.shape(b) {
            let (ar, ac) = g.shape(a);
            let (br, bc) = g.shape(b);
            return Err(Error::ShapeMismatch {
                op: "star_combine",
                left: vec![ar, ac],
                right: vec![br, bc],
            });
        }
    }
    Ok((g.mul(w_shared, w_scenario)?, g.add(b_shared, b_scenario)?))
}

/// Two-layer gate producing factors `2 * sigmoid(...)` in `(0, 2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GateNu {
    pub hidden: Linear,
    pub out: Linear,
}

impl GateNu {
    /// The output layer starts at zero, so every factor starts at exactly 1.
    pub fn register<T: Scalar>(store: &mut ParameterStore<T>, prefix: &str, input: usize, hidden: usize, output: usize) -> Result<Self> {
        Ok(Self {
            hidden: Linear::register(store, &format!("{prefix}.0"), input, hidden)?,
            out: Linear::register_with(store, &format!("{prefix}.1"), hidden, output, Init::ZEROS)?,
        })
    }

    pub fn param_count(input: usize, hidden: usize, output: usize) -> usize {
        Linear::param_count(input, hidden) + Linear::param_count(hidden, output)
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, x: NodeId) -> Result<NodeId> {
        gate_nu(g, x, self)
    }
}

pub fn gate_nu<T: Scalar>(g: &mut Graph<T>, x: NodeId, params: &GateNu) -> Result<NodeId> {
    let h = params.hidden.forward(g, x, crate::numeric::Activation::Relu)?;
    let s = params.out.forward(g, h, crate::numeric::Activation::Sigmoid)?;
    g.affine(s, 2.0, 0.0)
}

/// Meta unit generating a `rows x cols` weight and a `cols` bias from a
/// scenario representation `z`: `W = reshape(z V + c)`, `b = z U + e`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetaUnit {
    pub v: String,
    pub c: String,
    pub u: String,
    pub e: String,
    pub z_dim: usize,
    pub rows: usize,
    pub cols: usize,
}

impl MetaUnit {
    pub fn register<T: Scalar>(store: &mut ParameterStore<T>, prefix: &str, z_dim: usize, rows: usize, cols: usize) -> Result<Self> {
        let unit = Self {
            v: format!("{prefix}.v"),
            c: format!("{prefix}.c"),
            u: format!("{prefix}.u"),
            e: format!("{prefix}.e"),
            z_dim,
            rows,
            cols,
        };
        store.add(&unit.v, &[z_dim, rows * cols], Init::FanIn(z_dim))?;
        store.add(&unit.c, &[1, rows * cols], Init::FanIn(rows))?;
        store.add(&unit.u, &[z_dim, cols], Init::FanIn(z_dim))?;
        store.add(&unit.e, &[1, cols], Init::ZEROS)?;
        Ok(unit)
    }

    pub fn param_count(z_dim: usize, rows: usize, cols: usize) -> usize {
        (z_dim + 1) * rows * cols + (z_dim + 1) * cols
    }

    pub fn generate<T: Scalar>(&self, g: &mut Graph<T>, z: NodeId) -> Result<(NodeId, NodeId)> {
        let v = g.param(&self.v)?;
        let c = g.param(&self.c)?;
        let u = g.param(&self.u)?;
        let e = g.param(&self.e)?;
        meta_generate(g, z, (v, c, u, e), (self.rows, self.cols))
    }
}

/// `meta = (V, c, U, e)`; `z` must be a single row.
pub fn meta_generate<T: Scalar>(
    g: &mut Graph<T>,
    z: NodeId,
    meta: (NodeId, NodeId, NodeId, NodeId),
    target: (usize, usize),
) -> Result<(NodeId, NodeId)> {
    let (v, c, u, e) = meta;
    let (zr, zd) = g.shape(z);
    let (vr, vc) = g.shape(v);
    let (ur, uc) = g.shape(u);
    if zr != 1 || vr != zd || vc != target.0 * target.1 || ur != zd || uc != target.1 {
        return Err(Error::ShapeMismatch {
            op: "meta_generate",
            left: vec![target.0, target.1],
            right: vec![zr, zd, vr, vc, ur, uc],
        });
    }
    let flat = g.matmul(z, v)?;
    let flat = g.add(flat, c)?;
    let w = g.reshape(flat, target.0, target.1)?;
    let b = g.matmul(z, u)?;
    let b = g.add(b, e)?;
    Ok((w, b))
}

/// Scalar form of the Fusion pruning factor.
pub fn fusion_factor(u: f64, v: f64, alpha: f64, beta: f64) -> f64 {
    let scale = 2.0 * alpha * crate::numeric::sigmoid(u);
    scale * binarization_factor(v, beta)
}

/// `clamp(beta * (sigmoid(v) - 0.5) + 0.5, 0, 1)`.
pub fn binarization_factor(v: f64, beta: f64) -> f64 {
    (beta * (crate::numeric::sigmoid(v) - 0.5) + 0.5).clamp(0.0, 1.0)
}

/// Fusion factors from the scaling logits `u` and binarization logits `v`.
pub fn fusion_factors<T: Scalar>(g: &mut Graph<T>, u: NodeId, v: NodeId, alpha: f64, beta: f64) -> Result<NodeId> {
    let su = g.sigmoid(u)?;
    let scale = g.affine(su, 2.0 * alpha, 0.0)?;
    let sv = g.sigmoid(v)?;
    let shifted = g.affine(sv, beta, 0.5 - 0.5 * beta)?;
    let bin = g.clamp(shifted, 0.0, 1.0)?;
    g.mul(scale, bin)
}

/// AdaSparse pruner for one backbone layer of width `width`.
#[derive(Clone, Debug, PartialEq)]
pub struct Pruner {
    pub net: Linear,
    pub width: usize,
}

impl Pruner {
    pub fn register<T: Scalar>(store: &mut ParameterStore<T>, prefix: &str, z_dim: usize, input: usize, width: usize) -> Result<Self> {
        Ok(Self {
            net: Linear::register(store, prefix, z_dim + input, 2 * width)?,
            width,
        })
    }

    pub fn param_count(z_dim: usize, input: usize, width: usize) -> usize {
        Linear::param_count(z_dim + input, 2 * width)
    }
}

/// Per-dimension factors for one layer from `[scenario_emb, layer_input]`.
pub fn adasparse_factors<T: Scalar>(
    g: &mut Graph<T>,
    pruner: &Pruner,
    scenario_emb: NodeId,
    layer_input: NodeId,
    alpha: f64,
    beta: f64,
) -> Result<NodeId> {
    let x = g.concat(&[scenario_emb, layer_input])?;
    let uv = pruner.net.forward(g, x, crate::numeric::Activation::Identity)?;
    let u = g.slice_cols(uv, 0, pruner.width)?;
    let v = g.slice_cols(uv, pruner.width, pruner.width)?;
    fusion_factors(g, u, v, alpha, beta)
}

/// Routes each row of `reprs` (`n x h`) to the centroid of highest cosine
/// similarity; ties go to the lowest index. Zero rows go to cluster 0 and
/// are counted in the second return value.
pub fn adl_route<T: Scalar>(reprs: &[T], h: usize, centroids: &[T]) -> (Vec<usize>, usize) {
    let k = centroids.len() / h.max(1);
    let mut zero = 0;
    let ids = reprs
        .chunks(h)
        .map(|r| {
            let norm = r.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt();
            if norm == 0.0 {
                zero += 1;
                return 0;
            }
            let mut best = 0;
            let mut best_sim = f64::NEG_INFINITY;
            for j in 0..k {
                let c = &centroids[j * h..(j + 1) * h];
                let cn = c.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt();
                let dot: f64 = r.iter().zip(c).map(|(a, b)| a.as_f64() * b.as_f64()).sum();
                let sim = if cn == 0.0 { 0.0 } else { dot / (norm * cn) };
                if sim > best_sim {
                    best_sim = sim;
                    best = j;
                }
            }
            best
        })
        .collect();
    (ids, zero)
}

/// Moves each centroid with assigned rows toward the mean of their unit
/// vectors by `momentum`, then renormalizes it.
pub fn adl_update<T: Scalar>(centroids: &mut [T], h: usize, reprs: &[T], assign: &[usize], momentum: f64) {
    let k = centroids.len() / h.max(1);
    let mut sums = vec![0.0f64; k * h];
    let mut counts = vec![0usize; k];
    for (r, &j) in reprs.chunks(h).zip(assign) {
        let norm = r.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        counts[j] += 1;
        for (s, v) in sums[j * h..(j + 1) * h].iter_mut().zip(r) {
            *s += v.as_f64() / norm;
        }
    }
    for j in 0..k {
        if counts[j] == 0 {
            continue;
        }
        let c = &mut centroids[j * h..(j + 1) * h];
        let next: Vec<f64> = c
            .iter()
            .zip(&sums[j * h..(j + 1) * h])
            .map(|(old, s)| (1.0 - momentum) * old.as_f64() + momentum * s / counts[j] as f64)
            .collect();
        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (dst, v) in c.iter_mut().zip(next) {
                *dst = T::lit(v / norm);
            }
        }
    }
}

/// Rescales every `h`-wide row of `centroids` to unit norm.
pub fn normalize_rows<T: Scalar>(values: &mut [T], h: usize) {
    for row in values.chunks_mut(h) {
        let norm = row.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in row.iter_mut() {
                *v = T::lit(v.as_f64() / norm);
            }
        }
    }
}

/// Domain-shared bottleneck adapter for one backbone layer of width `width`.
/// The hyper-network supplies its `k x k` cores.
#[derive(Clone, Debug, PartialEq)]
pub struct HamurAdapter {
    pub down: String,
    pub up: String,
    pub gain: String,
    pub bias: String,
    pub width: usize,
    pub k: usize,
}

impl HamurAdapter {
    pub fn register<T: Scalar>(store: &mut ParameterStore<T>, prefix: &str, width: usize, k: usize) -> Result<Self> {
        let a = Self {
            down: format!("{prefix}.down"),
            up: format!("{prefix}.up"),
            gain: format!("{prefix}.ln.g"),
            bias: format!("{prefix}.ln.b"),
            width,
            k,
        };
        store.add(&a.down, &[width, k], Init::FanIn(width))?;
        store.add(&a.up, &[k, width], Init::FanIn(k))?;
        store.add(&a.gain, &[1, width], Init::ONES)?;
        store.add(&a.bias, &[1, width], Init::ZEROS)?;
        Ok(a)
    }

    pub fn param_count(width: usize, k: usize) -> usize {
        2 * width * k + 2 * width
    }

    /// Length of the hyper-network output one adapter consumes.
    pub fn hyper_len(&self) -> usize {
        2 * self.k * self.k
    }
}

/// `h + LayerNorm((relu(h (D H_d)) (H_u U))` with `[H_d | H_u]` read from `hyper`.
pub fn hamur_adapter<T: Scalar>(g: &mut Graph<T>, h: NodeId, hyper: NodeId, adapter: &HamurAdapter) -> Result<NodeId> {
    let k = adapter.k;
    let (hr, hc) = g.shape(hyper);
    if hr != 1 || hc != adapter.hyper_len() {
        return Err(Error::ParamMismatch(format!(
            "hyper-network output has {} values, adapter needs {}",
            hr * hc,
            adapter.hyper_len()
        )));
    }
    let hd = g.slice_cols(hyper, 0, k * k)?;
    let hd = g.reshape(hd, k, k)?;
    let hu = g.slice_cols(hyper, k * k, k * k)?;
    let hu = g.reshape(hu, k, k)?;
    let down = g.param(&adapter.down)?;
    let up = g.param(&adapter.up)?;
    let down = g.matmul(down, hd)?;
    let up = g.matmul(hu, up)?;
    let a = g.matmul(h, down)?;
    let a = g.relu(a)?;
    let branch = g.matmul(a, up)?;
    let norm = g.layer_norm(branch, 1e-5)?;
    let gain = g.param(&adapter.gain)?;
    let bias = g.param(&adapter.bias)?;
    let norm = g.mul(norm, gain)?;
    let norm = g.add(norm, bias)?;
    g.add(h, norm)
}
