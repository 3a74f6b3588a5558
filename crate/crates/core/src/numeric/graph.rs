//! Tape-based reverse-mode differentiation over row-major matrices.
//!
//! A [`Graph`] is built fresh for every forward pass. Parameter leaves borrow
//! their values from a [`ParameterStore`] instead of copying them, so the
//! store stays immutable for the lifetime of the graph and gradients come
//! back as a separate [`Gradients`] value.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::numeric::{Gradients, ParameterStore, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

enum Value<T> {
    Owned(Vec<T>),
    Param(usize),
}

/// How the right operand of a binary op broadcasts against the left.
#[derive(Clone, Copy, Debug)]
enum Broadcast {
    Same,
    Row,
    Col,
    Scalar,
}

enum Op<T> {
    Leaf,
    Embedding { table: NodeId, indices: Vec<usize> },
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId, Broadcast),
    Sub(NodeId, NodeId, Broadcast),
    Mul(NodeId, NodeId, Broadcast),
    Affine { x: NodeId, scale: T },
    Relu(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Softmax(NodeId),
    Concat(Vec<NodeId>),
    SliceCols { x: NodeId, start: usize },
    Gather { x: NodeId, rows: Vec<usize> },
    Scatter { parts: Vec<(NodeId, Vec<usize>)> },
    Reshape(NodeId),
    Clamp { x: NodeId, lo: T, hi: T },
    LayerNorm { x: NodeId, xhat: Vec<T>, inv_std: Vec<T> },
    SumAll(NodeId),
    BceWithLogits { logits: NodeId, labels: Vec<T> },
}

impl<T> Op<T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Embedding { .. } => "embedding",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Affine { .. } => "affine",
            Op::Relu(_) => "relu",
            Op::Sigmoid(_) => "sigmoid",
            Op::Tanh(_) => "tanh",
            Op::Softmax(_) => "softmax",
            Op::Concat(_) => "concat",
            Op::SliceCols { .. } => "slice_cols",
            Op::Gather { .. } => "gather",
            Op::Scatter { .. } => "scatter",
            Op::Reshape(_) => "reshape",
            Op::Clamp { .. } => "clamp",
            Op::LayerNorm { .. } => "layer_norm",
            Op::SumAll(_) => "sum",
            Op::BceWithLogits { .. } => "bce_with_logits",
        }
    }
}

struct Node<T> {
    rows: usize,
    cols: usize,
    value: Value<T>,
    op: Op<T>,
    needs_grad: bool,
}

pub struct Graph<'p, T: Scalar> {
    store: &'p ParameterStore<T>,
    nodes: Vec<Node<T>>,
    param_nodes: HashMap<usize, NodeId>,
}

impl<'p, T: Scalar> Graph<'p, T> {
    pub fn new(store: &'p ParameterStore<T>) -> Self {
        Self {
            store,
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
        }
    }

    pub fn store(&self) -> &'p ParameterStore<T> {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        let n = &self.nodes[id.0];
        (n.rows, n.cols)
    }

    pub fn value(&self, id: NodeId) -> &[T] {
        match &self.nodes[id.0].value {
            Value::Owned(v) => v,
            Value::Param(i) => self.store.entry(*i).1.tensor.values(),
        }
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    fn push(&mut self, rows: usize, cols: usize, values: Vec<T>, op: Op<T>, needs_grad: bool) -> Result<NodeId> {
        debug_assert_eq!(values.len(), rows * cols);
        let id = self.nodes.len();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node: id, op: op.name() });
        }
        self.nodes.push(Node {
            rows,
            cols,
            value: Value::Owned(values),
            op,
            needs_grad,
        });
        Ok(NodeId(id))
    }

    /// Constant input (never receives a gradient).
    pub fn input(&mut self, rows: usize, cols: usize, values: Vec<T>) -> Result<NodeId> {
        if values.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                op: "input",
                left: vec![rows, cols],
                right: vec![values.len()],
            });
        }
        self.push(rows, cols, values, Op::Leaf, false)
    }

    /// Leaf bound to a stored parameter. Repeated calls return the same node.
    pub fn param(&mut self, path: &str) -> Result<NodeId> {
        let idx = self
            .store
            .index_of(path)
            .ok_or_else(|| Error::ParamMismatch(format!("no parameter `{path}`")))?;
        if let Some(&id) = self.param_nodes.get(&idx) {
            return Ok(id);
        }
        let (_, entry) = self.store.entry(idx);
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            rows: entry.tensor.rows(),
            cols: entry.tensor.cols(),
            value: Value::Param(idx),
            op: Op::Leaf,
            needs_grad: entry.trainable,
        });
        self.param_nodes.insert(idx, id);
        Ok(id)
    }

    pub fn embedding(&mut self, table: NodeId, indices: &[usize], feature: &str) -> Result<NodeId> {
        let (vocab, d) = self.shape(table);
        if let Some(&bad) = indices.iter().find(|&&i| i >= vocab) {
            return Err(Error::IndexOutOfRange {
                feature: feature.to_string(),
                index: bad,
                vocab,
            });
        }
        let tv = self.value(table);
        let mut out = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            out.extend_from_slice(&tv[i * d..(i + 1) * d]);
        }
        let needs = self.needs(table);
        self.push(
            indices.len(),
            d,
            out,
            Op::Embedding {
                table,
                indices: indices.to_vec(),
            },
            needs,
        )
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        if k != k2 {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                left: vec![m, k],
                right: vec![k2, n],
            });
        }
        let mut out = vec![T::zero(); m * n];
        T::gemm(
            m,
            k,
            n,
            self.value(a),
            k as isize,
            1,
            self.value(b),
            n as isize,
            1,
            T::zero(),
            &mut out,
            n as isize,
            1,
        );
        let needs = self.needs(a) || self.needs(b);
        self.push(m, n, out, Op::MatMul(a, b), needs)
    }

    fn broadcast_kind(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<Broadcast> {
        let (r, c) = self.shape(a);
        let (rb, cb) = self.shape(b);
        Ok(match (rb, cb) {
            _ if rb == r && cb == c => Broadcast::Same,
            (1, 1) => Broadcast::Scalar,
            (1, x) if x == c => Broadcast::Row,
            (x, 1) if x == r => Broadcast::Col,
            _ => {
                return Err(Error::ShapeMismatch {
                    op,
                    left: vec![r, c],
                    right: vec![rb, cb],
                })
            }
        })
    }

    fn binary(&mut self, a: NodeId, b: NodeId, kind: u8) -> Result<NodeId> {
        let name = ["add", "sub", "mul"][kind as usize];
        let bc = self.broadcast_kind(name, a, b)?;
        let (r, c) = self.shape(a);
        let av = self.value(a);
        let bv = self.value(b);
        let mut out = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                let x = av[i * c + j];
                let y = bv[bidx(bc, i, j, c)];
                out.push(match kind {
                    0 => x + y,
                    1 => x - y,
                    _ => x * y,
                });
            }
        }
        let needs = self.needs(a) || self.needs(b);
        let op = match kind {
            0 => Op::Add(a, b, bc),
            1 => Op::Sub(a, b, bc),
            _ => Op::Mul(a, b, bc),
        };
        self.push(r, c, out, op, needs)
    }

    /// `a + b`, where `b` may be `a`-shaped, a row, a column or a scalar.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, 0)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, 1)
    }

    /// Elementwise product with the same broadcasting rules as [`Graph::add`].
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, 2)
    }

    /// `scale * x + shift`.
    pub fn affine(&mut self, x: NodeId, scale: f64, shift: f64) -> Result<NodeId> {
        let (r, c) = self.shape(x);
        let (s, t) = (T::lit(scale), T::lit(shift));
        let out = self.value(x).iter().map(|&v| s * v + t).collect();
        let needs = self.needs(x);
        self.push(r, c, out, Op::Affine { x, scale: s }, needs)
    }

    fn unary(&mut self, x: NodeId, f: impl Fn(T) -> T, op: Op<T>) -> Result<NodeId> {
        let (r, c) = self.shape(x);
        let out = self.value(x).iter().map(|&v| f(v)).collect();
        let needs = self.needs(x);
        self.push(r, c, out, op, needs)
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, |v| v.max(T::zero()), Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, |v| v.tanh(), Op::Tanh(x))
    }

    pub fn activate(&mut self, x: NodeId, act: Activation) -> Result<NodeId> {
        match act {
            Activation::Identity => Ok(x),
            Activation::Relu => self.relu(x),
            Activation::Sigmoid => self.sigmoid(x),
        }
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let (r, c) = self.shape(x);
        let mut out = self.value(x).to_vec();
        for row in out.chunks_mut(c) {
            crate::numeric::tensor::softmax_in_place(row);
        }
        let needs = self.needs(x);
        self.push(r, c, out, Op::Softmax(x), needs)
    }

    /// Concatenates along columns.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let Some(&first) = parts.first() else {
            return Err(Error::ShapeMismatch {
                op: "concat",
                left: vec![],
                right: vec![],
            });
        };
        let rows = self.shape(first).0;
        for &p in parts {
            if self.shape(p).0 != rows {
                return Err(Error::ShapeMismatch {
                    op: "concat",
                    left: vec![rows],
                    right: vec![self.shape(p).0],
                });
            }
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut out = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for &p in parts {
                let c = self.shape(p).1;
                out.extend_from_slice(&self.value(p)[i * c..(i + 1) * c]);
            }
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        self.push(rows, cols, out, Op::Concat(parts.to_vec()), needs)
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let (r, c) = self.shape(x);
        if start + len > c || len == 0 {
            return Err(Error::ShapeMismatch {
                op: "slice_cols",
                left: vec![r, c],
                right: vec![start, len],
            });
        }
        let xv = self.value(x);
        let mut out = Vec::with_capacity(r * len);
        for i in 0..r {
            out.extend_from_slice(&xv[i * c + start..i * c + start + len]);
        }
        let needs = self.needs(x);
        self.push(r, len, out, Op::SliceCols { x, start }, needs)
    }

    /// Selects rows (indices may repeat).
    pub fn gather_rows(&mut self, x: NodeId, rows: &[usize]) -> Result<NodeId> {
        let (r, c) = self.shape(x);
        if let Some(&bad) = rows.iter().find(|&&i| i >= r) {
            return Err(Error::ShapeMismatch {
                op: "gather_rows",
                left: vec![r, c],
                right: vec![bad],
            });
        }
        let xv = self.value(x);
        let mut out = Vec::with_capacity(rows.len() * c);
        for &i in rows {
            out.extend_from_slice(&xv[i * c..(i + 1) * c]);
        }
        let needs = self.needs(x);
        self.push(
            rows.len(),
            c,
            out,
            Op::Gather {
                x,
                rows: rows.to_vec(),
            },
            needs,
        )
    }

    /// Inverse of a partition of gathers: part `k` provides rows `idx_k` of an
    /// `n`-row output. The index lists must partition `0..n`.
    pub fn scatter_rows(&mut self, n: usize, parts: &[(NodeId, Vec<usize>)]) -> Result<NodeId> {
        let cols = parts.first().map(|(p, _)| self.shape(*p).1).ok_or(Error::ShapeMismatch {
            op: "scatter_rows",
            left: vec![n],
            right: vec![],
        })?;
        let mut seen = vec![false; n];
        for (p, idx) in parts {
            let (pr, pc) = self.shape(*p);
            if pr != idx.len() || pc != cols {
                return Err(Error::ShapeMismatch {
                    op: "scatter_rows",
                    left: vec![idx.len(), cols],
                    right: vec![pr, pc],
                });
            }
            for &i in idx {
                if i >= n || seen[i] {
                    return Err(Error::ShapeMismatch {
                        op: "scatter_rows",
                        left: vec![n],
                        right: vec![i],
                    });
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::ShapeMismatch {
                op: "scatter_rows",
                left: vec![n],
                right: vec![seen.iter().filter(|s| **s).count()],
            });
        }
        let mut out = vec![T::zero(); n * cols];
        for (p, idx) in parts {
            let pv = self.value(*p);
            for (k, &i) in idx.iter().enumerate() {
                out[i * cols..(i + 1) * cols].copy_from_slice(&pv[k * cols..(k + 1) * cols]);
            }
        }
        let needs = parts.iter().any(|(p, _)| self.needs(*p));
        self.push(
            n,
            cols,
            out,
            Op::Scatter {
                parts: parts.to_vec(),
            },
            needs,
        )
    }

    pub fn reshape(&mut self, x: NodeId, rows: usize, cols: usize) -> Result<NodeId> {
        let (r, c) = self.shape(x);
        if r * c != rows * cols {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                left: vec![r, c],
                right: vec![rows, cols],
            });
        }
        let out = self.value(x).to_vec();
        let needs = self.needs(x);
        self.push(rows, cols, out, Op::Reshape(x), needs)
    }

    /// Same values, no gradient flows back through this node.
    pub fn stop_gradient(&mut self, x: NodeId) -> Result<NodeId> {
        let (r, c) = self.shape(x);
        let out = self.value(x).to_vec();
        self.push(r, c, out, Op::Leaf, false)
    }

    /// Clamps to `[lo, hi]`; the gradient is zero where clamping is active.
    pub fn clamp(&mut self, x: NodeId, lo: f64, hi: f64) -> Result<NodeId> {
        let (lo, hi) = (T::lit(lo), T::lit(hi));
        self.unary(x, |v| v.max(lo).min(hi), Op::Clamp { x, lo, hi })
    }

    /// Row-wise normalization to zero mean and unit variance (no affine).
    pub fn layer_norm(&mut self, x: NodeId, eps: f64) -> Result<NodeId> {
        let (r, c) = self.shape(x);
        let eps = T::lit(eps);
        let nc = T::lit(c as f64);
        let xv = self.value(x);
        let mut xhat = Vec::with_capacity(r * c);
        let mut inv_std = Vec::with_capacity(r);
        for row in xv.chunks(c) {
            let mean = row.iter().copied().sum::<T>() / nc;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nc;
            let is = T::one() / (var + eps).sqrt();
            inv_std.push(is);
            xhat.extend(row.iter().map(|&v| (v - mean) * is));
        }
        let needs = self.needs(x);
        self.push(r, c, xhat.clone(), Op::LayerNorm { x, xhat, inv_std }, needs)
    }

    pub fn sum_all(&mut self, x: NodeId) -> Result<NodeId> {
        let s = self.value(x).iter().copied().sum::<T>();
        let needs = self.needs(x);
        self.push(1, 1, vec![s], Op::SumAll(x), needs)
    }

    /// Mean binary cross-entropy of `sigmoid(logits)` against `labels`, in the
    /// fused form `max(z,0) - z*y + ln(1 + exp(-|z|))`.
    pub fn bce_with_logits(&mut self, logits: NodeId, labels: &[T]) -> Result<NodeId> {
        let (r, c) = self.shape(logits);
        if c != 1 || r != labels.len() {
            return Err(Error::ShapeMismatch {
                op: "bce_with_logits",
                left: vec![r, c],
                right: vec![labels.len(), 1],
            });
        }
        let z = self.value(logits);
        let total: T = z
            .iter()
            .zip(labels)
            .map(|(&z, &y)| z.max(T::zero()) - z * y + (-z.abs()).exp().ln_1p())
            .sum();
        let loss = total / T::lit(r.max(1) as f64);
        let needs = self.needs(logits);
        self.push(
            1,
            1,
            vec![loss],
            Op::BceWithLogits {
                logits,
                labels: labels.to_vec(),
            },
            needs,
        )
    }

    /// Reverse sweep from a scalar root. Returns dense gradients for every
    /// trainable parameter reached from `root`.
    pub fn backward(&self, root: NodeId) -> Result<Gradients<T>> {
        let (r, c) = self.shape(root);
        if r * c != 1 {
            return Err(Error::ShapeMismatch {
                op: "backward",
                left: vec![r, c],
                right: vec![1, 1],
            });
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..=root.0).map(|_| None).collect();
        grads[root.0] = Some(vec![T::one()]);
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].needs_grad {
                continue;
            }
            if let Some(pos) = g.iter().position(|v| !v.is_finite()) {
                let _ = pos;
                return Err(Error::NonFinite {
                    node: i,
                    op: self.nodes[i].op.name(),
                });
            }
            self.backprop_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        let mut out = Gradients::new(self.store.len());
        for (&pidx, &node) in &self.param_nodes {
            if let Some(g) = grads[node.0].take() {
                out.set(pidx, g);
            }
        }
        Ok(out)
    }

    fn accumulate(&self, grads: &mut [Option<Vec<T>>], id: NodeId, f: impl FnOnce(&mut [T])) {
        if !self.needs(id) {
            return;
        }
        let n = &self.nodes[id.0];
        let slot = grads[id.0].get_or_insert_with(|| vec![T::zero(); n.rows * n.cols]);
        f(slot);
    }

    fn backprop_node(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        let (rows, cols) = (node.rows, node.cols);
        let out = match &node.value {
            Value::Owned(v) => v.as_slice(),
            Value::Param(_) => &[],
        };
        match &node.op {
            Op::Leaf => {}
            Op::Embedding { table, indices } => {
                self.accumulate(grads, *table, |tg| {
                    for (k, &row) in indices.iter().enumerate() {
                        for j in 0..cols {
                            tg[row * cols + j] += g[k * cols + j];
                        }
                    }
                });
            }
            Op::MatMul(a, b) => {
                let (m, k) = self.shape(*a);
                let n = cols;
                if self.needs(*a) {
                    let bv = self.value(*b);
                    // dA = dC * B^T
                    self.accumulate(grads, *a, |ga| {
                        T::gemm(m, n, k, g, n as isize, 1, bv, 1, n as isize, T::one(), ga, k as isize, 1);
                    });
                }
                if self.needs(*b) {
                    let av = self.value(*a);
                    // dB = A^T * dC
                    self.accumulate(grads, *b, |gb| {
                        T::gemm(k, m, n, av, 1, k as isize, g, n as isize, 1, T::one(), gb, n as isize, 1);
                    });
                }
            }
            Op::Add(a, b, bc) | Op::Sub(a, b, bc) => {
                let sign = if matches!(node.op, Op::Sub(..)) { -T::one() } else { T::one() };
                self.accumulate(grads, *a, |ga| {
                    for (x, &y) in ga.iter_mut().zip(g) {
                        *x += y;
                    }
                });
                self.accumulate(grads, *b, |gb| {
                    for r in 0..rows {
                        for c in 0..cols {
                            gb[bidx(*bc, r, c, cols)] += sign * g[r * cols + c];
                        }
                    }
                });
            }
            Op::Mul(a, b, bc) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                self.accumulate(grads, *a, |ga| {
                    for r in 0..rows {
                        for c in 0..cols {
                            ga[r * cols + c] += g[r * cols + c] * bv[bidx(*bc, r, c, cols)];
                        }
                    }
                });
                self.accumulate(grads, *b, |gb| {
                    for r in 0..rows {
                        for c in 0..cols {
                            gb[bidx(*bc, r, c, cols)] += g[r * cols + c] * av[r * cols + c];
                        }
                    }
                });
            }
            Op::Affine { x, scale } => {
                self.accumulate(grads, *x, |gx| {
                    for (d, &y) in gx.iter_mut().zip(g) {
                        *d += *scale * y;
                    }
                });
            }
            Op::Relu(x) => {
                self.accumulate(grads, *x, |gx| {
                    for ((d, &y), &o) in gx.iter_mut().zip(g).zip(out) {
                        if o > T::zero() {
                            *d += y;
                        }
                    }
                });
            }
            Op::Sigmoid(x) => {
                self.accumulate(grads, *x, |gx| {
                    for ((d, &y), &o) in gx.iter_mut().zip(g).zip(out) {
                        *d += y * o * (T::one() - o);
                    }
                });
            }
            Op::Tanh(x) => {
                self.accumulate(grads, *x, |gx| {
                    for ((d, &y), &o) in gx.iter_mut().zip(g).zip(out) {
                        *d += y * (T::one() - o * o);
                    }
                });
            }
            Op::Softmax(x) => {
                self.accumulate(grads, *x, |gx| {
                    for r in 0..rows {
                        let o = &out[r * cols..(r + 1) * cols];
                        let gy = &g[r * cols..(r + 1) * cols];
                        let dot: T = o.iter().zip(gy).map(|(&a, &b)| a * b).sum();
                        for c in 0..cols {
                            gx[r * cols + c] += o[c] * (gy[c] - dot);
                        }
                    }
                });
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let pc = self.shape(p).1;
                    self.accumulate(grads, p, |gp| {
                        for r in 0..rows {
                            for c in 0..pc {
                                gp[r * pc + c] += g[r * cols + offset + c];
                            }
                        }
                    });
                    offset += pc;
                }
            }
            Op::SliceCols { x, start } => {
                let xc = self.shape(*x).1;
                self.accumulate(grads, *x, |gx| {
                    for r in 0..rows {
                        for c in 0..cols {
                            gx[r * xc + start + c] += g[r * cols + c];
                        }
                    }
                });
            }
            Op::Gather { x, rows: idx } => {
                self.accumulate(grads, *x, |gx| {
                    for (k, &r) in idx.iter().enumerate() {
                        for c in 0..cols {
                            gx[r * cols + c] += g[k * cols + c];
                        }
                    }
                });
            }
            Op::Scatter { parts } => {
                for (p, idx) in parts {
                    self.accumulate(grads, *p, |gp| {
                        for (k, &r) in idx.iter().enumerate() {
                            for c in 0..cols {
                                gp[k * cols + c] += g[r * cols + c];
                            }
                        }
                    });
                }
            }
            Op::Reshape(x) => {
                self.accumulate(grads, *x, |gx| {
                    for (d, &y) in gx.iter_mut().zip(g) {
                        *d += y;
                    }
                });
            }
            Op::Clamp { x, lo, hi } => {
                let xv = self.value(*x);
                self.accumulate(grads, *x, |gx| {
                    for ((d, &y), &v) in gx.iter_mut().zip(g).zip(xv) {
                        if v > *lo && v < *hi {
                            *d += y;
                        }
                    }
                });
            }
            Op::LayerNorm { x, xhat, inv_std } => {
                let nc = T::lit(cols as f64);
                self.accumulate(grads, *x, |gx| {
                    for r in 0..rows {
                        let gy = &g[r * cols..(r + 1) * cols];
                        let xh = &xhat[r * cols..(r + 1) * cols];
                        let sum_g: T = gy.iter().copied().sum();
                        let sum_gx: T = gy.iter().zip(xh).map(|(&a, &b)| a * b).sum();
                        for c in 0..cols {
                            gx[r * cols + c] += inv_std[r] / nc * (nc * gy[c] - sum_g - xh[c] * sum_gx);
                        }
                    }
                });
            }
            Op::SumAll(x) => {
                let s = g[0];
                self.accumulate(grads, *x, |gx| {
                    for d in gx.iter_mut() {
                        *d += s;
                    }
                });
            }
            Op::BceWithLogits { logits, labels } => {
                let z = self.value(*logits);
                let scale = g[0] / T::lit(labels.len().max(1) as f64);
                self.accumulate(grads, *logits, |gz| {
                    for ((d, &zi), &y) in gz.iter_mut().zip(z).zip(labels) {
                        *d += scale * (sigmoid(zi) - y);
                    }
                });
            }
        }
    }
}

#[inline]
fn bidx(bc: Broadcast, r: usize, c: usize, cols: usize) -> usize {
    match bc {
        Broadcast::Same => r * cols + c,
        Broadcast::Row => c,
        Broadcast::Col => r,
        Broadcast::Scalar => 0,
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{Init, Tensor};

    fn store_with(entries: &[(&str, Tensor<f64>)]) -> ParameterStore<f64> {
        let mut s = ParameterStore::new(0);
        for (p, t) in entries {
            s.insert(p, t.clone(), true).unwrap();
        }
        s
    }

    #[test]
    fn embedding_copies_rows() {
        let s = store_with(&[("t", Tensor::from_rows(&[&[1., 2.], &[3., 4.], &[5., 6.]]).unwrap())]);
        let mut g = Graph::new(&s);
        let t = g.param("t").unwrap();
        let e = g.embedding(t, &[2], "f").unwrap();
        assert_eq!(g.value(e), &[5., 6.]);
        let err = g.embedding(t, &[3], "movie_id").unwrap_err();
        assert!(err.to_string().contains("movie_id") && err.to_string().contains('3'));
    }

    #[test]
    fn embedding_duplicate_indices_accumulate() {
        let s = store_with(&[("t", Tensor::from_rows(&[&[1., 2.], &[3., 4.]]).unwrap())]);
        let mut g = Graph::new(&s);
        let t = g.param("t").unwrap();
        let e = g.embedding(t, &[0, 0], "f").unwrap();
        let w = g.input(2, 2, vec![1., 1., 2., 2.]).unwrap();
        let p = g.mul(e, w).unwrap();
        let l = g.sum_all(p).unwrap();
        let grads = g.backward(l).unwrap();
        assert_eq!(grads.get(0).unwrap(), &[3., 3., 0., 0.]);
    }

    #[test]
    fn relu_clamps() {
        let s = ParameterStore::<f64>::new(0);
        let mut g = Graph::new(&s);
        let x = g.input(1, 2, vec![1., -1.]).unwrap();
        let y = g.relu(x).unwrap();
        assert_eq!(g.value(y), &[1., 0.]);
    }

    #[test]
    fn broadcast_shapes() {
        let s = ParameterStore::<f64>::new(0);
        let mut g = Graph::new(&s);
        let x = g.input(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let row = g.input(1, 3, vec![1., 0., -1.]).unwrap();
        let col = g.input(2, 1, vec![10., 100.]).unwrap();
        let sc = g.input(1, 1, vec![2.]).unwrap();
        let a = g.add(x, row).unwrap();
        assert_eq!(g.value(a), &[2., 2., 2., 5., 5., 5.]);
        let m = g.mul(x, col).unwrap();
        assert_eq!(g.value(m), &[10., 20., 30., 400., 500., 600.]);
        let m2 = g.mul(x, sc).unwrap();
        assert_eq!(g.value(m2), &[2., 4., 6., 8., 10., 12.]);
        let bad = g.input(3, 1, vec![0.; 3]).unwrap();
        assert!(g.add(x, bad).is_err());
    }

    #[test]
    fn scatter_inverts_gather() {
        let s = ParameterStore::<f64>::new(0);
        let mut g = Graph::new(&s);
        let x = g.input(4, 2, (0..8).map(f64::from).collect()).unwrap();
        let a = vec![0, 3];
        let b = vec![1, 2];
        let ga = g.gather_rows(x, &a).unwrap();
        let gb = g.gather_rows(x, &b).unwrap();
        let y = g.scatter_rows(4, &[(ga, a), (gb, b)]).unwrap();
        assert_eq!(g.value(y), g.value(x));
        assert!(g.scatter_rows(4, &[(ga, vec![0, 3])]).is_err());
    }

    #[test]
    fn stop_gradient_blocks() {
        let mut s = ParameterStore::<f64>::new(3);
        s.add("w", &[1, 3], Init::FanIn(3)).unwrap();
        let mut g = Graph::new(&s);
        let w = g.param("w").unwrap();
        let d = g.stop_gradient(w).unwrap();
        let l = g.sum_all(d).unwrap();
        let grads = g.backward(l).unwrap();
        assert!(grads.get(0).is_none());
    }

    #[test]
    fn non_finite_is_reported() {
        let s = ParameterStore::<f64>::new(0);
        let mut g = Graph::new(&s);
        let x = g.input(1, 1, vec![1e300]).unwrap();
        let err = g.mul(x, x).unwrap_err();
        assert!(matches!(err, Error::NonFinite { op: "mul", .. }));
    }

    #[test]
    fn bce_matches_direct_formula() {
        let s = ParameterStore::<f64>::new(0);
        let mut g = Graph::new(&s);
        let z = g.input(3, 1, vec![0.3, -2.0, 40.0]).unwrap();
        let l = g.bce_with_logits(z, &[1.0, 0.0, 0.0]).unwrap();
        let p = |z: f64| 1.0 / (1.0 + (-z).exp());
        let direct = (-(p(0.3)).ln() - (1.0 - p(-2.0)).ln() + 40.0 + (-40f64).exp().ln_1p()) / 3.0;
        assert!((g.value(l)[0] - direct).abs() < 1e-12);
    }
}
