//! Layer building blocks shared by every architecture.

use crate::error::Result;
use crate::numeric::{Activation, Graph, Init, NodeId, ParameterStore, Scalar};

/// `act(x W + b)`.
pub fn dense_layer<T: Scalar>(g: &mut Graph<T>, x: NodeId, w: NodeId, b: NodeId, act: Activation) -> Result<NodeId> {
    let xw = g.matmul(x, w)?;
    let z = g.add(xw, b)?;
    g.activate(z, act)
}

/// Paths of one affine layer's weight and bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub w: String,
    pub b: String,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn register<T: Scalar>(store: &mut ParameterStore<T>, prefix: &str, input: usize, output: usize) -> Result<Self> {
        Self::register_with(store, prefix, input, output, Init::FanIn(input))
    }

    pub fn register_with<T: Scalar>(
        store: &mut ParameterStore<T>,
        prefix: &str,
        input: usize,
        output: usize,
        init: Init,
    ) -> Result<Self> {
        let w = format!("{prefix}.w");
        let b = format!("{prefix}.b");
        store.add(&w, &[input, output], init)?;
        store.add(&b, &[output], Init::ZEROS)?;
        Ok(Self { w, b, input, output })
    }

    pub fn param_count(input: usize, output: usize) -> usize {
        input * output + output
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, x: NodeId, act: Activation) -> Result<NodeId> {
        let w = g.param(&self.w)?;
        let b = g.param(&self.b)?;
        dense_layer(g, x, w, b, act)
    }
}

/// Stack of relu layers, optionally followed by a linear scalar head.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub head: Option<Linear>,
}

impl Mlp {
    pub fn register<T: Scalar>(store: &mut ParameterStore<T>, prefix: &str, input: usize, dims: &[usize], head: bool) -> Result<Self> {
        let mut layers = Vec::with_capacity(dims.len());
        let mut prev = input;
        for (i, &d) in dims.iter().enumerate() {
            layers.push(Linear::register(store, &format!("{prefix}.{i}"), prev, d)?);
            prev = d;
        }
        let head = if head {
            Some(Linear::register(store, &format!("{prefix}.out"), prev, 1)?)
        } else {
            None
        };
        Ok(Self { layers, head })
    }

    pub fn param_count(input: usize, dims: &[usize], head: bool) -> usize {
        let mut prev = input;
        let mut n = 0;
        for &d in dims {
            n += Linear::param_count(prev, d);
            prev = d;
        }
        if head {
            n += Linear::param_count(prev, 1);
        }
        n
    }

    pub fn output_dim(&self) -> usize {
        match &self.head {
            Some(_) => 1,
            None => self.layers.last().map_or(0, |l| l.output),
        }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, x: NodeId) -> Result<NodeId> {
        let mut h = x;
        for l in &self.layers {
            h = l.forward(g, h, Activation::Relu)?;
        }
        if let Some(head) = &self.head {
            h = head.forward(g, h, Activation::Identity)?;
        }
        Ok(h)
    }
}
