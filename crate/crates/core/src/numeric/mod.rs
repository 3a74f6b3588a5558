//! Deterministic dense math with reverse-mode gradients and Adam.

mod adam;
pub mod checkpoint;
mod gradcheck;
mod graph;
mod init;
pub mod nn;
mod params;
mod scalar;
pub(crate) mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use graph::{sigmoid, Activation, Graph, NodeId};
pub use nn::{dense_layer, Linear, Mlp};
pub use init::{derive_seed, init_values, splitmix64, Init};
pub use params::{Gradients, ParamEntry, ParameterStore};
pub use scalar::{Dtype, Scalar};
pub use tensor::Tensor;
