//! The unified model interface and its thirteen architectures.

mod arch;
pub mod blocks;
mod config;
mod input;
mod model;

pub use arch::AdlTrace;
pub use blocks::{
    adasparse_factors, adl_route, adl_update, binarization_factor, fusion_factor, fusion_factors, gate_nu, hamur_adapter,
    meta_generate, moe_mix, star_combine, GateNu, HamurAdapter, MetaUnit, Pruner, ScenarioRouting,
};
pub use config::{ModelConfig, ModelKind};
pub use input::InputLayer;
pub use model::{analytic_param_count, build_model, Forward, Model};
