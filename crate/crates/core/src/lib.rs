//! Multi-scenario click-through-rate benchmark: dataset ingestion, thirteen
//! models behind one interface, a deterministic training loop and
//! scenario-wise evaluation.

pub mod data;
pub mod error;
pub mod evaluation;
pub mod models;
pub mod numeric;
pub mod training;

pub use error::{Error, Result};

/// Recorded in every resolved run config.
pub const VERSION: &str = concat!("swr ", env!("CARGO_PKG_VERSION"));
