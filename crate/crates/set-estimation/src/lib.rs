pub mod checkpoint;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod mlp;
pub mod nn;
pub mod plot;
pub mod reset;
pub mod rewards;
pub mod rng;
pub mod runconfig;
pub mod set;
pub mod trajgen;
mod wire;

pub use error::{Error, Result};
