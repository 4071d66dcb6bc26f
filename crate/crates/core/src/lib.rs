pub mod dataio;
pub mod ddr;
mod error;
pub mod graph;
pub mod linguistics;
pub mod psychnet;
pub mod semnet;
pub mod stats;
pub mod twin_eval;
pub mod twin_gen;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
