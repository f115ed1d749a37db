//! Simulation and numerical verification toolkit for nearly unstable Hawkes
//! processes, mean-field Hawkes particle systems and their stochastic Volterra
//! scaling limits.

pub mod error;
pub mod export;
pub mod grid;
pub mod hawkes;
pub mod kernel;
pub mod limits;
pub mod meanfield;
pub mod resolvent;
pub mod rng;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use grid::Grid;
pub use kernel::{Kernel, KernelSpec, NearlyUnstableFamily};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
