//! Experiment runner for the hawkes-scaling toolkit: strict JSON configs,
//! deterministic artifacts with a hashed manifest, and the acceptance suite.

pub mod acceptance;
pub mod config;
pub mod runner;
