//! Harness around the `qmetro` library: configuration files, tomography
//! input, deterministic report bundles, and the experiment runner behind
//! the `qmetro` command-line binary.

pub mod config;
pub mod experiment;
pub mod report;
pub mod tomography;
