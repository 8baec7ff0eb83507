//! Config-driven pipeline for the hyperentangled-source digital twin:
//! simulate counts, reconstruct both marginals, compute figures of merit and
//! write a report. Every artifact carries the config that produced it.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
