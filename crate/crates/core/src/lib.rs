//! Simulation and certification toolkit for time-bin / frequency-bin
//! hyperentangled photon pairs from a pair of coherently pumped microrings.
//!
//! The pipeline runs `device` -> `state` -> `analyzers` -> `counts` ->
//! `tomo` -> `metrics`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analyzers;
pub mod counts;
pub mod device;
pub mod hilbert;
pub mod metrics;
pub mod state;
pub mod tomo;

pub use hilbert::{DensityMatrix, Ket, Layout, Observable, Pauli, Subsystem};
