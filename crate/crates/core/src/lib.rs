//! Behavioral modeling of discharge-based in-SRAM multipliers.
//!
//! The crate is organized as a pipeline:
//!
//! * [`device`] integrates a transistor-level reference model of the bit-line
//!   discharge and produces datasets for fitting.
//! * [`fit`] extracts the polynomial discharge, mismatch and energy models
//!   from such a dataset by (alternating) least squares.
//! * [`sim`] evaluates a 4-bit multiplier with the fitted models, orders of
//!   magnitude faster than integrating the reference model.
//! * [`explore`] sweeps circuit corners, ranks them by figure of merit and
//!   analyzes supply/temperature/mismatch robustness.
//! * [`dnn`] routes the multiplications of a small INT4 classifier through
//!   the multiplier model.

pub mod bench;
pub mod device;
pub mod dnn;
pub mod error;
pub mod explore;
pub mod fit;
pub mod io;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
