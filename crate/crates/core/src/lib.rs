//! Vibration-based condition identification with transfer learning.
//!
//! The crate is organised the way the pipeline runs:
//!
//! * [`frame`] builds a planar portal frame with six semi-rigid joint springs,
//!   reduces spring stiffness per damage scenario and integrates impulse
//!   responses to produce labelled acceleration records.
//! * [`dataset`] holds those records and reads/writes the on-disk format.
//! * [`nn`] is a small CPU tensor engine with the layers a 1D CNN needs,
//!   cross-entropy loss, Adam with freeze masks and gradient checking.
//! * [`arch`] builds SHMnet-family networks, counts parameters, applies
//!   transfer strategies and stores checkpoints.
//! * [`harness`] runs pretraining, fine-tuning, evaluation and whole
//!   experiments.

pub mod arch;
pub mod dataset;
pub mod error;
pub mod frame;
pub mod harness;
pub mod hash;
pub mod nn;

pub use error::{Error, Result};
