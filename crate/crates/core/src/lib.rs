//! Stepped-frequency waveform reflectometry.
//!
//! The pipeline runs: [`line_model`] (exact line and reflector physics) →
//! [`waveform`] (burst-train design, synthesis, segmentation) →
//! [`channel_sim`] (reflected signal through the line) → [`frf_estimator`]
//! (per-burst sine fits) → [`fault_analysis`] (cable characterization and
//! fault location).

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel_sim;
pub mod error;
pub mod experiments;
pub mod fault_analysis;
pub mod frf_estimator;
pub mod io;
pub mod line_model;
pub mod phase;
pub mod waveform;

pub use error::{Result, SfwrError};
pub use line_model::{Impedance, Line, Reflector, ReflectorKind, RlgcProfile};
pub use waveform::SfwrPlan;
