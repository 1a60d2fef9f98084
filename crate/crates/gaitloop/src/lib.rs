//! Predict plantar contact forces a fixed horizon ahead of time from inertial
//! measurements, detect gait events on the predicted forces, and drive an
//! assistance actuator early enough to cancel sensing/compute/response delays.
//!
//! The crate is organized as a pipeline:
//!
//! * [`types`] / [`window`] — sample clock, frame types, sliding input windows.
//! * [`ingest`] — trial CSV and corpus manifest I/O, resampling, training-pair
//!   extraction, train/test splits.
//! * [`syngait`] — deterministic synthetic gait generator with ground-truth
//!   phase labels and assistance events.
//! * [`neural`] — the LSTM + fully-connected predictor: inference, BPTT
//!   training with Adam, gradient checking, model serialization.
//! * [`phase`] — threshold-based phase classification and assistance-event
//!   detection, plus event-timing comparison.
//! * [`control`] — delay model, command scheduling, the closed-loop simulator,
//!   and inference-latency measurement.
//! * [`metrics`] — prediction-error reports, window/horizon sweeps, and
//!   event-timing summaries.

pub mod control;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod neural;
pub mod phase;
pub mod syngait;
pub mod types;
pub mod window;

pub use error::{Error, Result};
