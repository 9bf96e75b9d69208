//! Outage probability, ergodic rate and symbol error rate of interference
//! alignment over MIMO interference channels when transmitters only hold
//! quantized channel directions.
//!
//! The crate has two halves that check each other:
//!
//! * [`analysis`] evaluates exact closed forms built on Erlang mixtures
//!   ([`mixture`]) of the residual interference, plus perfect-CSI baselines,
//!   high/low-SNR limits and a feedback-bit planner.
//! * [`simulator`] draws Rayleigh channels, quantizes their directions, runs
//!   an alternating leakage-minimization IA solver and measures the SINR.
//!
//! [`cli`] wires both to scenario files and CSV sweeps.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod mixture;
pub mod quadrature;
pub mod simulator;
pub mod special_fn;

pub use analysis::{Bits, FeedbackConfig, Modulation, ModulationFamily, SystemConfig};
pub use error::{Error, Result};
pub use mixture::{ErlangMixture, GammaComponent, Parametrization, SourceSpec};
pub use simulator::MetricEstimate;
