//! Estimation of a constant signal from subtractively-dithered, uniformly
//! quantized Gaussian measurements.
//!
//! The crate is organized bottom-up:
//!
//! * [`numerics`]: special functions, quadrature, root finding, golden-section
//!   search and reproducible random streams.
//! * [`quantize`]: the midtread quantizer and measurement simulation.
//! * [`ggapprox`]: generalized Gaussian distribution and kurtosis-matched
//!   shape fitting for the Gaussian-plus-uniform total noise.
//! * [`estimators`]: the nine location estimators.
//! * [`bounds`]: closed-form and numerically integrated performance bounds and
//!   the regime boundaries.
//! * [`harness`]: Monte Carlo sweeps and CSV output.

// `!(x > 0.0)` is used on purpose: unlike `x <= 0.0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Tabulated approximation coefficients are kept exactly as published.
#![allow(clippy::excessive_precision)]

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod ggapprox;
pub mod harness;
pub mod numerics;
pub mod quantize;

pub use bounds::{BoundCurve, Regime, RegimeBoundaries};
pub use error::{Error, Result};
pub use estimators::{EmTrace, EstimatorKind, WeightVector};
pub use ggapprox::{GGParams, ShapeFit};
pub use harness::{SweepConfig, SweepResult, SweepRow};
pub use numerics::{RandomStream, ToleranceConfig};
pub use quantize::{BatchKind, MeasurementBatch, QuantizerSpec, SignalModel, TieRule};
