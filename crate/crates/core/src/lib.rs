//! Adaptive pointwise estimation of a conditional density `f(y | x)`.
//!
//! Two estimators are provided, both tuned at a single point `x` by the
//! Goldenshluger–Lepski comparison rule:
//!
//! * [`kernel_gl`]: a Gaussian product-kernel estimator, normalised by an
//!   estimate of the design density, with the bandwidth pair selected from a
//!   grid;
//! * [`projection_gl`]: a least-squares projection on piecewise Legendre
//!   bases, with the dyadic resolution pair selected.
//!
//! [`sampling`] draws the four simulation designs, [`marginal`] estimates the
//! design density on an independent half-sample, and [`evaluation`] computes
//! integrated squared errors and Monte-Carlo risk tables.

mod error;
pub mod evaluation;
pub mod gauss;
pub mod kernel_gl;
pub mod legendre;
pub mod marginal;
pub mod projection_gl;
pub mod quadrature;
pub mod sampling;
pub mod selection;

/// Library version, echoed into run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use evaluation::{mse, run_cell, EstimatorKind, RiskConfig, RiskReport};
pub use kernel_gl::{gl_select_bandwidth, Bandwidth2, BandwidthGrid, GridMode, KernelCurve};
pub use marginal::{gl_select_marginal, oracle_marginal, MarginalConfig, MarginalEstimate};
pub use projection_gl::{gl_select_model, BasisSpec, ModelIndex, PenaltyForm, ProjectionFit};
pub use sampling::{generate, Example, ExampleId, Noise, ObservationSet};
pub use selection::{SelectionTrace, TraceRecord};
