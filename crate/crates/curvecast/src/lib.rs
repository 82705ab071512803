//! Learning-curve extrapolation for classifier experiments.
//!
//! Given replicated accuracy measurements at a handful of training-set
//! sizes, this crate fits the inverse power law `y = 100 + b1 * x^b2` by
//! weighted nonlinear least squares and inverts the fitted curve to answer
//! the practical question: *how much training data is needed to reach a
//! target accuracy?*
//!
//! The pieces:
//!
//! - [`model`] - the curve itself: evaluation, analytic Jacobian, inversion.
//! - [`fit`] - Levenberg-Marquardt minimization of the weighted SSE, plus a
//!   brute-force grid oracle for verification.
//! - [`observations`] - CSV ingestion, per-size aggregation, weight schemes
//!   (uniform, manual, inverse-variance).
//! - [`predict`] - forward/inverse predictions, curve sampling, bootstrap
//!   percentile intervals.
//! - [`synth`] - synthetic experiments with size-dependent noise, used both
//!   as a stand-in for real training pipelines and as a recovery oracle.
//! - [`plot`] / [`cli`] - SVG rendering and the `curvecast` command-line
//!   tool.
//!
//! Every random draw in the crate comes from the ChaCha8 generator with an
//! explicit 64-bit seed, so simulations and bootstrap runs are reproducible
//! across platforms and releases.

pub mod cli;
pub mod fit;
pub mod model;
pub mod observations;
pub mod plot;
pub mod predict;
pub mod synth;

pub use fit::{fit, grid_search_fit, weighted_sse, FitOptions, FitResult};
pub use model::{CurveParams, JacobianRow, ModelError};
pub use observations::{
    aggregate, materialize_weights, parse_observations, ObservationSet, WeightScheme, WeightVector,
};
pub use predict::{bootstrap, predict_accuracy, required_size, sample_curve, SizePrediction};
pub use synth::{generate, recovery_experiment, SynthSpec};
