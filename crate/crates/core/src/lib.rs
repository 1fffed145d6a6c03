//! Tucker-structured topic models for three-way count tensors
//! (entity × entity × word), estimated by higher-order SVD followed by
//! simplex vertex hunting in each mode.
//!
//! The usual entry points are [`synth::generate`] for planted data,
//! [`estimator::fit`] for estimation and [`eval::loss_report`] for scoring
//! an estimate against the truth.

pub mod error;
pub mod estimator;
pub mod eval;
pub mod simplex;
pub mod spectral;
pub mod synth;
pub mod tensor;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Result, TtmError};
pub use estimator::{fit, FitConfig, FitResult, TuckerModel};
pub use eval::{loss_report, LossReport};
pub use synth::{generate, Counts, GenSpec, PlantedInstance};
pub use tensor::{Matrix, Tensor3};
