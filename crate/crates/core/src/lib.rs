//! Robust effect size index built on M-estimators.
//!
//! The index `S` is the square root of the per-observation noncentrality of
//! the robust (sandwich) Wald statistic for a block of target parameters.
//! This crate fits the supported estimating-equation families, assembles the
//! sandwich covariance, estimates `S`, converts it to and from classical
//! indices, solves power relations through the noncentral chi-squared
//! distribution, and runs the finite-sample simulation study.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below pin the common `f64` instantiations.

pub mod convert;
pub mod distributions;
pub mod effectsize;
pub mod error;
pub mod linalg;
pub mod models;
pub mod power;
pub mod sandwich;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use convert::{ConversionContext, EffectCategory, IndexKind};
pub use distributions::ChiSqParams;
pub use effectsize::{EffectSizeEstimate, RobustAnalysis};
pub use linalg::Matrix;
pub use models::{Dataset, Family, FittedModel};
pub use power::{PowerRow, PowerSpec, Unknown};
pub use sandwich::{SandwichCovariance, WaldResult};
pub use sim::{ErrorModel, SimConfig, SimResult};

/// Version tag written into every machine-readable output.
pub const SCHEMA_VERSION: u32 = 1;

pub type ChiSqParamsF64 = ChiSqParams<f64>;
pub type DatasetF64 = Dataset<f64>;
pub type FittedModelF64 = FittedModel<f64>;
pub type SandwichCovarianceF64 = SandwichCovariance<f64>;
pub type WaldResultF64 = WaldResult<f64>;
pub type EffectSizeEstimateF64 = EffectSizeEstimate<f64>;
pub type RobustAnalysisF64 = RobustAnalysis<f64>;
pub type ConversionContextF64 = ConversionContext<f64>;
pub type PowerSpecF64 = PowerSpec<f64>;
pub type PowerRowF64 = PowerRow<f64>;
pub type MatrixF64 = Matrix<f64>;

pub type ChiSqParamsF32 = ChiSqParams<f32>;
pub type DatasetF32 = Dataset<f32>;
pub type FittedModelF32 = FittedModel<f32>;
pub type SandwichCovarianceF32 = SandwichCovariance<f32>;
pub type EffectSizeEstimateF32 = EffectSizeEstimate<f32>;
pub type MatrixF32 = Matrix<f32>;
