//! Learning-to-rank from biased implicit feedback.
//!
//! This crate provides the building blocks for training and evaluating
//! linear rankers on click logs that suffer from position bias:
//!
//! - [`dataset`]: LETOR/SVMlight corpora, relevance binarization, and a
//!   synthetic full-information generator.
//! - [`ranking`]: linear scoring, deterministic ranking, and the
//!   sum-of-relevant-ranks risk.
//! - [`click`]: a position-based click simulator with examination
//!   probabilities `(1/rank)^eta` and click noise.
//! - [`propensity`]: swap-intervention experiments that recover the
//!   examination probabilities, plus smoothing and log relabeling.
//! - [`estimator`]: naive, inverse-propensity-scored (IPS), and clipped-IPS
//!   risk estimates from click logs, with exact small-instance expectations.
//! - [`learning`]: propensity-weighted pairwise hinge training (naive,
//!   propensity-weighted, and full-information variants) with
//!   cross-validation.
//! - [`experiment`]: end-to-end sweep pipelines (learning curves, bias,
//!   noise, and misspecification sweeps) emitting CSV rows.
//!
//! All numeric kernels are generic over the scalar type via [`scalar::Real`];
//! the aliases below fix the common double-precision configuration.

pub mod click;
pub mod dataset;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod learning;
pub mod propensity;
pub mod ranking;
pub mod scalar;

pub use error::Error;
pub use scalar::Real;

/// Double-precision dataset.
pub type Dataset64 = dataset::Dataset<f64>;
/// Double-precision linear scoring model.
pub type LinearModel64 = ranking::LinearModel<f64>;
/// Double-precision click log.
pub type ClickLog64 = click::ClickLog<f64>;
/// Double-precision rank-indexed examination probabilities.
pub type PropensityModel64 = propensity::PropensityModel<f64>;
