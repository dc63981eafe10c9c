//! Robustness analysis for image classifiers under distribution shift.
//!
//! The crate is organised around the pipeline that turns raw per-example
//! predictions into robustness measurements:
//!
//! - [`prediction_store`]: model registry, evaluation settings, the
//!   model × setting prediction grid, frame sets and class subsets.
//! - [`metrics`]: top-1 accuracy, exact Clopper-Pearson intervals, pm-k
//!   consistency accuracy and family averages.
//! - [`robustness`]: logit-space baseline fits, effective and relative
//!   robustness, bootstrap bands and cross-shift correlations.
//! - [`corruptions`]: deterministic synthetic image corruptions.
//! - [`attacks`]: projected gradient descent against a differentiable
//!   classifier contract.
//! - [`report`]: configuration, shift analyses and bit-stable emission.

pub mod attacks;
pub mod corruptions;
pub mod metrics;
pub mod prediction_store;
pub mod report;
pub mod robustness;
pub mod seed;

pub use prediction_store::{ModelCategory, ModelRecord, ModelRegistry, PredictionStore};
