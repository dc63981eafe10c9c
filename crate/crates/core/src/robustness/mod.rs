//! Baselines, effective/relative robustness and their uncertainty.
//!
//! Accuracies are mapped through a natural-log logit before fitting, so
//! reported slopes and intercepts are in natural-log logit units. Baseline
//! predictions do not depend on the log base; the coefficients do.

mod bootstrap;
mod correlation;
mod effective;
mod fit;
mod logit;

use thiserror::Error;

pub use bootstrap::{
    bootstrap_fit_band, default_x_grid, logit_x_grid, BandShape, BootstrapBand, BootstrapConfig, DEFAULT_GRID_POINTS, MAX_REDRAWS,
};
pub use correlation::{
    cross_shift_correlation_table, pearson_correlation, CorrelationEntry, ModelFilter, ShiftRobustness,
};
pub use effective::{
    effective_robustness, relative_robustness, relative_robustness_of, robustness_records, MeasuredPair,
    RobustnessRecord,
};
pub use fit::{beta_predict, fit_baseline, fit_piecewise, fit_piecewise_at, Baseline, FitPoint, LinearFit, PiecewiseFit};
pub use logit::{inverse_logit, logit, logit_clamped, DEFAULT_CLAMP_EPSILON};

#[derive(Debug, Error)]
pub enum RobustnessError {
    #[error("need at least {needed} usable points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("all standard accuracies are identical; the fit is singular")]
    SingularDesign,
    #[error("model {0:?} is not in the registry")]
    UnknownModel(String),
    #[error("knee model {0:?} has no accuracy point")]
    KneeModelMissing(String),
    #[error("piecewise segment {side} has {got} standard points, needs 2")]
    SideTooSmall { side: &'static str, got: usize },
    #[error("no base-model accuracy for {model:?} (base {base:?})")]
    MissingBase { model: String, base: Option<String> },
    #[error("correlation undefined: zero variance")]
    ZeroVariance,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("correlation between {x:?} and {y:?}: {source}")]
    Correlation {
        x: String,
        y: String,
        #[source]
        source: Box<RobustnessError>,
    },
    #[error("bootstrap needs at least one replicate")]
    NoReplicates,
    #[error("band level {0} is outside (0, 1)")]
    InvalidLevel(f64),
    #[error("all {0} bootstrap replicates were singular")]
    AllReplicatesSkipped(usize),
    #[error("cannot build worker pool: {0}")]
    ThreadPool(String),
}
