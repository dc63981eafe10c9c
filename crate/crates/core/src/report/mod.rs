//! Configuration, shift analyses and report emission.
//!
//! A run is described by one TOML file ([`AnalysisConfig`]); a [`Testbed`]
//! loads the data it names, [`run_shift_analysis`] turns one shift into a
//! [`ScatterReport`], and the `emit_*` functions write plot-ready files.
//! Output depends only on the input files, the config and the seed.

mod analysis;
mod config;
mod emit;
mod grid;
mod testbed;

use thiserror::Error;

use crate::metrics::MetricsError;
use crate::prediction_store::StoreError;
use crate::robustness::RobustnessError;

pub use analysis::{correlation_analysis, run_shift_analyses, run_shift_analysis, ScatterReport, ScatterRow};
pub use config::{
    AnalysisConfig, AxisScale, BootstrapSettings, CorrelationConfig, FitMode, Overrides, SettingConfig, ShiftPair,
    SubsetConfig, TestbedConfig,
};
pub use emit::{
    emit_band, emit_correlations, emit_fit, emit_grid, emit_scatter, format_g6, parse_scatter_csv, read_scatter_csv,
    scatter_to_string, to_stable_json, Format, CORRELATION_COLUMNS, SCATTER_COLUMNS,
};
pub use grid::{build_grid, GridReport};
pub use testbed::{AccuracyTable, Measured, Testbed};

/// Exit status for validation failures (bad config, bad arguments, grid
/// structure errors).
pub const EXIT_VALIDATION: i32 = 2;
/// Exit status for data failures (unreadable or inconsistent inputs).
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Store(Box<StoreError>),
    #[error("{source_name}:{line}: {message}")]
    Table {
        source_name: String,
        line: u64,
        message: String,
    },
    #[error("model {0:?} appears in the accuracy table but not in the registry")]
    UnknownModel(String),
    #[error("cell ({model:?}, {setting:?}): {source}")]
    Cell {
        model: String,
        setting: String,
        #[source]
        source: Box<MetricsError>,
    },
    #[error("shift {shift:?}: {source}")]
    Shift {
        shift: String,
        #[source]
        source: Box<RobustnessError>,
    },
    #[error(transparent)]
    Correlation(Box<RobustnessError>),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ReportError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ReportError::Config(_) => EXIT_VALIDATION,
            _ => EXIT_DATA,
        }
    }
}
