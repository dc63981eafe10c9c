//! The model × evaluation-setting prediction grid.
//!
//! A [`PredictionStore`] is built single-threaded from text files (truth
//! maps, prediction records) and is read-only afterwards; every query takes
//! `&self`, so a finished store can be shared freely across worker threads.
//!
//! Labels are interned per setting: a [`Label`] indexes that setting's class
//! space, and [`Label::OUT_OF_SPACE`] marks a prediction outside it (written
//! as `-1` in prediction files). Out-of-space predictions always score as
//! wrong.

mod frames;
mod registry;
mod setting;
mod store;
mod subset;
mod validate;

use std::fs;
use std::path::Path;

use thiserror::Error;

pub use frames::{FrameSet, DEFAULT_PM_K};
pub use registry::{ModelCategory, ModelRecord, ModelRegistry};
pub use setting::{EvalSetting, SettingKind, StorageFlavor};
pub use store::{Cell, Example, IngestSummary, Label, PredictionStore, SettingView, OUT_OF_SPACE_TOKEN};
pub use subset::{class_subset_view, ClassSubset};
pub(crate) use store::truth_labels;
pub use validate::{validate_grid, GridIssue, Misalignment, ValidationReport};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("duplicate model_id {0:?}")]
    DuplicateModel(String),
    #[error("model {model:?} names unknown base model {base:?}")]
    DanglingBaseModel { model: String, base: String },
    #[error("model {0:?} lists itself as its base model")]
    SelfBase(String),
    #[error("unknown setting {0:?}")]
    UnknownSetting(String),
    #[error("setting {0:?} is already registered")]
    DuplicateSetting(String),
    #[error("invalid setting {setting:?}: {message}")]
    InvalidSetting { setting: String, message: String },
    #[error("truth for setting {0:?} has not been loaded")]
    TruthMissing(String),
    #[error("truth for setting {0:?} was already loaded")]
    TruthAlreadyLoaded(String),
    #[error("{source_name}:{line}: record for setting {found:?} in a file ingested for {expected:?}")]
    SettingMismatch {
        source_name: String,
        line: usize,
        expected: String,
        found: String,
    },
    #[error("{source_name}:{line}: unknown example {example:?} for setting {setting:?}")]
    UnknownExample {
        source_name: String,
        line: usize,
        setting: String,
        example: String,
    },
    #[error("{source_name}:{line}: label {label:?} is outside the class space of {setting:?}")]
    LabelOutOfSpace {
        source_name: String,
        line: usize,
        setting: String,
        label: String,
    },
    #[error("{source_name}:{line}: duplicate record for model {model:?}, example {example:?}")]
    DuplicatePrediction {
        source_name: String,
        line: usize,
        model: String,
        example: String,
    },
    #[error("cell ({model:?}, {setting:?}) was already ingested")]
    DuplicateCell { model: String, setting: String },
    #[error(
        "cell ({model:?}, {setting:?}) is misaligned with the setting's grid: {missing} examples missing, {extra} extra"
    )]
    MisalignedCell {
        model: String,
        setting: String,
        missing: usize,
        extra: usize,
    },
    #[error("no cell for model {model:?} on setting {setting:?}")]
    MissingCell { model: String, setting: String },
    #[error("class subset {subset:?} contains labels outside the class space of {setting:?}: {missing:?}")]
    SubsetNotInClassSpace {
        subset: String,
        setting: String,
        missing: Vec<String>,
    },
    #[error("class subset {subset:?} leaves no examples of setting {setting:?}")]
    EmptyView { subset: String, setting: String },
    #[error("invalid frame set anchored at {anchor:?}: {message}")]
    InvalidFrameSet { anchor: String, message: String },
}

pub(crate) fn read_text(path: &Path) -> Result<String, StoreError> {
    fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Splits a comma-separated record and trims each field.
pub(crate) fn split_record(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

/// Iterates the non-blank, non-comment lines of a text file with 1-based
/// line numbers.
pub(crate) fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}
