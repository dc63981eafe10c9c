//! Per-cell accuracy statistics.
//!
//! Everything here is a pure function of frozen store data, so cells can be
//! evaluated in any order or in parallel.

mod clopper_pearson;
mod pmk;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prediction_store::{SettingView, StoreError};

pub use clopper_pearson::{clopper_pearson, lower_tail, upper_tail, BISECTION_TOLERANCE, MAX_BISECTION_ITERATIONS};
pub use pmk::pmk_accuracy;

/// Interval level used for reported accuracies unless configured otherwise.
pub const DEFAULT_CI_LEVEL: f64 = 0.995;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("invalid counts: {correct} correct out of {total}")]
    InvalidCounts { correct: u64, total: u64 },
    #[error("confidence level {0} is outside (0, 1)")]
    InvalidLevel(f64),
    #[error("cell ({model:?}, {setting:?}) is empty")]
    EmptyCell { model: String, setting: String },
    #[error("no frame sets to score")]
    NoFrameSets,
    #[error("frame {frame:?} has no prediction from model {model:?}")]
    MissingPrediction { model: String, frame: String },
    #[error("frame set anchored at {anchor:?} has {neighbors} neighbors, more than 2k = {limit}")]
    TooManyNeighbors {
        anchor: String,
        neighbors: usize,
        limit: usize,
    },
    #[error("family has no available settings")]
    EmptyFamily,
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Point accuracy with its exact binomial interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyEstimate {
    pub correct: u64,
    pub total: u64,
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
}

impl AccuracyEstimate {
    pub fn from_counts(correct: u64, total: u64, level: f64) -> Result<Self, MetricsError> {
        let (ci_low, ci_high) = clopper_pearson(correct, total, level)?;
        Ok(Self {
            correct,
            total,
            point: correct as f64 / total as f64,
            ci_low,
            ci_high,
            level,
        })
    }
}

/// Fraction of a model's predictions on `view` that match the truth.
pub fn top1_accuracy(view: &SettingView, model_id: &str, level: f64) -> Result<AccuracyEstimate, MetricsError> {
    let cell = view.cell(model_id).ok_or_else(|| StoreError::MissingCell {
        model: model_id.to_string(),
        setting: view.id().to_string(),
    })?;
    if cell.is_empty() {
        return Err(MetricsError::EmptyCell {
            model: model_id.to_string(),
            setting: view.id().to_string(),
        });
    }
    let examples = view.examples();
    let correct = cell
        .predictions()
        .iter()
        .filter(|&&(e, pred)| !pred.is_out_of_space() && pred == examples[e as usize].label)
        .count() as u64;
    AccuracyEstimate::from_counts(correct, cell.len() as u64, level)
}

/// A group of settings averaged into one accuracy.
///
/// `Grouped` averages within each group first (e.g. the five severities of
/// one corruption) and then across groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Family {
    Flat(Vec<String>),
    Grouped(Vec<Vec<String>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyAccuracy {
    pub value: f64,
    /// Settings that contributed.
    pub used: usize,
    /// Settings skipped because their cell is absent.
    pub missing: Vec<String>,
}

/// Unweighted mean of per-setting point accuracies over a family. Settings
/// for which `accuracy_of` returns `None` are skipped with a warning.
pub fn aggregate_family_accuracy<F>(family: &Family, mut accuracy_of: F) -> Result<FamilyAccuracy, MetricsError>
where
    F: FnMut(&str) -> Option<f64>,
{
    let mut missing = Vec::new();
    let mut used = 0usize;
    let mut group_mean = |group: &[String], missing: &mut Vec<String>| -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for s in group {
            match accuracy_of(s) {
                Some(a) => {
                    sum += a;
                    n += 1;
                }
                None => missing.push(s.clone()),
            }
        }
        used += n;
        (n > 0).then(|| sum / n as f64)
    };
    let value = match family {
        Family::Flat(settings) => group_mean(settings, &mut missing),
        Family::Grouped(groups) => {
            let means: Vec<f64> = groups.iter().filter_map(|g| group_mean(g, &mut missing)).collect();
            (!means.is_empty()).then(|| means.iter().sum::<f64>() / means.len() as f64)
        }
    };
    if !missing.is_empty() {
        log::warn!("family average skips {} empty cell(s): {}", missing.len(), missing.join(", "));
    }
    value
        .map(|value| FamilyAccuracy { value, used, missing })
        .ok_or(MetricsError::EmptyFamily)
}
