use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::prediction_store::{ModelCategory, SettingView};
use crate::robustness::{
    bootstrap_fit_band, cross_shift_correlation_table, fit_baseline, fit_piecewise, logit_x_grid, robustness_records,
    BandShape, Baseline, BootstrapBand, BootstrapConfig, CorrelationEntry, FitPoint, MeasuredPair, ModelFilter,
    RobustnessError, ShiftRobustness,
};

use super::config::{AxisScale, FitMode, ShiftPair};
use super::testbed::{view_accuracy, view_pmk, Measured, Testbed};
use super::ReportError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub model_id: String,
    pub category: ModelCategory,
    pub acc1: f64,
    pub acc1_ci: Option<(f64, f64)>,
    pub acc2: f64,
    pub acc2_ci: Option<(f64, f64)>,
    pub rho: f64,
    pub tau: Option<f64>,
}

/// Plot-ready data for one shift: per-model accuracies, the fitted baseline
/// and its bootstrap band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterReport {
    pub shift_id: String,
    pub standard_setting: String,
    pub shifted_setting: String,
    /// `top1` or `pm0`.
    pub x_measure: String,
    /// `top1` or `pm<k>`.
    pub y_measure: String,
    pub class_subset: Option<String>,
    /// Sorted by model_id.
    pub rows: Vec<ScatterRow>,
    pub fit: Baseline,
    pub band: Option<BootstrapBand>,
    pub axis_scale: AxisScale,
    /// Registry models lacking a cell on either side.
    pub missing_models: Vec<String>,
}

impl ScatterReport {
    pub fn robustness(&self) -> ShiftRobustness {
        ShiftRobustness {
            shift_id: self.shift_id.clone(),
            rho: self.rows.iter().map(|r| (r.model_id.clone(), r.rho)).collect(),
        }
    }
}

enum Side<'a> {
    Named(&'a str),
    Subset(Box<SettingView>),
    Frames { view: &'a SettingView, k: usize },
}

impl Side<'_> {
    fn measure(&self, tb: &Testbed, model: &str, level: f64) -> Result<Option<Measured>, ReportError> {
        match self {
            Side::Named(s) => tb.accuracy(model, s, level),
            Side::Subset(view) => view_accuracy(view, model, level),
            Side::Frames { view, k } => view_pmk(view, tb.frame_sets(view.id())?, model, *k, level),
        }
    }
}

fn shift_error(shift: &ShiftPair, source: RobustnessError) -> ReportError {
    match source {
        RobustnessError::KneeModelMissing(m) => ReportError::Config(format!(
            "shift {:?}: knee model {m:?} has no accuracy on both settings",
            shift.shift_id
        )),
        source => ReportError::Shift {
            shift: shift.shift_id.clone(),
            source: Box::new(source),
        },
    }
}

/// Measures every registry model on both sides of `shift`, fits the
/// baseline on the standard models and derives ρ, τ and the band.
pub fn run_shift_analysis(testbed: &Testbed, shift: &ShiftPair, master_seed: u64) -> Result<ScatterReport, ReportError> {
    shift.validate()?;
    let level = shift.ci_level.unwrap_or(testbed.ci_level);
    let (x_side, y_side, x_measure, y_measure) = match shift.pm_k {
        Some(k) => {
            let view = testbed.store.setting(&shift.standard_setting).map_err(|_| {
                ReportError::Config(format!(
                    "shift {:?}: pm-k needs predictions for {:?}",
                    shift.shift_id, shift.standard_setting
                ))
            })?;
            testbed.frame_sets(view.id())?;
            (
                Side::Frames { view, k: 0 },
                Side::Frames { view, k },
                "pm0".to_string(),
                format!("pm{k}"),
            )
        }
        None => {
            testbed.require_setting(&shift.standard_setting)?;
            testbed.require_setting(shift.shifted())?;
            let x = match &shift.class_subset {
                Some(sub) => Side::Subset(Box::new(testbed.subset_view(&shift.standard_setting, sub)?)),
                None => Side::Named(&shift.standard_setting),
            };
            (x, Side::Named(shift.shifted()), "top1".into(), "top1".into())
        }
    };

    let mut measured = Vec::new();
    let mut missing_models = Vec::new();
    let mut models: Vec<&str> = testbed.registry.iter().map(|r| r.model_id.as_str()).collect();
    models.sort_unstable();
    for model in models {
        let a1 = x_side.measure(testbed, model, level)?;
        let a2 = y_side.measure(testbed, model, level)?;
        match (a1, a2) {
            (Some(a1), Some(a2)) => measured.push(MeasuredPair {
                model_id: model.to_string(),
                acc1: a1.point,
                acc2: a2.point,
                acc1_ci: a1.ci,
                acc2_ci: a2.ci,
            }),
            _ => missing_models.push(model.to_string()),
        }
    }
    if !missing_models.is_empty() {
        log::info!(
            "shift {}: {} registry models lack a cell and are left out",
            shift.shift_id,
            missing_models.len()
        );
    }

    let points: Vec<FitPoint> = measured
        .iter()
        .map(|m| FitPoint::new(&m.model_id, m.acc1, m.acc2))
        .collect();
    let (fit, shape) = match shift.fit_mode {
        FitMode::Single => {
            let f = fit_baseline(&points, &testbed.registry).map_err(|e| shift_error(shift, e))?;
            (Baseline::Single(f), BandShape::Single)
        }
        FitMode::Piecewise => {
            let knee = shift.knee_model.as_deref().unwrap_or_default();
            let f = fit_piecewise(&points, &testbed.registry, knee).map_err(|e| shift_error(shift, e))?;
            let shape = BandShape::Piecewise { knee_acc1: f.knee_acc1 };
            (Baseline::Piecewise(f), shape)
        }
    };

    let band = if shift.bootstrap.replicates == 0 {
        None
    } else {
        let config = BootstrapConfig {
            replicates: shift.bootstrap.replicates,
            level: shift.bootstrap.level,
            master_seed,
            x_grid: Some(logit_x_grid(&points, shift.bootstrap.grid_points)),
            workers: shift.bootstrap.workers,
            shape,
        };
        Some(bootstrap_fit_band(&points, &testbed.registry, &config).map_err(|e| shift_error(shift, e))?)
    };

    let rows = robustness_records(&shift.shift_id, &measured, &fit, &testbed.registry)
        .into_iter()
        .map(|r| ScatterRow {
            category: testbed
                .registry
                .category(&r.model_id)
                .expect("measured models come from the registry"),
            model_id: r.model_id,
            acc1: r.acc1,
            acc1_ci: r.acc1_ci,
            acc2: r.acc2,
            acc2_ci: r.acc2_ci,
            rho: r.rho,
            tau: r.tau,
        })
        .collect();

    Ok(ScatterReport {
        shift_id: shift.shift_id.clone(),
        standard_setting: shift.standard_setting.clone(),
        shifted_setting: shift.shifted().to_string(),
        x_measure,
        y_measure,
        class_subset: shift.class_subset.clone(),
        rows,
        fit,
        band,
        axis_scale: shift.axis_scale,
        missing_models,
    })
}

/// Runs independent shift analyses concurrently; output follows input
/// order.
pub fn run_shift_analyses(
    testbed: &Testbed,
    shifts: &[ShiftPair],
    master_seed: u64,
) -> Result<Vec<ScatterReport>, ReportError> {
    shifts
        .par_iter()
        .map(|s| run_shift_analysis(testbed, s, master_seed))
        .collect()
}

/// Correlations of ρ between `rows` and `cols` shifts. Bands are not
/// needed for this and are skipped.
pub fn correlation_analysis(
    testbed: &Testbed,
    rows: &[ShiftPair],
    cols: &[ShiftPair],
    filter: ModelFilter,
) -> Result<Vec<CorrelationEntry>, ReportError> {
    let without_band = |s: &ShiftPair| {
        let mut s = s.clone();
        s.bootstrap.replicates = 0;
        s
    };
    let rows: Vec<ShiftPair> = rows.iter().map(without_band).collect();
    let cols: Vec<ShiftPair> = cols.iter().map(without_band).collect();
    let robust = |shifts: &[ShiftPair]| -> Result<Vec<ShiftRobustness>, ReportError> {
        Ok(run_shift_analyses(testbed, shifts, 0)?
            .iter()
            .map(ScatterReport::robustness)
            .collect())
    };
    cross_shift_correlation_table(&robust(&rows)?, &robust(&cols)?, &testbed.registry, filter)
        .map_err(|e| ReportError::Correlation(Box::new(e)))
}
