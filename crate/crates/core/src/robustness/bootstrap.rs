//! Percentile bootstrap bands for the baseline fit.
//!
//! Each replicate resamples the standard models with replacement and refits.
//! Replicate `i` draws from its own ChaCha stream `(master_seed, i)`, and
//! curves are merged by replicate index, so the band does not depend on the
//! number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::prediction_store::ModelRegistry;

use super::fit::{fit_points, piecewise_from_standard, standard_points, Baseline, FitPoint};
use super::logit::{inverse_logit, logit_clamped, DEFAULT_CLAMP_EPSILON};
use super::RobustnessError;

/// Redraws allowed for a replicate whose resample cannot be fit.
pub const MAX_REDRAWS: usize = 10;
pub const DEFAULT_GRID_POINTS: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BandShape {
    Single,
    Piecewise { knee_acc1: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub level: f64,
    pub master_seed: u64,
    /// Accuracy-space x values; defaults to [`default_x_grid`].
    pub x_grid: Option<Vec<f64>>,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    pub shape: BandShape,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 1000,
            level: 0.95,
            master_seed: 0,
            x_grid: None,
            workers: None,
            shape: BandShape::Single,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapBand {
    pub x_grid: Vec<f64>,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
    pub level: f64,
    pub replicates: usize,
    pub master_seed: u64,
    /// Replicates dropped after exhausting their redraws.
    pub skipped: usize,
}

/// 101 points evenly spaced in logit space across the observed acc1 range
/// of `points`, returned in accuracy space.
pub fn default_x_grid(points: &[FitPoint]) -> Vec<f64> {
    logit_x_grid(points, DEFAULT_GRID_POINTS)
}

/// `n` points evenly spaced in logit space across the acc1 range of
/// `points`.
pub fn logit_x_grid(points: &[FitPoint], n: usize) -> Vec<f64> {
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.acc1), hi.max(p.acc1))
    });
    if !lo.is_finite() {
        return Vec::new();
    }
    let (a, b) = (
        logit_clamped(lo, DEFAULT_CLAMP_EPSILON),
        logit_clamped(hi, DEFAULT_CLAMP_EPSILON),
    );
    let steps = n.saturating_sub(1).max(1) as f64;
    (0..n)
        .map(|i| inverse_logit(a + (b - a) * i as f64 / steps))
        .collect()
}

/// Linear-interpolation quantile of sorted data (the "type 7" definition).
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn fit_resample(sample: &[&FitPoint], shape: BandShape) -> Result<Baseline, RobustnessError> {
    match shape {
        BandShape::Single => fit_points(sample, DEFAULT_CLAMP_EPSILON).map(Baseline::Single),
        BandShape::Piecewise { knee_acc1 } => piecewise_from_standard(sample, knee_acc1).map(Baseline::Piecewise),
    }
}

fn replicate_curve(standard: &[&FitPoint], grid: &[f64], config: &BootstrapConfig, index: usize) -> Option<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
    rng.set_stream(index as u64);
    let n = standard.len();
    for _ in 0..=MAX_REDRAWS {
        let sample: Vec<&FitPoint> = (0..n).map(|_| standard[rng.random_range(0..n)]).collect();
        if let Ok(fit) = fit_resample(&sample, config.shape) {
            return Some(grid.iter().map(|&x| fit.predict(x)).collect());
        }
    }
    None
}

/// Pointwise percentile band of refitted baselines at `config.level`.
pub fn bootstrap_fit_band(
    points: &[FitPoint],
    registry: &ModelRegistry,
    config: &BootstrapConfig,
) -> Result<BootstrapBand, RobustnessError> {
    if config.replicates == 0 {
        return Err(RobustnessError::NoReplicates);
    }
    if !(config.level > 0.0 && config.level < 1.0) {
        return Err(RobustnessError::InvalidLevel(config.level));
    }
    let standard = standard_points(points, registry)?;
    // The full-data fit must exist for the band to mean anything.
    fit_resample(&standard, config.shape)?;
    let grid = config.x_grid.clone().unwrap_or_else(|| default_x_grid(points));

    let run = || -> Vec<Option<Vec<f64>>> {
        (0..config.replicates)
            .into_par_iter()
            .map(|i| replicate_curve(&standard, &grid, config, i))
            .collect()
    };
    let curves = match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| RobustnessError::ThreadPool(e.to_string()))?
            .install(run),
        None => run(),
    };
    let skipped = curves.iter().filter(|c| c.is_none()).count();
    let curves: Vec<Vec<f64>> = curves.into_iter().flatten().collect();
    if curves.is_empty() {
        return Err(RobustnessError::AllReplicatesSkipped(skipped));
    }
    if skipped > 0 {
        log::warn!("bootstrap skipped {skipped} of {} replicates", config.replicates);
    }

    let q_low = (1.0 - config.level) / 2.0;
    let mut low = Vec::with_capacity(grid.len());
    let mut high = Vec::with_capacity(grid.len());
    let mut column = Vec::with_capacity(curves.len());
    for j in 0..grid.len() {
        column.clear();
        column.extend(curves.iter().map(|c| c[j]));
        column.sort_by(f64::total_cmp);
        low.push(quantile_sorted(&column, q_low));
        high.push(quantile_sorted(&column, 1.0 - q_low));
    }
    Ok(BootstrapBand {
        x_grid: grid,
        low,
        high,
        level: config.level,
        replicates: config.replicates,
        master_seed: config.master_seed,
        skipped,
    })
}
