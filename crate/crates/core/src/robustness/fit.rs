use serde::{Deserialize, Serialize};

use crate::prediction_store::{ModelCategory, ModelRegistry};

use super::logit::{inverse_logit, logit_clamped, DEFAULT_CLAMP_EPSILON};
use super::RobustnessError;

/// One model's accuracy on the standard (`acc1`) and shifted (`acc2`) test
/// sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub model_id: String,
    pub acc1: f64,
    pub acc2: f64,
}

impl FitPoint {
    pub fn new(model_id: impl Into<String>, acc1: f64, acc2: f64) -> Self {
        Self {
            model_id: model_id.into(),
            acc1,
            acc2,
        }
    }
}

/// `logit(acc2) ≈ slope · logit(acc1) + intercept`, natural-log logits,
/// trained on standard models only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination in logit space.
    pub r_squared: f64,
    pub training_models: Vec<String>,
    pub x_clamp_epsilon: f64,
}

impl LinearFit {
    pub fn predict_logit(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    /// Baseline shifted accuracy at standard accuracy `acc1`.
    pub fn predict(&self, acc1: f64) -> f64 {
        inverse_logit(self.predict_logit(logit_clamped(acc1, self.x_clamp_epsilon)))
    }
}

/// Two independent fits split at the knee model's standard accuracy.
/// Models at exactly `knee_acc1` belong to `below`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseFit {
    pub below: LinearFit,
    pub above: LinearFit,
    pub knee_acc1: f64,
}

impl PiecewiseFit {
    pub fn segment(&self, acc1: f64) -> &LinearFit {
        if acc1 <= self.knee_acc1 {
            &self.below
        } else {
            &self.above
        }
    }

    pub fn predict(&self, acc1: f64) -> f64 {
        self.segment(acc1).predict(acc1)
    }
}

/// The baseline β for one shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Baseline {
    Single(LinearFit),
    Piecewise(PiecewiseFit),
}

impl Baseline {
    pub fn predict(&self, acc1: f64) -> f64 {
        match self {
            Baseline::Single(f) => f.predict(acc1),
            Baseline::Piecewise(f) => f.predict(acc1),
        }
    }

    pub fn training_models(&self) -> Vec<&str> {
        match self {
            Baseline::Single(f) => f.training_models.iter().map(String::as_str).collect(),
            Baseline::Piecewise(f) => f
                .below
                .training_models
                .iter()
                .chain(&f.above.training_models)
                .map(String::as_str)
                .collect(),
        }
    }
}

impl From<LinearFit> for Baseline {
    fn from(f: LinearFit) -> Self {
        Baseline::Single(f)
    }
}

impl From<PiecewiseFit> for Baseline {
    fn from(f: PiecewiseFit) -> Self {
        Baseline::Piecewise(f)
    }
}

/// β(acc1) for either fit shape.
pub fn beta_predict(fit: &Baseline, acc1: f64) -> f64 {
    fit.predict(acc1)
}

/// Unweighted least squares of `ys` on `xs`: `(slope, intercept, r²)`.
///
/// r² is 1 when `ys` has no variance (the flat line fits exactly).
pub(crate) fn ols(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64), RobustnessError> {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return Err(RobustnessError::TooFewPoints { needed: 2, got: n });
    }
    if xs.iter().all(|&x| x == xs[0]) {
        return Err(RobustnessError::SingularDesign);
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if !(sxx > 0.0 && sxx.is_finite()) {
        return Err(RobustnessError::SingularDesign);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok((slope, intercept, r_squared))
}

/// The standard-category points, in input order. Unknown models are an
/// error rather than silently dropped.
pub(crate) fn standard_points<'a>(
    points: &'a [FitPoint],
    registry: &ModelRegistry,
) -> Result<Vec<&'a FitPoint>, RobustnessError> {
    let mut out = Vec::new();
    for p in points {
        match registry.category(&p.model_id) {
            Some(ModelCategory::Standard) => out.push(p),
            Some(_) => {}
            None => return Err(RobustnessError::UnknownModel(p.model_id.clone())),
        }
    }
    Ok(out)
}

pub(crate) fn fit_points(points: &[&FitPoint], epsilon: f64) -> Result<LinearFit, RobustnessError> {
    let xs: Vec<f64> = points.iter().map(|p| logit_clamped(p.acc1, epsilon)).collect();
    let ys: Vec<f64> = points.iter().map(|p| logit_clamped(p.acc2, epsilon)).collect();
    let (slope, intercept, r_squared) = ols(&xs, &ys)?;
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
        training_models: points.iter().map(|p| p.model_id.clone()).collect(),
        x_clamp_epsilon: epsilon,
    })
}

/// Fits β on the standard models among `points`; other categories are
/// ignored.
pub fn fit_baseline(points: &[FitPoint], registry: &ModelRegistry) -> Result<LinearFit, RobustnessError> {
    fit_points(&standard_points(points, registry)?, DEFAULT_CLAMP_EPSILON)
}

/// Piecewise β split at the standard accuracy of `knee_model`.
pub fn fit_piecewise(
    points: &[FitPoint],
    registry: &ModelRegistry,
    knee_model: &str,
) -> Result<PiecewiseFit, RobustnessError> {
    let knee = points
        .iter()
        .find(|p| p.model_id == knee_model)
        .ok_or_else(|| RobustnessError::KneeModelMissing(knee_model.to_string()))?;
    fit_piecewise_at(points, registry, knee.acc1)
}

pub fn fit_piecewise_at(
    points: &[FitPoint],
    registry: &ModelRegistry,
    knee_acc1: f64,
) -> Result<PiecewiseFit, RobustnessError> {
    let standard = standard_points(points, registry)?;
    piecewise_from_standard(&standard, knee_acc1)
}

pub(crate) fn piecewise_from_standard(standard: &[&FitPoint], knee_acc1: f64) -> Result<PiecewiseFit, RobustnessError> {
    let (below, above): (Vec<&FitPoint>, Vec<&FitPoint>) = standard.iter().partition(|p| p.acc1 <= knee_acc1);
    for (side, pts) in [("below", &below), ("above", &above)] {
        if pts.len() < 2 {
            return Err(RobustnessError::SideTooSmall { side, got: pts.len() });
        }
    }
    Ok(PiecewiseFit {
        below: fit_points(&below, DEFAULT_CLAMP_EPSILON)?,
        above: fit_points(&above, DEFAULT_CLAMP_EPSILON)?,
        knee_acc1,
    })
}
