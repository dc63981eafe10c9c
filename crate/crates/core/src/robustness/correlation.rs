use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::prediction_store::{ModelCategory, ModelRegistry};

use super::RobustnessError;

/// Product-moment correlation. Zero variance is an error, never NaN.
pub fn pearson_correlation(xs: &[f64], ys: &[f64]) -> Result<f64, RobustnessError> {
    if xs.len() != ys.len() {
        return Err(RobustnessError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(RobustnessError::TooFewPoints {
            needed: 2,
            got: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(RobustnessError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Which models enter a correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFilter {
    #[default]
    NonStandardOnly,
    All,
    Category(ModelCategory),
}

impl ModelFilter {
    pub fn admits(self, category: ModelCategory) -> bool {
        match self {
            ModelFilter::NonStandardOnly => category != ModelCategory::Standard,
            ModelFilter::All => true,
            ModelFilter::Category(c) => c == category,
        }
    }
}

impl fmt::Display for ModelFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelFilter::NonStandardOnly => f.write_str("non_standard_only"),
            ModelFilter::All => f.write_str("all"),
            ModelFilter::Category(c) => write!(f, "category:{c}"),
        }
    }
}

impl std::str::FromStr for ModelFilter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "non_standard_only" => Ok(ModelFilter::NonStandardOnly),
            "all" => Ok(ModelFilter::All),
            other => match other.strip_prefix("category:") {
                Some(c) => c.parse().map(ModelFilter::Category),
                None => Err(format!("unknown model filter {other:?}")),
            },
        }
    }
}

/// Per-model effective robustness on one shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRobustness {
    pub shift_id: String,
    pub rho: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub x_shift_id: String,
    pub y_shift_id: String,
    pub r: f64,
    pub n_models: usize,
    pub model_filter: ModelFilter,
}

/// Correlates ρ between every (row, column) shift pair over the models the
/// filter admits. Models lacking ρ on either shift are dropped for that
/// pair only.
pub fn cross_shift_correlation_table(
    rows: &[ShiftRobustness],
    cols: &[ShiftRobustness],
    registry: &ModelRegistry,
    filter: ModelFilter,
) -> Result<Vec<CorrelationEntry>, RobustnessError> {
    let mut out = Vec::with_capacity(rows.len() * cols.len());
    for x in rows {
        for y in cols {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (model, &rx) in &x.rho {
                let category = registry
                    .category(model)
                    .ok_or_else(|| RobustnessError::UnknownModel(model.clone()))?;
                if !filter.admits(category) {
                    continue;
                }
                if let Some(&ry) = y.rho.get(model) {
                    xs.push(rx);
                    ys.push(ry);
                }
            }
            let r = pearson_correlation(&xs, &ys).map_err(|e| RobustnessError::Correlation {
                x: x.shift_id.clone(),
                y: y.shift_id.clone(),
                source: Box::new(e),
            })?;
            out.push(CorrelationEntry {
                x_shift_id: x.shift_id.clone(),
                y_shift_id: y.shift_id.clone(),
                r,
                n_models: xs.len(),
                model_filter: filter,
            });
        }
    }
    Ok(out)
}
