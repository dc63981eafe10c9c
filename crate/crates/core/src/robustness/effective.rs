use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::prediction_store::ModelRegistry;

use super::fit::Baseline;
use super::RobustnessError;

/// ρ = acc2 − β(acc1). Positive means above the baseline.
pub fn effective_robustness(acc1: f64, acc2: f64, fit: &Baseline) -> f64 {
    acc2 - fit.predict(acc1)
}

/// τ = acc2(intervention) − acc2(base).
pub fn relative_robustness(intervention_acc2: f64, base_acc2: f64) -> f64 {
    intervention_acc2 - base_acc2
}

/// τ for `model_id`, looking up its base model through the registry.
pub fn relative_robustness_of(
    model_id: &str,
    registry: &ModelRegistry,
    acc2_by_model: &BTreeMap<String, f64>,
) -> Result<f64, RobustnessError> {
    let record = registry
        .get(model_id)
        .ok_or_else(|| RobustnessError::UnknownModel(model_id.to_string()))?;
    let base = record.base_model.as_deref().ok_or_else(|| RobustnessError::MissingBase {
        model: model_id.to_string(),
        base: None,
    })?;
    let missing = || RobustnessError::MissingBase {
        model: model_id.to_string(),
        base: Some(base.to_string()),
    };
    let own = acc2_by_model.get(model_id).ok_or_else(missing)?;
    let base_acc2 = acc2_by_model.get(base).ok_or_else(missing)?;
    Ok(relative_robustness(*own, *base_acc2))
}

/// One model on one shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRecord {
    pub model_id: String,
    pub shift_id: String,
    pub acc1: f64,
    pub acc2: f64,
    pub acc1_ci: Option<(f64, f64)>,
    pub acc2_ci: Option<(f64, f64)>,
    pub rho: f64,
    /// Present only when the base model resolves and has an acc2.
    pub tau: Option<f64>,
    pub base_model: Option<String>,
}

/// Measured accuracies for one model, input to [`robustness_records`].
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredPair {
    pub model_id: String,
    pub acc1: f64,
    pub acc2: f64,
    pub acc1_ci: Option<(f64, f64)>,
    pub acc2_ci: Option<(f64, f64)>,
}

/// ρ for every model and τ wherever the base model's acc2 is available.
pub fn robustness_records(
    shift_id: &str,
    measured: &[MeasuredPair],
    fit: &Baseline,
    registry: &ModelRegistry,
) -> Vec<RobustnessRecord> {
    let acc2_by_model: BTreeMap<String, f64> = measured.iter().map(|m| (m.model_id.clone(), m.acc2)).collect();
    measured
        .iter()
        .map(|m| {
            let base_model = registry.get(&m.model_id).and_then(|r| r.base_model.clone());
            RobustnessRecord {
                model_id: m.model_id.clone(),
                shift_id: shift_id.to_string(),
                acc1: m.acc1,
                acc2: m.acc2,
                acc1_ci: m.acc1_ci,
                acc2_ci: m.acc2_ci,
                rho: effective_robustness(m.acc1, m.acc2, fit),
                tau: relative_robustness_of(&m.model_id, registry, &acc2_by_model).ok(),
                base_model,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::fit::LinearFit;
    use super::super::logit::DEFAULT_CLAMP_EPSILON;
    use super::*;
    use crate::prediction_store::{ModelCategory, ModelRecord};

    fn fit() -> Baseline {
        Baseline::Single(LinearFit {
            slope: 1.1,
            intercept: -0.4,
            r_squared: 1.0,
            training_models: vec![],
            x_clamp_epsilon: DEFAULT_CLAMP_EPSILON,
        })
    }

    #[test]
    fn on_fit_is_zero() {
        let f = fit();
        for acc1 in [0.2, 0.5, 0.8] {
            assert_eq!(effective_robustness(acc1, f.predict(acc1), &f), 0.0);
        }
    }

    #[test]
    fn tau_arithmetic() {
        assert_eq!(relative_robustness(0.7, 0.7), 0.0);
        assert!((relative_robustness(0.70, 0.75) + 0.05).abs() < 1e-15);
    }

    #[test]
    fn tau_needs_base_cell() {
        let reg = ModelRegistry::from_records(vec![
            ModelRecord::new("base", ModelCategory::Standard),
            ModelRecord::new("aug", ModelCategory::RobustnessIntervention).with_base("base"),
            ModelRecord::new("lone", ModelCategory::RobustnessIntervention),
        ])
        .unwrap();
        let mut acc2: BTreeMap<String, f64> = [("aug".to_string(), 0.7)].into();
        assert!(matches!(
            relative_robustness_of("aug", &reg, &acc2),
            Err(RobustnessError::MissingBase { base: Some(_), .. })
        ));
        assert!(matches!(
            relative_robustness_of("lone", &reg, &acc2),
            Err(RobustnessError::MissingBase { base: None, .. })
        ));
        acc2.insert("base".into(), 0.75);
        assert!((relative_robustness_of("aug", &reg, &acc2).unwrap() + 0.05).abs() < 1e-15);

        let measured: Vec<MeasuredPair> = [("base", 0.8, 0.75), ("aug", 0.79, 0.7), ("lone", 0.6, 0.5)]
            .iter()
            .map(|&(m, a1, a2)| MeasuredPair {
                model_id: m.into(),
                acc1: a1,
                acc2: a2,
                acc1_ci: None,
                acc2_ci: None,
            })
            .collect();
        let recs = robustness_records("s", &measured, &fit(), &reg);
        assert_eq!(recs[0].tau, None);
        assert!((recs[1].tau.unwrap() + 0.05).abs() < 1e-15);
        assert_eq!(recs[2].tau, None);
    }
}
