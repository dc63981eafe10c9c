use serde::{Deserialize, Serialize};

use super::testbed::Testbed;
use super::ReportError;

/// The model × setting accuracy grid. `None` marks an empty cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub models: Vec<String>,
    pub settings: Vec<String>,
    /// Row-major, `models.len() × settings.len()`.
    pub accuracy: Vec<Option<f64>>,
}

impl GridReport {
    pub fn get(&self, model: usize, setting: usize) -> Option<f64> {
        self.accuracy[model * self.settings.len() + setting]
    }

    pub fn row(&self, model: usize) -> &[Option<f64>] {
        let w = self.settings.len();
        &self.accuracy[model * w..(model + 1) * w]
    }
}

/// Top-1 accuracies of every registry model (file order) on every setting:
/// prediction-backed settings in registration order, then table-only
/// settings sorted by id.
pub fn build_grid(testbed: &Testbed) -> Result<GridReport, ReportError> {
    let mut settings: Vec<String> = testbed.store.settings().map(|v| v.id().to_string()).collect();
    for s in testbed.table.settings() {
        if !settings.contains(&s) {
            settings.push(s);
        }
    }
    let models: Vec<String> = testbed.registry.iter().map(|r| r.model_id.clone()).collect();
    let mut accuracy = Vec::with_capacity(models.len() * settings.len());
    for m in &models {
        for s in &settings {
            accuracy.push(testbed.accuracy(m, s, testbed.ci_level)?.map(|a| a.point));
        }
    }
    Ok(GridReport {
        models,
        settings,
        accuracy,
    })
}
