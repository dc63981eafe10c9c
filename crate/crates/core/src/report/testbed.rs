use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::metrics::{aggregate_family_accuracy, pmk_accuracy, top1_accuracy, AccuracyEstimate, Family, MetricsError};
use crate::prediction_store::{
    class_subset_view, truth_labels, validate_grid, ClassSubset, EvalSetting, FrameSet, ModelRegistry,
    PredictionStore, SettingView, StoreError, ValidationReport,
};

use super::config::AnalysisConfig;
use super::ReportError;

/// A point accuracy, with its interval when it comes from counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub point: f64,
    pub ci: Option<(f64, f64)>,
}

impl From<AccuracyEstimate> for Measured {
    fn from(e: AccuracyEstimate) -> Self {
        Self {
            point: e.point,
            ci: Some((e.ci_low, e.ci_high)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum TableEntry {
    Counts { correct: u64, total: u64 },
    Point(f64),
}

/// Pre-aggregated accuracies keyed by `(model_id, setting_id)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AccuracyTable {
    entries: BTreeMap<(String, String), TableEntry>,
}

#[derive(Debug, Deserialize)]
struct TableRow {
    model_id: String,
    setting_id: String,
    #[serde(default)]
    correct: Option<u64>,
    #[serde(default)]
    total: Option<u64>,
    #[serde(default)]
    accuracy: Option<f64>,
}

impl AccuracyTable {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ReportError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ReportError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// CSV with a header naming `model_id`, `setting_id` and either
    /// `correct` and `total`, or `accuracy`. Counts win when both are given.
    pub fn parse(text: &str, source: &str) -> Result<Self, ReportError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut entries = BTreeMap::new();
        let headers = reader.headers()?.clone();
        for rec in reader.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let row: TableRow = rec
                .deserialize(Some(&headers))
                .map_err(|e| table_error(source, line, e.to_string()))?;
            let entry = match (row.correct, row.total, row.accuracy) {
                (Some(correct), Some(total), _) if total > 0 && correct <= total => TableEntry::Counts { correct, total },
                (Some(c), Some(t), _) => return Err(table_error(source, line, format!("invalid counts {c}/{t}"))),
                (_, _, Some(a)) if (0.0..=1.0).contains(&a) => TableEntry::Point(a),
                (_, _, Some(a)) => return Err(table_error(source, line, format!("accuracy {a} outside [0, 1]"))),
                _ => return Err(table_error(source, line, "need correct and total, or accuracy".into())),
            };
            let key = (row.model_id, row.setting_id);
            if entries.insert(key.clone(), entry).is_some() {
                return Err(table_error(source, line, format!("duplicate entry for {:?} on {:?}", key.0, key.1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn insert_counts(&mut self, model_id: &str, setting_id: &str, correct: u64, total: u64) {
        self.entries
            .insert((model_id.into(), setting_id.into()), TableEntry::Counts { correct, total });
    }

    pub fn insert_point(&mut self, model_id: &str, setting_id: &str, accuracy: f64) {
        self.entries
            .insert((model_id.into(), setting_id.into()), TableEntry::Point(accuracy));
    }

    pub fn get(&self, model_id: &str, setting_id: &str, level: f64) -> Result<Option<Measured>, MetricsError> {
        match self.entries.get(&(model_id.to_string(), setting_id.to_string())) {
            None => Ok(None),
            Some(TableEntry::Point(a)) => Ok(Some(Measured { point: *a, ci: None })),
            Some(&TableEntry::Counts { correct, total }) => {
                AccuracyEstimate::from_counts(correct, total, level).map(|e| Some(e.into()))
            }
        }
    }

    pub fn has_setting(&self, setting_id: &str) -> bool {
        self.entries.keys().any(|(_, s)| s == setting_id)
    }

    pub fn settings(&self) -> Vec<String> {
        let mut s: Vec<String> = self.entries.keys().map(|(_, s)| s.clone()).collect();
        s.sort();
        s.dedup();
        s
    }

    pub fn models(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|(m, _)| m.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn table_error(source: &str, line: u64, message: String) -> ReportError {
    ReportError::Table {
        source_name: source.to_string(),
        line,
        message,
    }
}

/// Everything an analysis reads: registry, prediction grid, accuracy table,
/// frame sets, class subsets and families. Read-only once loaded.
#[derive(Debug, Clone, Default)]
pub struct Testbed {
    pub registry: ModelRegistry,
    pub store: PredictionStore,
    pub table: AccuracyTable,
    pub frame_sets: BTreeMap<String, Vec<FrameSet>>,
    pub subsets: BTreeMap<String, ClassSubset>,
    pub families: BTreeMap<String, Family>,
    pub ci_level: f64,
}

impl Testbed {
    pub fn new(registry: ModelRegistry) -> Self {
        Self {
            registry,
            ci_level: crate::metrics::DEFAULT_CI_LEVEL,
            ..Self::default()
        }
    }

    pub fn load(config: &AnalysisConfig) -> Result<Self, ReportError> {
        let mut tb = Testbed::new(ModelRegistry::load(config.resolve(&config.testbed.registry))?);
        tb.ci_level = config.testbed.ci_level;
        if let Some(p) = &config.testbed.accuracy_table {
            tb.table = AccuracyTable::load(config.resolve(p))?;
        }
        for s in &config.settings {
            let truth_path = config.resolve(&s.truth);
            let class_space = match &s.class_space {
                Some(c) => c.clone(),
                None => {
                    let text = std::fs::read_to_string(&truth_path).map_err(|source| ReportError::Io {
                        path: truth_path.display().to_string(),
                        source,
                    })?;
                    truth_labels(&text)
                }
            };
            let mut setting = EvalSetting::new(&s.id, s.kind, class_space);
            setting.params = s.params.clone();
            setting.storage_flavor = s.storage_flavor;
            tb.store.add_setting(setting)?;
            tb.store.ingest_truth(&truth_path, &s.id)?;
            for p in &s.predictions {
                let summary = tb.store.ingest_predictions(config.resolve(p), &s.id)?;
                for w in &summary.warnings {
                    log::warn!("{w}");
                }
            }
            if let Some(p) = &s.frame_sets {
                let sets = FrameSet::load_manifest(config.resolve(p))?;
                let view = tb.store.setting(&s.id)?;
                for set in &sets {
                    set.check_against(view)?;
                }
                tb.frame_sets.insert(s.id.clone(), sets);
            }
        }
        for (id, s) in &config.subsets {
            let subset = match (&s.path, &s.bundled) {
                (Some(p), _) => ClassSubset::load(id, config.resolve(p))?,
                _ => ClassSubset {
                    subset_id: id.clone(),
                    ..ClassSubset::imagenet_125()
                },
            };
            tb.subsets.insert(id.clone(), subset);
        }
        tb.families = config.families.clone();
        for model in tb.table.models() {
            if !tb.registry.contains(model) {
                return Err(ReportError::UnknownModel(model.to_string()));
            }
        }
        Ok(tb)
    }

    pub fn knows_setting(&self, setting_id: &str) -> bool {
        self.store.setting(setting_id).is_ok() || self.table.has_setting(setting_id) || self.families.contains_key(setting_id)
    }

    pub fn require_setting(&self, setting_id: &str) -> Result<(), ReportError> {
        if self.knows_setting(setting_id) {
            Ok(())
        } else {
            Err(ReportError::Config(format!("unknown setting or family {setting_id:?}")))
        }
    }

    pub fn subset(&self, subset_id: &str) -> Result<&ClassSubset, ReportError> {
        self.subsets
            .get(subset_id)
            .ok_or_else(|| ReportError::Config(format!("unknown class subset {subset_id:?}")))
    }

    pub fn frame_sets(&self, setting_id: &str) -> Result<&[FrameSet], ReportError> {
        self.frame_sets
            .get(setting_id)
            .map(Vec::as_slice)
            .ok_or_else(|| ReportError::Config(format!("setting {setting_id:?} has no frame sets")))
    }

    /// Restriction of a prediction-backed setting to a class subset.
    pub fn subset_view(&self, setting_id: &str, subset_id: &str) -> Result<SettingView, ReportError> {
        let view = self.store.setting(setting_id).map_err(|_| {
            ReportError::Config(format!(
                "class subset {subset_id:?} needs per-example predictions for {setting_id:?}"
            ))
        })?;
        Ok(class_subset_view(view, self.subset(subset_id)?)?)
    }

    /// Top-1 accuracy of `model_id` on a setting or family; `None` when the
    /// cell is absent. Families average point accuracies and carry no
    /// interval.
    pub fn accuracy(&self, model_id: &str, setting_id: &str, level: f64) -> Result<Option<Measured>, ReportError> {
        if let Some(family) = self.families.get(setting_id) {
            let mut failure = None;
            let agg = aggregate_family_accuracy(family, |s| match self.accuracy(model_id, s, level) {
                Ok(m) => m.map(|m| m.point),
                Err(e) => {
                    failure.get_or_insert(e);
                    None
                }
            });
            if let Some(e) = failure {
                return Err(e);
            }
            return match agg {
                Ok(a) => Ok(Some(Measured { point: a.value, ci: None })),
                Err(MetricsError::EmptyFamily) => Ok(None),
                Err(source) => Err(cell_error(model_id, setting_id, source)),
            };
        }
        if let Ok(view) = self.store.setting(setting_id) {
            if let Some(m) = view_accuracy(view, model_id, level)? {
                return Ok(Some(m));
            }
        }
        self.table
            .get(model_id, setting_id, level)
            .map_err(|source| cell_error(model_id, setting_id, source))
    }

    /// Checks the prediction grid against the registry.
    pub fn validate(&self) -> ValidationReport {
        validate_grid(&self.store, &self.registry)
    }
}

/// Top-1 accuracy on an already resolved view, `None` without a cell.
pub(crate) fn view_accuracy(view: &SettingView, model_id: &str, level: f64) -> Result<Option<Measured>, ReportError> {
    if view.cell(model_id).is_none() {
        return Ok(None);
    }
    top1_accuracy(view, model_id, level)
        .map(|e| Some(e.into()))
        .map_err(|source| cell_error(model_id, view.id(), source))
}

/// pm-k accuracy on a consistency setting, `None` without a cell.
pub(crate) fn view_pmk(
    view: &SettingView,
    frame_sets: &[FrameSet],
    model_id: &str,
    k: usize,
    level: f64,
) -> Result<Option<Measured>, ReportError> {
    if view.cell(model_id).is_none() {
        return Ok(None);
    }
    pmk_accuracy(view, model_id, frame_sets, k, level)
        .map(|e| Some(e.into()))
        .map_err(|source| cell_error(model_id, &format!("{}[pm-{k}]", view.id()), source))
}

fn cell_error(model: &str, setting: &str, source: MetricsError) -> ReportError {
    ReportError::Cell {
        model: model.to_string(),
        setting: setting.to_string(),
        source: Box::new(source),
    }
}

impl From<StoreError> for ReportError {
    fn from(e: StoreError) -> Self {
        ReportError::Store(Box::new(e))
    }
}
