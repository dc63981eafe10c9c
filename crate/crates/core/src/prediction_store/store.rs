use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use indexmap::IndexMap;

use super::{data_lines, read_text, split_record, EvalSetting, StoreError};

/// Token used in prediction files for a prediction outside the class space.
pub const OUT_OF_SPACE_TOKEN: &str = "-1";

/// A label interned into one setting's class space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(u32);

impl Label {
    pub const OUT_OF_SPACE: Label = Label(u32::MAX);

    pub fn index(self) -> Option<usize> {
        (self != Self::OUT_OF_SPACE).then_some(self.0 as usize)
    }

    pub fn is_out_of_space(self) -> bool {
        self == Self::OUT_OF_SPACE
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub id: String,
    pub label: Label,
}

/// Predictions of one model on one setting, sorted by example index.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    predictions: Vec<(u32, Label)>,
    subsample: Option<f64>,
}

impl Cell {
    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }

    /// Fraction declared by the `#subsample=` header, if any.
    pub fn subsample(&self) -> Option<f64> {
        self.subsample
    }

    pub fn is_subsampled(&self) -> bool {
        self.subsample.is_some()
    }

    /// `(example index, predicted label)` pairs in example order.
    pub fn predictions(&self) -> &[(u32, Label)] {
        &self.predictions
    }

    fn example_set(&self) -> BTreeSet<u32> {
        self.predictions.iter().map(|&(e, _)| e).collect()
    }
}

/// What one call to [`PredictionStore::ingest_predictions`] added.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestSummary {
    pub setting_id: String,
    pub models: Vec<String>,
    pub records: usize,
    pub subsample: Option<f64>,
    pub warnings: Vec<String>,
}

/// All data for one evaluation setting: its class space, truth map and the
/// per-model prediction cells. Class-subset views are also `SettingView`s.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingView {
    setting: EvalSetting,
    label_index: HashMap<String, u32>,
    examples: Vec<Example>,
    example_index: HashMap<String, u32>,
    cells: BTreeMap<String, Cell>,
}

impl SettingView {
    pub fn new(setting: EvalSetting) -> Result<Self, StoreError> {
        setting.validate()?;
        let label_index = setting
            .class_space
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i as u32))
            .collect();
        Ok(Self {
            setting,
            label_index,
            examples: Vec::new(),
            example_index: HashMap::new(),
            cells: BTreeMap::new(),
        })
    }

    pub fn setting(&self) -> &EvalSetting {
        &self.setting
    }

    pub fn id(&self) -> &str {
        &self.setting.setting_id
    }

    pub fn class_space(&self) -> &[String] {
        &self.setting.class_space
    }

    pub fn label(&self, name: &str) -> Option<Label> {
        if name == OUT_OF_SPACE_TOKEN {
            return Some(Label::OUT_OF_SPACE);
        }
        self.label_index.get(name).map(|&i| Label(i))
    }

    pub fn label_name(&self, label: Label) -> &str {
        match label.index() {
            Some(i) => &self.setting.class_space[i],
            None => OUT_OF_SPACE_TOKEN,
        }
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn has_truth(&self) -> bool {
        !self.examples.is_empty()
    }

    pub fn example_index(&self, example_id: &str) -> Option<u32> {
        self.example_index.get(example_id).copied()
    }

    pub fn truth(&self, example_id: &str) -> Option<Label> {
        self.example_index(example_id).map(|i| self.examples[i as usize].label)
    }

    pub fn cells(&self) -> impl Iterator<Item = (&str, &Cell)> {
        self.cells.iter().map(|(m, c)| (m.as_str(), c))
    }

    pub fn cell(&self, model_id: &str) -> Option<&Cell> {
        self.cells.get(model_id)
    }

    pub fn models(&self) -> impl Iterator<Item = &str> {
        self.cells.keys().map(String::as_str)
    }

    /// Per-example correctness for `model_id`, indexed by example index;
    /// `None` where the cell has no prediction for that example.
    pub fn correctness(&self, model_id: &str) -> Result<Vec<Option<bool>>, StoreError> {
        let cell = self.cells.get(model_id).ok_or_else(|| StoreError::MissingCell {
            model: model_id.to_string(),
            setting: self.id().to_string(),
        })?;
        let mut out = vec![None; self.examples.len()];
        for &(e, pred) in &cell.predictions {
            let truth = self.examples[e as usize].label;
            out[e as usize] = Some(!pred.is_out_of_space() && pred == truth);
        }
        Ok(out)
    }

    /// The example set every non-subsampled cell must cover: the set of the
    /// first such cell, or `None` while there is none.
    pub fn reference_examples(&self) -> Option<BTreeSet<u32>> {
        self.cells.values().find(|c| !c.is_subsampled()).map(Cell::example_set)
    }

    pub(crate) fn example_set_of(&self, model_id: &str) -> Option<BTreeSet<u32>> {
        self.cells.get(model_id).map(Cell::example_set)
    }

    pub fn ingest_truth_str(&mut self, text: &str, source: &str) -> Result<usize, StoreError> {
        if self.has_truth() {
            return Err(StoreError::TruthAlreadyLoaded(self.id().to_string()));
        }
        let mut examples = Vec::new();
        let mut index = HashMap::new();
        for (line, raw) in data_lines(text) {
            let fields = split_record(raw);
            if fields.len() != 2 || fields[0].is_empty() {
                return Err(parse_err(source, line, "expected `example_id,true_label`"));
            }
            let label = match self.label_index.get(fields[1]) {
                Some(&i) => Label(i),
                None => {
                    return Err(StoreError::LabelOutOfSpace {
                        source_name: source.to_string(),
                        line,
                        setting: self.id().to_string(),
                        label: fields[1].to_string(),
                    })
                }
            };
            let idx = examples.len() as u32;
            if index.insert(fields[0].to_string(), idx).is_some() {
                return Err(parse_err(source, line, &format!("duplicate example {:?}", fields[0])));
            }
            examples.push(Example {
                id: fields[0].to_string(),
                label,
            });
        }
        if examples.is_empty() {
            return Err(parse_err(source, 0, "truth map has no records"));
        }
        let n = examples.len();
        self.examples = examples;
        self.example_index = index;
        Ok(n)
    }

    /// Parses prediction records for this setting. The whole file is
    /// validated before any cell is inserted.
    pub fn ingest_predictions_str(&mut self, text: &str, source: &str) -> Result<IngestSummary, StoreError> {
        if !self.has_truth() {
            return Err(StoreError::TruthMissing(self.id().to_string()));
        }
        let subsample = parse_subsample_header(text, source)?;
        let mut grouped: BTreeMap<String, BTreeMap<u32, Label>> = BTreeMap::new();
        let mut records = 0usize;
        for (line, raw) in data_lines(text) {
            let fields = split_record(raw);
            if fields.len() != 4 {
                return Err(parse_err(
                    source,
                    line,
                    "expected `model_id,setting_id,example_id,predicted_label`",
                ));
            }
            let (model, setting, example, label) = (fields[0], fields[1], fields[2], fields[3]);
            if model.is_empty() {
                return Err(parse_err(source, line, "empty model_id"));
            }
            if setting != self.id() {
                return Err(StoreError::SettingMismatch {
                    source_name: source.to_string(),
                    line,
                    expected: self.id().to_string(),
                    found: setting.to_string(),
                });
            }
            let e = self.example_index(example).ok_or_else(|| StoreError::UnknownExample {
                source_name: source.to_string(),
                line,
                setting: self.id().to_string(),
                example: example.to_string(),
            })?;
            let l = self.label(label).ok_or_else(|| StoreError::LabelOutOfSpace {
                source_name: source.to_string(),
                line,
                setting: self.id().to_string(),
                label: label.to_string(),
            })?;
            if grouped.entry(model.to_string()).or_default().insert(e, l).is_some() {
                return Err(StoreError::DuplicatePrediction {
                    source_name: source.to_string(),
                    line,
                    model: model.to_string(),
                    example: example.to_string(),
                });
            }
            records += 1;
        }

        let mut reference = self.reference_examples();
        let mut warnings = Vec::new();
        for (model, preds) in &grouped {
            if self.cells.contains_key(model) {
                return Err(StoreError::DuplicateCell {
                    model: model.clone(),
                    setting: self.id().to_string(),
                });
            }
            let set: BTreeSet<u32> = preds.keys().copied().collect();
            match subsample {
                None => match &reference {
                    Some(r) if r != &set => {
                        return Err(StoreError::MisalignedCell {
                            model: model.clone(),
                            setting: self.id().to_string(),
                            missing: r.difference(&set).count(),
                            extra: set.difference(r).count(),
                        })
                    }
                    Some(_) => {}
                    None => reference = Some(set),
                },
                Some(_) => {
                    if let Some(w) = self.class_balance_warning(model, &set) {
                        log::warn!("{w}");
                        warnings.push(w);
                    }
                }
            }
        }

        let models: Vec<String> = grouped.keys().cloned().collect();
        for (model, preds) in grouped {
            self.cells.insert(
                model,
                Cell {
                    predictions: preds.into_iter().collect(),
                    subsample,
                },
            );
        }
        Ok(IngestSummary {
            setting_id: self.id().to_string(),
            models,
            records,
            subsample,
            warnings,
        })
    }

    /// Subsampled cells must be class-balanced: per-class counts over the
    /// setting's truth classes may differ by at most one.
    fn class_balance_warning(&self, model: &str, set: &BTreeSet<u32>) -> Option<String> {
        let mut counts: BTreeMap<Label, usize> = self.examples.iter().map(|e| (e.label, 0)).collect();
        for &e in set {
            *counts.get_mut(&self.examples[e as usize].label).unwrap() += 1;
        }
        let min = counts.values().copied().min().unwrap_or(0);
        let max = counts.values().copied().max().unwrap_or(0);
        (max - min > 1).then(|| {
            format!(
                "subsampled cell ({model}, {}) is not class-balanced: per-class counts range {min}..={max}",
                self.id()
            )
        })
    }

    /// Inserts or replaces a cell without alignment or duplicate checks.
    /// Examples and labels must still resolve. Intended for building
    /// deliberately malformed grids, e.g. to exercise [`super::validate_grid`].
    pub fn insert_cell_unchecked(
        &mut self,
        model_id: &str,
        predictions: &[(&str, &str)],
        subsample: Option<f64>,
    ) -> Result<(), StoreError> {
        let mut preds = BTreeMap::new();
        for (line, (example, label)) in predictions.iter().enumerate() {
            let e = self.example_index(example).ok_or_else(|| StoreError::UnknownExample {
                source_name: "<unchecked>".into(),
                line: line + 1,
                setting: self.id().to_string(),
                example: example.to_string(),
            })?;
            let l = self.label(label).ok_or_else(|| StoreError::LabelOutOfSpace {
                source_name: "<unchecked>".into(),
                line: line + 1,
                setting: self.id().to_string(),
                label: label.to_string(),
            })?;
            preds.insert(e, l);
        }
        self.cells.insert(
            model_id.to_string(),
            Cell {
                predictions: preds.into_iter().collect(),
                subsample,
            },
        );
        Ok(())
    }

    /// Builds a view restricted to `keep` labels (given in this view's
    /// label indices). Used by class-subset views.
    pub(crate) fn restricted(&self, keep: &BTreeSet<usize>) -> SettingView {
        let mut remap = vec![Label::OUT_OF_SPACE; self.setting.class_space.len()];
        let mut class_space = Vec::with_capacity(keep.len());
        for (i, name) in self.setting.class_space.iter().enumerate() {
            if keep.contains(&i) {
                remap[i] = Label(class_space.len() as u32);
                class_space.push(name.clone());
            }
        }
        let relabel = |l: Label| l.index().map_or(Label::OUT_OF_SPACE, |i| remap[i]);

        let mut example_remap = vec![None; self.examples.len()];
        let mut examples = Vec::new();
        for (i, ex) in self.examples.iter().enumerate() {
            let label = relabel(ex.label);
            if !label.is_out_of_space() {
                example_remap[i] = Some(examples.len() as u32);
                examples.push(Example { id: ex.id.clone(), label });
            }
        }
        let example_index = examples
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.clone(), i as u32))
            .collect();
        let cells = self
            .cells
            .iter()
            .map(|(m, c)| {
                let predictions = c
                    .predictions
                    .iter()
                    .filter_map(|&(e, l)| example_remap[e as usize].map(|ne| (ne, relabel(l))))
                    .collect();
                (
                    m.clone(),
                    Cell {
                        predictions,
                        subsample: c.subsample,
                    },
                )
            })
            .collect();
        let label_index = class_space
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i as u32))
            .collect();
        let mut setting = self.setting.clone();
        setting.class_space = class_space;
        SettingView {
            setting,
            label_index,
            examples,
            example_index,
            cells,
        }
    }
}

fn parse_err(source: &str, line: usize, message: &str) -> StoreError {
    StoreError::Parse {
        source_name: source.to_string(),
        line,
        message: message.to_string(),
    }
}

fn parse_subsample_header(text: &str, source: &str) -> Result<Option<f64>, StoreError> {
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(value) = line.strip_prefix("#subsample=") {
            let f: f64 = value
                .trim()
                .parse()
                .map_err(|_| parse_err(source, i + 1, "malformed #subsample header"))?;
            if !(f > 0.0 && f <= 1.0) {
                return Err(parse_err(source, i + 1, "subsample fraction must lie in (0, 1]"));
            }
            return Ok(Some(f));
        }
        if !line.starts_with('#') {
            break;
        }
    }
    Ok(None)
}

/// The testbed grid: one [`SettingView`] per evaluation setting, in
/// registration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionStore {
    settings: IndexMap<String, SettingView>,
}

impl PredictionStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_setting(&mut self, setting: EvalSetting) -> Result<(), StoreError> {
        if self.settings.contains_key(&setting.setting_id) {
            return Err(StoreError::DuplicateSetting(setting.setting_id));
        }
        let view = SettingView::new(setting)?;
        self.settings.insert(view.id().to_string(), view);
        Ok(())
    }

    pub fn setting(&self, setting_id: &str) -> Result<&SettingView, StoreError> {
        self.settings
            .get(setting_id)
            .ok_or_else(|| StoreError::UnknownSetting(setting_id.to_string()))
    }

    pub fn setting_mut(&mut self, setting_id: &str) -> Result<&mut SettingView, StoreError> {
        self.settings
            .get_mut(setting_id)
            .ok_or_else(|| StoreError::UnknownSetting(setting_id.to_string()))
    }

    pub fn settings(&self) -> impl Iterator<Item = &SettingView> {
        self.settings.values()
    }

    pub fn ingest_truth(&mut self, path: impl AsRef<Path>, setting_id: &str) -> Result<usize, StoreError> {
        let path = path.as_ref();
        let text = read_text(path)?;
        self.setting_mut(setting_id)?
            .ingest_truth_str(&text, &path.display().to_string())
    }

    /// Loads `model_id,setting_id,example_id,predicted_label` records for
    /// one setting. Loading the same file twice fails with
    /// [`StoreError::DuplicateCell`].
    pub fn ingest_predictions(
        &mut self,
        path: impl AsRef<Path>,
        setting_id: &str,
    ) -> Result<IngestSummary, StoreError> {
        let path = path.as_ref();
        let text = read_text(path)?;
        self.setting_mut(setting_id)?
            .ingest_predictions_str(&text, &path.display().to_string())
    }

    /// Every `(model_id, setting_id)` pair with a cell.
    pub fn coverage(&self) -> BTreeSet<(String, String)> {
        self.settings
            .values()
            .flat_map(|v| v.models().map(|m| (m.to_string(), v.id().to_string())))
            .collect()
    }

    pub fn models(&self) -> BTreeSet<String> {
        self.settings
            .values()
            .flat_map(|v| v.models().map(str::to_string))
            .collect()
    }
}

/// Reads the distinct labels of a truth file in first-seen order, for
/// settings whose class space is not given explicitly.
pub(crate) fn truth_labels(text: &str) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (_, raw) in data_lines(text) {
        let fields = split_record(raw);
        if let Some(label) = fields.get(1) {
            if seen.insert(label.to_string()) {
                out.push(label.to_string());
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::SettingKind;
    use super::*;

    fn view() -> SettingView {
        let setting = EvalSetting::new(
            "s",
            SettingKind::NaturalDataset,
            vec!["cat".into(), "dog".into(), "fox".into()],
        );
        let mut v = SettingView::new(setting).unwrap();
        v.ingest_truth_str("e1,cat\ne2,dog\ne3,fox\ne4,cat\n", "truth").unwrap();
        v
    }

    #[test]
    fn three_records_make_one_cell() {
        let mut v = view();
        let s = v
            .ingest_predictions_str("m,s,e1,cat\nm,s,e2,fox\nm,s,e3,fox\n", "p")
            .unwrap();
        assert_eq!(s.models, vec!["m"]);
        assert_eq!(v.cell("m").unwrap().len(), 3);
    }

    #[test]
    fn duplicate_record_is_rejected() {
        let mut v = view();
        let err = v.ingest_predictions_str("m,s,e1,cat\nm,s,e1,dog\n", "p").unwrap_err();
        assert!(matches!(err, StoreError::DuplicatePrediction { line: 2, .. }), "{err:?}");
        assert!(v.cell("m").is_none());
    }

    #[test]
    fn reingesting_a_file_is_a_duplicate_cell() {
        let mut v = view();
        let text = "m,s,e1,cat\nm,s,e2,dog\nm,s,e3,fox\nm,s,e4,cat\n";
        v.ingest_predictions_str(text, "p").unwrap();
        let before = v.clone();
        assert!(matches!(
            v.ingest_predictions_str(text, "p"),
            Err(StoreError::DuplicateCell { .. })
        ));
        assert_eq!(v, before);
    }

    #[test]
    fn unknown_example_and_label() {
        let mut v = view();
        assert!(matches!(
            v.ingest_predictions_str("m,s,e9,cat\n", "p"),
            Err(StoreError::UnknownExample { .. })
        ));
        assert!(matches!(
            v.ingest_predictions_str("m,s,e1,wolf\n", "p"),
            Err(StoreError::LabelOutOfSpace { .. })
        ));
        assert!(matches!(
            v.ingest_predictions_str("m,other,e1,cat\n", "p"),
            Err(StoreError::SettingMismatch { .. })
        ));
    }

    #[test]
    fn sentinel_counts_as_wrong() {
        let mut v = view();
        v.ingest_predictions_str("m,s,e1,-1\nm,s,e2,dog\nm,s,e3,fox\nm,s,e4,cat\n", "p")
            .unwrap();
        let c = v.correctness("m").unwrap();
        assert_eq!(c, vec![Some(false), Some(true), Some(true), Some(true)]);
    }

    #[test]
    fn misaligned_cell_is_rejected() {
        let mut v = view();
        v.ingest_predictions_str("a,s,e1,cat\na,s,e2,dog\n", "p").unwrap();
        let err = v.ingest_predictions_str("b,s,e1,cat\nb,s,e3,dog\n", "p").unwrap_err();
        assert!(matches!(err, StoreError::MisalignedCell { missing: 1, extra: 1, .. }), "{err:?}");
    }

    #[test]
    fn subsampled_cells_skip_alignment_and_check_balance() {
        let mut v = view();
        v.ingest_predictions_str("a,s,e1,cat\na,s,e2,dog\na,s,e3,fox\na,s,e4,cat\n", "p")
            .unwrap();
        // One example per class: balanced.
        let s = v
            .ingest_predictions_str("#subsample=0.1\nb,s,e1,cat\nb,s,e2,dog\nb,s,e3,fox\n", "p")
            .unwrap();
        assert_eq!(s.subsample, Some(0.1));
        assert!(s.warnings.is_empty());
        assert!(v.cell("b").unwrap().is_subsampled());
        // Two cats, no fox: imbalanced, accepted with a warning.
        let s = v
            .ingest_predictions_str("#subsample=0.1\nc,s,e1,cat\nc,s,e4,cat\n", "p")
            .unwrap();
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn truth_errors() {
        let setting = EvalSetting::new("s", SettingKind::NaturalDataset, vec!["a".into()]);
        let mut v = SettingView::new(setting).unwrap();
        assert!(matches!(
            v.ingest_predictions_str("m,s,e1,a\n", "p"),
            Err(StoreError::TruthMissing(_))
        ));
        assert!(v.ingest_truth_str("e1,a\ne1,a\n", "t").is_err());
        assert!(v.ingest_truth_str("e1,b\n", "t").is_err());
        v.ingest_truth_str("e1,a\n", "t").unwrap();
        assert!(matches!(v.ingest_truth_str("e2,a\n", "t"), Err(StoreError::TruthAlreadyLoaded(_))));
    }
}
