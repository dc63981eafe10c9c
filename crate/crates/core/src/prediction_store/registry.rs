use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{read_text, StoreError};

/// The three model groups of the testbed. Only `Standard` models train the
/// baseline fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelCategory {
    Standard,
    RobustnessIntervention,
    MoreData,
}

impl ModelCategory {
    pub const ALL: [ModelCategory; 3] = [
        ModelCategory::Standard,
        ModelCategory::RobustnessIntervention,
        ModelCategory::MoreData,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelCategory::Standard => "standard",
            ModelCategory::RobustnessIntervention => "robustness_intervention",
            ModelCategory::MoreData => "more_data",
        }
    }
}

impl fmt::Display for ModelCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(ModelCategory::Standard),
            "robustness_intervention" => Ok(ModelCategory::RobustnessIntervention),
            "more_data" => Ok(ModelCategory::MoreData),
            other => Err(format!("unknown category {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub model_id: String,
    pub display_name: String,
    pub category: ModelCategory,
    pub base_model: Option<String>,
    pub architecture_tag: String,
    pub training_data_tag: String,
}

impl ModelRecord {
    pub fn new(model_id: impl Into<String>, category: ModelCategory) -> Self {
        let model_id = model_id.into();
        Self {
            display_name: model_id.clone(),
            model_id,
            category,
            base_model: None,
            architecture_tag: String::new(),
            training_data_tag: String::new(),
        }
    }

    pub fn with_base(mut self, base: impl Into<String>) -> Self {
        self.base_model = Some(base.into());
        self
    }
}

/// Validated set of models, kept in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModelRegistry {
    records: Vec<ModelRecord>,
    index: HashMap<String, usize>,
}

impl ModelRegistry {
    /// Builds a registry, rejecting duplicate ids and unresolved or
    /// self-referencing base links.
    pub fn from_records(records: Vec<ModelRecord>) -> Result<Self, StoreError> {
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if index.insert(r.model_id.clone(), i).is_some() {
                return Err(StoreError::DuplicateModel(r.model_id.clone()));
            }
        }
        for r in &records {
            if let Some(base) = &r.base_model {
                if base == &r.model_id {
                    return Err(StoreError::SelfBase(r.model_id.clone()));
                }
                if !index.contains_key(base) {
                    return Err(StoreError::DanglingBaseModel {
                        model: r.model_id.clone(),
                        base: base.clone(),
                    });
                }
            }
        }
        Ok(Self { records, index })
    }

    /// Reads the tab-separated registry format:
    /// `model_id  category  base_model|-  architecture_tag  training_data_tag`.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let text = read_text(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source: &str) -> Result<Self, StoreError> {
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(StoreError::Parse {
                    source_name: source.to_string(),
                    line: lineno,
                    message: format!("expected 5 tab-separated fields, found {}", fields.len()),
                });
            }
            if fields[0].is_empty() {
                return Err(StoreError::Parse {
                    source_name: source.to_string(),
                    line: lineno,
                    message: "empty model_id".into(),
                });
            }
            let category = fields[1].parse().map_err(|message| StoreError::Parse {
                source_name: source.to_string(),
                line: lineno,
                message,
            })?;
            let base_model = match fields[2] {
                "-" | "" => None,
                b => Some(b.to_string()),
            };
            records.push(ModelRecord {
                model_id: fields[0].to_string(),
                display_name: fields[0].to_string(),
                category,
                base_model,
                architecture_tag: fields[3].to_string(),
                training_data_tag: fields[4].to_string(),
            });
        }
        Self::from_records(records)
    }

    /// The registry of the 204 testbed models with the categories they are
    /// labelled with in the published model list.
    pub fn bundled_testbed() -> Self {
        Self::parse(BUNDLED_TESTBED, "bundled:testbed_models.tsv")
            .expect("bundled registry is well-formed")
    }

    pub fn get(&self, model_id: &str) -> Option<&ModelRecord> {
        self.index.get(model_id).map(|&i| &self.records[i])
    }

    pub fn contains(&self, model_id: &str) -> bool {
        self.index.contains_key(model_id)
    }

    pub fn category(&self, model_id: &str) -> Option<ModelCategory> {
        self.get(model_id).map(|r| r.category)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ModelRecord> {
        self.records.iter()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, category: ModelCategory) -> usize {
        self.records.iter().filter(|r| r.category == category).count()
    }
}

const BUNDLED_TESTBED: &str = include_str!("../../assets/testbed_models.tsv");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_registry_resolves_base_link() {
        let text = "resnet50\tstandard\t-\tresnet\timagenet\n\
                    resnet50_augmix\trobustness_intervention\tresnet50\tresnet\timagenet\n";
        let reg = ModelRegistry::parse(text, "t").unwrap();
        assert_eq!(reg.len(), 2);
        let aug = reg.get("resnet50_augmix").unwrap();
        assert_eq!(aug.base_model.as_deref(), Some("resnet50"));
        assert_eq!(aug.category, ModelCategory::RobustnessIntervention);
    }

    #[test]
    fn unknown_category_is_rejected_with_line() {
        let text = "a\tstandard\t-\tx\ty\nb\trobust_models\t-\tx\ty\n";
        let err = ModelRegistry::parse(text, "t").unwrap_err();
        match err {
            StoreError::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("unknown category"), "{message}");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn duplicates_and_dangling_links() {
        let dup = "a\tstandard\t-\tx\ty\na\tmore_data\t-\tx\ty\n";
        assert!(matches!(ModelRegistry::parse(dup, "t"), Err(StoreError::DuplicateModel(id)) if id == "a"));
        let dangling = "a\tstandard\tzzz\tx\ty\n";
        assert!(matches!(
            ModelRegistry::parse(dangling, "t"),
            Err(StoreError::DanglingBaseModel { .. })
        ));
        let selfref = "a\tstandard\ta\tx\ty\n";
        assert!(matches!(ModelRegistry::parse(selfref, "t"), Err(StoreError::SelfBase(_))));
    }

    #[test]
    fn malformed_line_reports_number() {
        let text = "# header\n\na\tstandard\t-\tx\n";
        match ModelRegistry::parse(text, "t").unwrap_err() {
            StoreError::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn bundled_testbed_has_204_models() {
        let reg = ModelRegistry::bundled_testbed();
        assert_eq!(reg.len(), 204);
        // Category labels as given in the published per-model list.
        assert_eq!(reg.count(ModelCategory::Standard), 88);
        assert_eq!(reg.count(ModelCategory::RobustnessIntervention), 86);
        assert_eq!(reg.count(ModelCategory::MoreData), 30);
        // Excluding the models trained on subsampled ImageNet.
        let full_data_standard = reg
            .iter()
            .filter(|r| r.category == ModelCategory::Standard && r.training_data_tag == "imagenet")
            .count();
        assert_eq!(full_data_standard, 80);
        assert_eq!(reg.get("resnet50_augmix").unwrap().base_model.as_deref(), Some("resnet50"));
    }
}
