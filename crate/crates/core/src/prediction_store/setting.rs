use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::StoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SettingKind {
    NaturalDataset,
    Consistency,
    AdversariallyFiltered,
    Corruption,
    AdversarialAttack,
    Stylized,
}

impl fmt::Display for SettingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SettingKind::NaturalDataset => "natural_dataset",
            SettingKind::Consistency => "consistency",
            SettingKind::AdversariallyFiltered => "adversarially_filtered",
            SettingKind::Corruption => "corruption",
            SettingKind::AdversarialAttack => "adversarial_attack",
            SettingKind::Stylized => "stylized",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StorageFlavor {
    InMemory,
    OnDisk,
    #[default]
    NotApplicable,
}

/// One column of the testbed grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSetting {
    pub setting_id: String,
    pub kind: SettingKind,
    pub class_space: Vec<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub storage_flavor: StorageFlavor,
}

impl EvalSetting {
    pub fn new(setting_id: impl Into<String>, kind: SettingKind, class_space: Vec<String>) -> Self {
        Self {
            setting_id: setting_id.into(),
            kind,
            class_space,
            params: BTreeMap::new(),
            storage_flavor: StorageFlavor::NotApplicable,
        }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        let invalid = |message: String| StoreError::InvalidSetting {
            setting: self.setting_id.clone(),
            message,
        };
        if self.setting_id.is_empty() {
            return Err(invalid("empty setting id".into()));
        }
        if self.class_space.is_empty() {
            return Err(invalid("class space is empty".into()));
        }
        let mut seen = HashSet::with_capacity(self.class_space.len());
        for label in &self.class_space {
            if label == super::OUT_OF_SPACE_TOKEN {
                return Err(invalid("class space contains the reserved label -1".into()));
            }
            if !seen.insert(label.as_str()) {
                return Err(invalid(format!("duplicate label {label:?} in class space")));
            }
        }
        match self.kind {
            SettingKind::Corruption => match self.params.get("severity") {
                Some(&s) if s.fract() == 0.0 && (1.0..=5.0).contains(&s) => {}
                Some(&s) => return Err(invalid(format!("severity {s} is not an integer in 1..=5"))),
                None => return Err(invalid("corruption settings need a severity parameter".into())),
            },
            SettingKind::AdversarialAttack => match self.params.get("epsilon") {
                Some(&e) if e > 0.0 && e.is_finite() => {}
                Some(&e) => return Err(invalid(format!("epsilon {e} must be positive"))),
                None => return Err(invalid("attack settings need an epsilon parameter".into())),
            },
            _ => {}
        }
        Ok(())
    }
}
