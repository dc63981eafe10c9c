use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{ModelRegistry, PredictionStore};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Misalignment {
    pub model: String,
    pub setting: String,
    pub missing: usize,
    pub extra: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum GridIssue {
    MissingCell { model: String, setting: String },
    Misaligned(Misalignment),
    UnregisteredModel(String),
    OrphanModel(String),
    OrphanSetting(String),
}

impl fmt::Display for GridIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridIssue::MissingCell { model, setting } => write!(f, "missing_cell\t{model}\t{setting}"),
            GridIssue::Misaligned(m) => write!(
                f,
                "misaligned\t{}\t{}\tmissing={}\textra={}",
                m.model, m.setting, m.missing, m.extra
            ),
            GridIssue::UnregisteredModel(m) => write!(f, "unregistered_model\t{m}"),
            GridIssue::OrphanModel(m) => write!(f, "orphan_model\t{m}"),
            GridIssue::OrphanSetting(s) => write!(f, "orphan_setting\t{s}"),
        }
    }
}

/// Result of [`validate_grid`]; issues are sorted, so the report is a pure
/// function of the store and registry.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<GridIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    /// Misaligned example sets are structural defects; empty cells and
    /// orphans are expected in a partially filled testbed.
    pub fn has_structural_errors(&self) -> bool {
        self.issues.iter().any(|i| matches!(i, GridIssue::Misaligned(_)))
    }

    pub fn missing_cells(&self) -> impl Iterator<Item = (&str, &str)> {
        self.issues.iter().filter_map(|i| match i {
            GridIssue::MissingCell { model, setting } => Some((model.as_str(), setting.as_str())),
            _ => None,
        })
    }

    pub fn misaligned(&self) -> impl Iterator<Item = &Misalignment> {
        self.issues.iter().filter_map(|i| match i {
            GridIssue::Misaligned(m) => Some(m),
            _ => None,
        })
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// Reports empty cells, misaligned example sets and orphans.
///
/// The reference example set of a setting is the one shared by the most
/// non-subsampled cells (ties go to the smaller set); cells that differ
/// from it are reported as misaligned.
pub fn validate_grid(store: &PredictionStore, registry: &ModelRegistry) -> ValidationReport {
    let mut issues = BTreeSet::new();
    let store_models = store.models();

    for view in store.settings() {
        if view.models().next().is_none() {
            issues.insert(GridIssue::OrphanSetting(view.id().to_string()));
        }
        for record in registry.iter() {
            if view.cell(&record.model_id).is_none() {
                issues.insert(GridIssue::MissingCell {
                    model: record.model_id.clone(),
                    setting: view.id().to_string(),
                });
            }
        }

        let mut by_set: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
        let mut sets = Vec::new();
        for (model, cell) in view.cells() {
            if cell.is_subsampled() {
                continue;
            }
            let set: Vec<u32> = view.example_set_of(model).unwrap().into_iter().collect();
            *by_set.entry(set.clone()).or_default() += 1;
            sets.push((model, set));
        }
        let reference = by_set
            .iter()
            .max_by(|(a, ca), (b, cb)| ca.cmp(cb).then_with(|| b.len().cmp(&a.len())).then_with(|| b.cmp(a)))
            .map(|(s, _)| s.iter().copied().collect::<BTreeSet<u32>>());
        if let Some(reference) = reference {
            for (model, set) in sets {
                let set: BTreeSet<u32> = set.into_iter().collect();
                if set != reference {
                    issues.insert(GridIssue::Misaligned(Misalignment {
                        model: model.to_string(),
                        setting: view.id().to_string(),
                        missing: reference.difference(&set).count(),
                        extra: set.difference(&reference).count(),
                    }));
                }
            }
        }
    }

    for model in &store_models {
        if !registry.contains(model) {
            issues.insert(GridIssue::UnregisteredModel(model.clone()));
        }
    }
    for record in registry.iter() {
        if !store_models.contains(&record.model_id) {
            issues.insert(GridIssue::OrphanModel(record.model_id.clone()));
        }
    }
    ValidationReport {
        issues: issues.into_iter().collect(),
    }
}
