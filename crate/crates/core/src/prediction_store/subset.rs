use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use super::{data_lines, read_text, PredictionStore, SettingView, StoreError};

/// A named set of labels used to restrict a setting to fewer classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSubset {
    pub subset_id: String,
    pub labels: BTreeSet<String>,
}

const IMAGENET_125: &str = include_str!("../../assets/imagenet_125_classes.txt");

impl ClassSubset {
    pub fn new<I, S>(subset_id: impl Into<String>, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            subset_id: subset_id.into(),
            labels: labels.into_iter().map(Into::into).collect(),
        }
    }

    /// One label id per line.
    pub fn parse(subset_id: &str, text: &str) -> Result<Self, StoreError> {
        let mut labels = BTreeSet::new();
        for (line, raw) in data_lines(text) {
            let label = raw.trim();
            if !labels.insert(label.to_string()) {
                return Err(StoreError::Parse {
                    source_name: subset_id.to_string(),
                    line,
                    message: format!("duplicate label {label:?}"),
                });
            }
        }
        if labels.is_empty() {
            return Err(StoreError::Parse {
                source_name: subset_id.to_string(),
                line: 0,
                message: "class subset is empty".into(),
            });
        }
        Ok(Self {
            subset_id: subset_id.to_string(),
            labels,
        })
    }

    pub fn load(subset_id: &str, path: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::parse(subset_id, &read_text(path.as_ref())?)
    }

    /// The 125 ILSVRC classes (WordNet ids) used for the subsampled-class
    /// evaluation.
    pub fn imagenet_125() -> Self {
        Self::parse("imagenet_125", IMAGENET_125).expect("bundled subset is well-formed")
    }
}

/// Restricts a setting to the examples whose true label is in `subset`.
///
/// Predictions keep their full-space label; a prediction outside the subset
/// becomes out-of-space and scores as wrong.
pub fn class_subset_view(view: &SettingView, subset: &ClassSubset) -> Result<SettingView, StoreError> {
    let space: HashSet<&str> = view.class_space().iter().map(String::as_str).collect();
    let missing: Vec<String> = subset
        .labels
        .iter()
        .filter(|l| !space.contains(l.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(StoreError::SubsetNotInClassSpace {
            subset: subset.subset_id.clone(),
            setting: view.id().to_string(),
            missing,
        });
    }
    let keep: BTreeSet<usize> = view
        .class_space()
        .iter()
        .enumerate()
        .filter(|(_, l)| subset.labels.contains(*l))
        .map(|(i, _)| i)
        .collect();
    let restricted = view.restricted(&keep);
    if restricted.examples().is_empty() {
        return Err(StoreError::EmptyView {
            subset: subset.subset_id.clone(),
            setting: view.id().to_string(),
        });
    }
    Ok(restricted)
}

impl PredictionStore {
    pub fn class_subset_view(&self, setting_id: &str, subset: &ClassSubset) -> Result<SettingView, StoreError> {
        class_subset_view(self.setting(setting_id)?, subset)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{EvalSetting, SettingKind};
    use super::*;
    use proptest::prelude::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    /// Setting with `n_classes` labels, examples cycling through them, and
    /// two models with deterministic mixed predictions.
    fn view(n_classes: usize, n_examples: usize) -> SettingView {
        let setting = EvalSetting::new("s", SettingKind::NaturalDataset, labels(n_classes));
        let mut v = SettingView::new(setting).unwrap();
        let truth: String = (0..n_examples)
            .map(|i| format!("e{i},c{}\n", i % n_classes))
            .collect();
        v.ingest_truth_str(&truth, "t").unwrap();
        let preds: String = (0..n_examples)
            .flat_map(|i| {
                [
                    format!("a,s,e{i},c{}\n", (i * 7) % n_classes),
                    format!("b,s,e{i},c{}\n", i % n_classes),
                ]
            })
            .collect();
        v.ingest_predictions_str(&preds, "p").unwrap();
        v
    }

    #[test]
    fn full_space_is_identity() {
        let v = view(5, 20);
        let all = ClassSubset::new("all", labels(5));
        assert_eq!(class_subset_view(&v, &all).unwrap(), v);
    }

    #[test]
    fn absent_labels_give_empty_view() {
        let v = view(5, 3);
        let s = ClassSubset::new("late", ["c4"]);
        assert!(matches!(class_subset_view(&v, &s), Err(StoreError::EmptyView { .. })));
    }

    #[test]
    fn labels_outside_space_rejected() {
        let v = view(3, 6);
        let s = ClassSubset::new("x", ["c0", "zebra"]);
        assert!(matches!(
            class_subset_view(&v, &s),
            Err(StoreError::SubsetNotInClassSpace { .. })
        ));
    }

    #[test]
    fn out_of_subset_predictions_become_wrong() {
        let v = view(4, 8);
        let s = ClassSubset::new("two", ["c0", "c1"]);
        let sub = class_subset_view(&v, &s).unwrap();
        assert_eq!(sub.examples().len(), 4);
        assert!(sub.examples().iter().all(|e| ["c0", "c1"].contains(&sub.label_name(e.label))));
        // Model b predicts the truth everywhere, so stays perfect.
        assert!(sub.correctness("b").unwrap().iter().all(|c| *c == Some(true)));
        // Model a predicts c{7i mod 4}; examples e0,e1,e4,e5 -> c0,c3,c0,c3.
        assert_eq!(
            sub.correctness("a").unwrap(),
            vec![Some(true), Some(false), Some(true), Some(false)]
        );
        let out = sub.cell("a").unwrap().predictions()[1].1;
        assert!(out.is_out_of_space());
    }

    #[test]
    fn bundled_125_subset() {
        let s = ClassSubset::imagenet_125();
        assert_eq!(s.labels.len(), 125);
        assert!(s.labels.contains("n01494475"));
        assert!(s.labels.contains("n12620546"));
    }

    proptest! {
        #[test]
        fn composition_is_intersection(
            a in proptest::collection::btree_set(0usize..8, 1..8),
            b_frac in proptest::collection::vec(any::<bool>(), 8),
        ) {
            let v = view(8, 40);
            let sa = ClassSubset::new("a", a.iter().map(|i| format!("c{i}")));
            // B is drawn inside A so the second view's precondition holds.
            let b: Vec<usize> = a.iter().copied().filter(|i| b_frac[*i]).collect();
            prop_assume!(!b.is_empty());
            let sb = ClassSubset::new("b", b.iter().map(|i| format!("c{i}")));
            let both = ClassSubset::new(
                "ab",
                sa.labels.intersection(&sb.labels).cloned().collect::<Vec<_>>(),
            );
            let composed = class_subset_view(&class_subset_view(&v, &sa).unwrap(), &sb).unwrap();
            let direct = class_subset_view(&v, &both).unwrap();
            prop_assert_eq!(composed, direct);
        }
    }
}
