use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::metrics::{Family, DEFAULT_CI_LEVEL};
use crate::prediction_store::{SettingKind, StorageFlavor};
use crate::robustness::{ModelFilter, DEFAULT_GRID_POINTS};

use super::ReportError;

/// A whole analysis run, read from one TOML file.
///
/// Relative paths are resolved against the directory holding the file.
/// See the README for a complete example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Master seed for bootstrap replicates.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub testbed: TestbedConfig,
    #[serde(default)]
    pub settings: Vec<SettingConfig>,
    #[serde(default)]
    pub subsets: BTreeMap<String, SubsetConfig>,
    /// Named averages over settings, usable wherever a setting id is.
    #[serde(default)]
    pub families: BTreeMap<String, Family>,
    #[serde(default)]
    pub shifts: Vec<ShiftPair>,
    #[serde(default)]
    pub correlation: Option<CorrelationConfig>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestbedConfig {
    pub registry: PathBuf,
    /// Pre-aggregated accuracies: `model_id,setting_id,correct,total` or
    /// `model_id,setting_id,accuracy`.
    #[serde(default)]
    pub accuracy_table: Option<PathBuf>,
    #[serde(default = "default_ci_level")]
    pub ci_level: f64,
}

fn default_ci_level() -> f64 {
    DEFAULT_CI_LEVEL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingConfig {
    pub id: String,
    pub kind: SettingKind,
    pub truth: PathBuf,
    #[serde(default)]
    pub predictions: Vec<PathBuf>,
    /// Defaults to the labels found in the truth file.
    #[serde(default)]
    pub class_space: Option<Vec<String>>,
    #[serde(default)]
    pub frame_sets: Option<PathBuf>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub storage_flavor: StorageFlavor,
}

/// Either a label file or the name of a bundled subset (`imagenet_125`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetConfig {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub bundled: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    #[default]
    Single,
    Piecewise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisScale {
    #[default]
    Logit,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapSettings {
    /// 0 disables the band.
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_band_level")]
    pub level: f64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_replicates() -> usize {
    1000
}

fn default_band_level() -> f64 {
    0.95
}

fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

impl Default for BootstrapSettings {
    fn default() -> Self {
        Self {
            replicates: default_replicates(),
            level: default_band_level(),
            grid_points: default_grid_points(),
            workers: None,
        }
    }
}

/// One standard → shifted comparison.
///
/// With `pm_k` set, both axes come from the frame sets of one consistency
/// setting: x is pm-0 (anchors only), y is pm-k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftPair {
    pub shift_id: String,
    pub standard_setting: String,
    #[serde(default)]
    pub shifted_setting: Option<String>,
    /// Applied to the standard setting only.
    #[serde(default)]
    pub class_subset: Option<String>,
    #[serde(default)]
    pub fit_mode: FitMode,
    #[serde(default)]
    pub knee_model: Option<String>,
    #[serde(default)]
    pub pm_k: Option<usize>,
    #[serde(default)]
    pub axis_scale: AxisScale,
    #[serde(default)]
    pub ci_level: Option<f64>,
    #[serde(default)]
    pub bootstrap: BootstrapSettings,
}

impl ShiftPair {
    pub fn new(shift_id: impl Into<String>, standard: impl Into<String>, shifted: impl Into<String>) -> Self {
        Self {
            shift_id: shift_id.into(),
            standard_setting: standard.into(),
            shifted_setting: Some(shifted.into()),
            class_subset: None,
            fit_mode: FitMode::Single,
            knee_model: None,
            pm_k: None,
            axis_scale: AxisScale::Logit,
            ci_level: None,
            bootstrap: BootstrapSettings::default(),
        }
    }

    pub fn shifted(&self) -> &str {
        self.shifted_setting.as_deref().unwrap_or(&self.standard_setting)
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        let bad = |message: String| ReportError::Config(format!("shift {:?}: {message}", self.shift_id));
        if self.shift_id.is_empty() {
            return Err(ReportError::Config("shift with empty shift_id".into()));
        }
        if self.fit_mode == FitMode::Piecewise && self.knee_model.is_none() {
            return Err(bad("piecewise fit needs a knee_model".into()));
        }
        match self.pm_k {
            Some(_) if self.shifted() != self.standard_setting => {
                return Err(bad("pm_k compares frame sets of a single setting; shifted_setting must match".into()))
            }
            Some(_) if self.class_subset.is_some() => {
                return Err(bad("pm_k cannot be combined with a class subset".into()))
            }
            None if self.shifted_setting.is_none() => return Err(bad("shifted_setting is required".into())),
            _ => {}
        }
        if let Some(l) = self.ci_level {
            check_level(l).map_err(|_| bad(format!("ci_level {l} outside (0, 1)")))?;
        }
        check_level(self.bootstrap.level).map_err(|_| bad(format!("bootstrap level {} outside (0, 1)", self.bootstrap.level)))?;
        if self.bootstrap.grid_points < 2 {
            return Err(bad("bootstrap grid_points must be at least 2".into()));
        }
        if self.bootstrap.workers == Some(0) {
            return Err(bad("bootstrap workers must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationConfig {
    /// Shift ids on the x side (typically synthetic shifts).
    pub rows: Vec<String>,
    /// Shift ids on the y side (typically natural shifts).
    pub cols: Vec<String>,
    /// `non_standard_only` (default), `all` or `category:<name>`.
    #[serde(default)]
    pub filter: Option<String>,
}

impl CorrelationConfig {
    pub fn model_filter(&self) -> Result<ModelFilter, ReportError> {
        match &self.filter {
            None => Ok(ModelFilter::default()),
            Some(s) => s.parse().map_err(ReportError::Config),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub replicates: Option<usize>,
    pub workers: Option<usize>,
}

fn check_level(level: f64) -> Result<(), ()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(())
    }
}

impl AnalysisConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ReportError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ReportError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, ReportError> {
        let mut config: AnalysisConfig = toml::from_str(text).map_err(|e| ReportError::Config(e.to_string()))?;
        config.base_dir = base_dir.into();
        config.validate()?;
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(dir) = &o.out_dir {
            self.out_dir = Some(dir.clone());
        }
        for shift in &mut self.shifts {
            if let Some(r) = o.replicates {
                shift.bootstrap.replicates = r;
            }
            if let Some(w) = o.workers {
                shift.bootstrap.workers = Some(w);
            }
        }
    }

    /// Resolves `p` against the config directory.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn shift(&self, shift_id: &str) -> Result<&ShiftPair, ReportError> {
        self.shifts
            .iter()
            .find(|s| s.shift_id == shift_id)
            .ok_or_else(|| ReportError::Config(format!("no shift named {shift_id:?}")))
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        check_level(self.testbed.ci_level)
            .map_err(|_| ReportError::Config(format!("ci_level {} outside (0, 1)", self.testbed.ci_level)))?;
        let mut names = BTreeSet::new();
        for s in &self.settings {
            if !names.insert(s.id.as_str()) {
                return Err(ReportError::Config(format!("setting {:?} declared twice", s.id)));
            }
        }
        for f in self.families.keys() {
            if !names.insert(f.as_str()) {
                return Err(ReportError::Config(format!("family {f:?} clashes with a setting id")));
            }
        }
        for (id, s) in &self.subsets {
            match (&s.path, &s.bundled) {
                (Some(_), None) => {}
                (None, Some(b)) if b == "imagenet_125" => {}
                (None, Some(b)) => return Err(ReportError::Config(format!("subset {id:?}: unknown bundled subset {b:?}"))),
                _ => return Err(ReportError::Config(format!("subset {id:?}: give exactly one of path, bundled"))),
            }
        }
        let mut shift_ids = BTreeSet::new();
        for shift in &self.shifts {
            shift.validate()?;
            if !shift_ids.insert(shift.shift_id.as_str()) {
                return Err(ReportError::Config(format!("shift {:?} declared twice", shift.shift_id)));
            }
            if let Some(sub) = &shift.class_subset {
                if !self.subsets.contains_key(sub) {
                    return Err(ReportError::Config(format!(
                        "shift {:?}: unknown class subset {sub:?}",
                        shift.shift_id
                    )));
                }
            }
        }
        if let Some(c) = &self.correlation {
            c.model_filter()?;
            for id in c.rows.iter().chain(&c.cols) {
                if !shift_ids.contains(id.as_str()) {
                    return Err(ReportError::Config(format!("correlation names unknown shift {id:?}")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [testbed]
        registry = "models.tsv"

        [[shifts]]
        shift_id = "v2"
        standard_setting = "val"
        shifted_setting = "v2"
    "#;

    #[test]
    fn defaults() {
        let c = AnalysisConfig::parse(MINIMAL, "/data").unwrap();
        assert_eq!(c.seed, 0);
        assert_eq!(c.testbed.ci_level, 0.995);
        let s = &c.shifts[0];
        assert_eq!(s.fit_mode, FitMode::Single);
        assert_eq!(s.axis_scale, AxisScale::Logit);
        assert_eq!(s.bootstrap, BootstrapSettings::default());
        assert_eq!(c.resolve(Path::new("models.tsv")), PathBuf::from("/data/models.tsv"));
        assert_eq!(c.resolve(Path::new("/abs")), PathBuf::from("/abs"));
    }

    #[test]
    fn piecewise_without_knee_is_rejected() {
        let text = MINIMAL.replace("shifted_setting = \"v2\"", "shifted_setting = \"a\"\nfit_mode = \"piecewise\"");
        let err = AnalysisConfig::parse(&text, "").unwrap_err();
        assert!(matches!(err, ReportError::Config(ref m) if m.contains("knee_model")), "{err}");
    }

    #[test]
    fn unknown_keys_and_shifts_rejected() {
        assert!(AnalysisConfig::parse(&format!("{MINIMAL}\nbogus = 1\n"), "").is_err());
        let text = format!("{MINIMAL}\n[correlation]\nrows = [\"v2\"]\ncols = [\"nope\"]\n");
        assert!(AnalysisConfig::parse(&text, "").is_err());
        let text = format!("{MINIMAL}\n[correlation]\nrows = [\"v2\"]\ncols = [\"v2\"]\nfilter = \"category:more_data\"\n");
        let c = AnalysisConfig::parse(&text, "").unwrap();
        assert_eq!(
            c.correlation.unwrap().model_filter().unwrap(),
            ModelFilter::Category(crate::prediction_store::ModelCategory::MoreData)
        );
    }

    #[test]
    fn pm_k_needs_one_setting() {
        let text = MINIMAL.replace("shifted_setting = \"v2\"", "shifted_setting = \"v2\"\npm_k = 10");
        assert!(AnalysisConfig::parse(&text, "").is_err());
        let text = MINIMAL.replace("shifted_setting = \"v2\"", "pm_k = 10");
        let c = AnalysisConfig::parse(&text, "").unwrap();
        assert_eq!(c.shifts[0].shifted(), "val");
    }

    #[test]
    fn overrides_win() {
        let mut c = AnalysisConfig::parse(&format!("seed = 4\n{MINIMAL}"), "").unwrap();
        c.apply(&Overrides {
            seed: Some(9),
            replicates: Some(10),
            workers: Some(2),
            out_dir: Some("out".into()),
        });
        assert_eq!(c.seed, 9);
        assert_eq!(c.shifts[0].bootstrap.replicates, 10);
        assert_eq!(c.shifts[0].bootstrap.workers, Some(2));
        assert_eq!(c.out_dir, Some(PathBuf::from("out")));
    }

    #[test]
    fn families_parse_flat_and_grouped() {
        let text = format!("{MINIMAL}\n[families]\navg_pgd = [\"a\", \"b\"]\navg_corruptions = [[\"n1\", \"n2\"], [\"b1\"]]\n");
        let c = AnalysisConfig::parse(&text, "").unwrap();
        assert_eq!(c.families["avg_pgd"], Family::Flat(vec!["a".into(), "b".into()]));
        assert!(matches!(c.families["avg_corruptions"], Family::Grouped(ref g) if g.len() == 2));
    }
}
