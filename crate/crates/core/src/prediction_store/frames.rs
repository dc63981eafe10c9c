use std::collections::HashSet;
use std::path::Path;

use super::{data_lines, read_text, SettingView, StoreError};

/// Neighborhood half-width used by the pm-k metric when none is given.
pub const DEFAULT_PM_K: usize = 10;

/// An anchor frame and the perceptually similar frames around it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSet {
    pub anchor: String,
    pub neighbors: Vec<String>,
    pub label: String,
}

impl FrameSet {
    pub fn new(anchor: impl Into<String>, label: impl Into<String>, neighbors: Vec<String>) -> Result<Self, StoreError> {
        let fs = Self {
            anchor: anchor.into(),
            neighbors,
            label: label.into(),
        };
        fs.check()?;
        Ok(fs)
    }

    fn check(&self) -> Result<(), StoreError> {
        let invalid = |message: &str| StoreError::InvalidFrameSet {
            anchor: self.anchor.clone(),
            message: message.to_string(),
        };
        let mut seen = HashSet::with_capacity(self.neighbors.len());
        for n in &self.neighbors {
            if n == &self.anchor {
                return Err(invalid("anchor listed among its neighbors"));
            }
            if !seen.insert(n.as_str()) {
                return Err(invalid(&format!("neighbor {n:?} listed twice")));
            }
        }
        Ok(())
    }

    pub fn members(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.anchor.as_str()).chain(self.neighbors.iter().map(String::as_str))
    }

    /// Manifest lines: `anchor_id,label,neighbor;neighbor;...`.
    pub fn parse_manifest(text: &str, source: &str) -> Result<Vec<FrameSet>, StoreError> {
        let mut out = Vec::new();
        let mut anchors = HashSet::new();
        for (line, raw) in data_lines(text) {
            let fields: Vec<&str> = raw.splitn(3, ',').map(str::trim).collect();
            if fields.len() < 2 || fields[0].is_empty() {
                return Err(StoreError::Parse {
                    source_name: source.to_string(),
                    line,
                    message: "expected `anchor_id,label,neighbor;neighbor;...`".into(),
                });
            }
            let neighbors = fields
                .get(2)
                .map(|n| {
                    n.split(';')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(str::to_string)
                        .collect()
                })
                .unwrap_or_default();
            if !anchors.insert(fields[0].to_string()) {
                return Err(StoreError::Parse {
                    source_name: source.to_string(),
                    line,
                    message: format!("anchor {:?} listed twice", fields[0]),
                });
            }
            out.push(FrameSet::new(fields[0], fields[1], neighbors)?);
        }
        Ok(out)
    }

    pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<FrameSet>, StoreError> {
        let path = path.as_ref();
        Self::parse_manifest(&read_text(path)?, &path.display().to_string())
    }

    /// Checks that every member has a truth entry equal to the set's label.
    pub fn check_against(&self, view: &SettingView) -> Result<(), StoreError> {
        for member in self.members() {
            match view.truth(member) {
                None => {
                    return Err(StoreError::InvalidFrameSet {
                        anchor: self.anchor.clone(),
                        message: format!("frame {member:?} has no truth entry in {:?}", view.id()),
                    })
                }
                Some(l) if view.label_name(l) != self.label => {
                    return Err(StoreError::InvalidFrameSet {
                        anchor: self.anchor.clone(),
                        message: format!(
                            "frame {member:?} is labelled {:?}, set label is {:?}",
                            view.label_name(l),
                            self.label
                        ),
                    })
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}
