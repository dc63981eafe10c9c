use crate::prediction_store::{FrameSet, SettingView, StoreError};

use super::{AccuracyEstimate, MetricsError};

/// pm-k accuracy over frame sets.
///
/// A set counts as correct only if its anchor and, for `k > 0`, every
/// listed neighbor are classified correctly. `k = 0` scores anchors alone.
/// Neighbor lists may be shorter than `2k` but not longer.
pub fn pmk_accuracy(
    view: &SettingView,
    model_id: &str,
    frame_sets: &[FrameSet],
    k: usize,
    level: f64,
) -> Result<AccuracyEstimate, MetricsError> {
    if frame_sets.is_empty() {
        return Err(MetricsError::NoFrameSets);
    }
    let correctness = view.correctness(model_id)?;
    let mut correct = 0u64;
    for set in frame_sets {
        if k > 0 && set.neighbors.len() > 2 * k {
            return Err(MetricsError::TooManyNeighbors {
                anchor: set.anchor.clone(),
                neighbors: set.neighbors.len(),
                limit: 2 * k,
            });
        }
        let members: Box<dyn Iterator<Item = &str>> = if k == 0 {
            Box::new(std::iter::once(set.anchor.as_str()))
        } else {
            Box::new(set.members())
        };
        let mut all_right = true;
        for frame in members {
            let idx = view.example_index(frame).ok_or_else(|| StoreError::InvalidFrameSet {
                anchor: set.anchor.clone(),
                message: format!("frame {frame:?} has no truth entry in {:?}", view.id()),
            })?;
            match correctness[idx as usize] {
                Some(ok) => all_right &= ok,
                None => {
                    return Err(MetricsError::MissingPrediction {
                        model: model_id.to_string(),
                        frame: frame.to_string(),
                    })
                }
            }
        }
        if all_right {
            correct += 1;
        }
    }
    AccuracyEstimate::from_counts(correct, frame_sets.len() as u64, level)
}
