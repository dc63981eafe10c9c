use std::collections::BTreeMap;

use crate::seed::hash64;

use super::AttackError;

/// Class-balanced deterministic subset of `(example_id, label)` pairs.
///
/// Within each class, examples are ranked by `hash64(example_id, seed)`
/// and the first `round(fraction · class_size)` (at least one) are kept.
/// Returns indices into `examples`, ascending.
pub fn stratified_subsample<L: Ord>(examples: &[(String, L)], fraction: f64, seed: u64) -> Result<Vec<usize>, AttackError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(AttackError::InvalidFraction(fraction));
    }
    let mut by_class: BTreeMap<&L, Vec<(u64, usize)>> = BTreeMap::new();
    for (i, (id, label)) in examples.iter().enumerate() {
        let key = hash64(&[b"subsample", id.as_bytes(), &seed.to_le_bytes()]);
        by_class.entry(label).or_default().push((key, i));
    }
    let mut keep = Vec::new();
    for members in by_class.values_mut() {
        members.sort_unstable();
        let n = ((fraction * members.len() as f64).round() as usize).max(1);
        keep.extend(members.iter().take(n).map(|m| m.1));
    }
    keep.sort_unstable();
    Ok(keep)
}
