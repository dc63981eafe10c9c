use std::collections::HashMap;
use std::sync::OnceLock;

use super::CorruptionKind;

const TABLE: &str = include_str!("../../assets/corruption_severities.tsv");

fn param_count(kind: CorruptionKind) -> usize {
    use CorruptionKind::*;
    match kind {
        Greyscale => 0,
        DefocusBlur | MotionBlur | Saturate => 2,
        ZoomBlur | ElasticTransform => 3,
        _ => 1,
    }
}

fn parse(text: &str) -> Result<HashMap<(CorruptionKind, u8), Vec<f64>>, String> {
    let mut table = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let kind: CorruptionKind = cols
            .next()
            .unwrap_or_default()
            .parse()
            .map_err(|e| format!("line {}: {e}", i + 1))?;
        let severity: u8 = cols
            .next()
            .and_then(|s| s.parse().ok())
            .filter(|s| (1..=5).contains(s))
            .ok_or_else(|| format!("line {}: bad severity", i + 1))?;
        let params = cols
            .next()
            .unwrap_or("")
            .split_whitespace()
            .map(|p| p.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        if params.len() != param_count(kind) {
            return Err(format!("line {}: {kind} takes {} parameters", i + 1, param_count(kind)));
        }
        if table.insert((kind, severity), params).is_some() {
            return Err(format!("line {}: duplicate row", i + 1));
        }
    }
    for kind in CorruptionKind::ALL {
        for s in 1..=5 {
            if !table.contains_key(&(kind, s)) {
                return Err(format!("missing row {kind} {s}"));
            }
        }
    }
    Ok(table)
}

/// Reference parameters for `kind` at `severity` (1..=5).
pub fn severity_params(kind: CorruptionKind, severity: u8) -> &'static [f64] {
    static PARSED: OnceLock<HashMap<(CorruptionKind, u8), Vec<f64>>> = OnceLock::new();
    PARSED
        .get_or_init(|| parse(TABLE).expect("bundled severity table is valid"))
        .get(&(kind, severity))
        .map(Vec::as_slice)
        .expect("severity checked by caller")
}

/// The zoom factors for a zoom_blur row: `start + i · step`, `i < count`.
pub(crate) fn zoom_factors(params: &[f64]) -> Vec<f64> {
    let (start, step, count) = (params[0], params[1], params[2] as usize);
    (0..count).map(|i| start + i as f64 * step).collect()
}
