/// Inputs are clamped to `[ε, 1 − ε]` before the logit so accuracies of
/// exactly 0 or 1 stay finite.
pub const DEFAULT_CLAMP_EPSILON: f64 = 1e-6;

/// Natural-log logit with the default clamp.
pub fn logit(p: f64) -> f64 {
    logit_clamped(p, DEFAULT_CLAMP_EPSILON)
}

pub fn logit_clamped(p: f64, epsilon: f64) -> f64 {
    let p = p.clamp(epsilon, 1.0 - epsilon);
    (p / (1.0 - p)).ln()
}

pub fn inverse_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
