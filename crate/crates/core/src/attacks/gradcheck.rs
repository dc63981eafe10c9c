use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DifferentiableClassifier;

pub const DEFAULT_GRADCHECK_STEP: f64 = 1e-5;
pub const DEFAULT_GRADCHECK_COORDS: usize = 64;

/// Largest relative error between `loss_gradient` and central differences
/// of `loss` over `coords` randomly chosen coordinates (all of them when the
/// input is smaller). Relative error is `|a - n| / max(|a|, |n|)`, with
/// pairs below 1e-12 in both magnitudes counted as exact.
pub fn finite_difference_gradcheck(
    model: &dyn DifferentiableClassifier,
    x: &[f64],
    label: usize,
    h: f64,
    coords: usize,
    seed: u64,
) -> f64 {
    let analytic = model.loss_gradient(x, label);
    let picked: Vec<usize> = if coords >= x.len() {
        (0..x.len()).collect()
    } else {
        sample(&mut ChaCha8Rng::seed_from_u64(seed), x.len(), coords).into_vec()
    };
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for i in picked {
        probe[i] = x[i] + h;
        let up = model.loss(&probe, label);
        probe[i] = x[i] - h;
        let down = model.loss(&probe, label);
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * h);
        let scale = analytic[i].abs().max(numeric.abs());
        if scale > 1e-12 {
            worst = worst.max((analytic[i] - numeric).abs() / scale);
        }
    }
    worst
}
