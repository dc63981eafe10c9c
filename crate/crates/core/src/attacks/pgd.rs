use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seed::hash64;

use super::{AttackError, AttackSpec, DifferentiableClassifier, Norm};

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Projects `delta` onto the ε-ball: coordinate clipping for ℓ∞, radial
/// rescaling for ℓ₂ (only when outside the ball).
pub fn project_perturbation(delta: &[f64], norm: Norm, epsilon: f64) -> Vec<f64> {
    match norm {
        Norm::Linf => delta.iter().map(|d| d.clamp(-epsilon, epsilon)).collect(),
        Norm::L2 => {
            let n = l2_norm(delta);
            if n > epsilon {
                let s = epsilon / n;
                delta.iter().map(|d| d * s).collect()
            } else {
                delta.to_vec()
            }
        }
    }
}

/// Sign with `sign(0) = 0`.
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub adversarial: Vec<f64>,
    /// Loss at the start point followed by the loss after every step.
    pub losses: Vec<f64>,
}

impl AttackOutcome {
    pub fn initial_loss(&self) -> f64 {
        self.losses[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("losses has the start entry")
    }
}

fn check_input(model: &dyn DifferentiableClassifier, x: &[f64], label: usize) -> Result<(), AttackError> {
    if x.len() != model.input_len() {
        return Err(AttackError::InputLength {
            expected: model.input_len(),
            got: x.len(),
        });
    }
    if let Some(v) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(AttackError::InputRange(*v));
    }
    if label >= model.num_classes() {
        return Err(AttackError::LabelOutOfRange {
            label,
            classes: model.num_classes(),
        });
    }
    Ok(())
}

/// Box-clipped perturbation `clip(t · delta, -x0, 1 - x0)`.
fn clipped_scaled(x0: &[f64], delta: &[f64], t: f64) -> Vec<f64> {
    delta.iter().zip(x0).map(|(d, x)| (t * d).clamp(-x, 1.0 - x)).collect()
}

/// Euclidean projection of `x0 + delta` onto the intersection of the
/// ε-ball around `x0` and [0, 1]^d.
///
/// For ℓ∞ the intersection is a box and clipping is exact. For ℓ₂ the
/// projection is `clip(t · delta)` for the largest `t` in [0, 1] whose
/// clipped norm stays within ε, found by bisection. Rescaling first and
/// clipping afterwards is not a projection once pixels saturate, and the
/// loss can then fall between steps.
fn project_point(x0: &[f64], delta: &[f64], spec: &AttackSpec) -> Vec<f64> {
    let d = match spec.norm {
        Norm::Linf => project_perturbation(delta, Norm::Linf, spec.epsilon),
        Norm::L2 => {
            let full = clipped_scaled(x0, delta, 1.0);
            if l2_norm(&full) <= spec.epsilon {
                full
            } else {
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if l2_norm(&clipped_scaled(x0, delta, mid)) <= spec.epsilon {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                clipped_scaled(x0, delta, lo)
            }
        }
    };
    d.iter().zip(x0).map(|(d, x)| (x + d).clamp(0.0, 1.0)).collect()
}

fn random_delta(len: usize, spec: &AttackSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match spec.norm {
        Norm::Linf => (0..len).map(|_| rng.random_range(-spec.epsilon..=spec.epsilon)).collect(),
        Norm::L2 => {
            let g: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
            let n = l2_norm(&g);
            let r = spec.epsilon * rng.random::<f64>().powf(1.0 / len as f64);
            if n > 0.0 {
                g.iter().map(|v| v * r / n).collect()
            } else {
                vec![0.0; len]
            }
        }
    }
}

/// Untargeted PGD: `num_steps` ascent steps on the loss, each followed by
/// projection onto the ε-ball intersected with [0, 1]^d.
///
/// ℓ∞ steps move every coordinate by `step_size · sign(g)`; ℓ₂ steps move
/// `step_size` along `g / ‖g‖₂`. A zero gradient gives a zero step, so a
/// flat model returns the input unchanged when `random_start` is off.
/// `seed` is used only for the random start.
pub fn pgd_attack(
    model: &dyn DifferentiableClassifier,
    x0: &[f64],
    label: usize,
    spec: &AttackSpec,
    seed: u64,
) -> Result<AttackOutcome, AttackError> {
    spec.validate()?;
    check_input(model, x0, label)?;
    let mut x = if spec.random_start {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        project_point(x0, &random_delta(x0.len(), spec, &mut rng), spec)
    } else {
        x0.to_vec()
    };
    let mut losses = Vec::with_capacity(spec.num_steps + 1);
    losses.push(model.loss(&x, label));
    for _ in 0..spec.num_steps {
        let g = model.loss_gradient(&x, label);
        let step: Vec<f64> = match spec.norm {
            Norm::Linf => g.iter().map(|v| spec.step_size * sign(*v)).collect(),
            Norm::L2 => {
                let n = l2_norm(&g);
                if n > 0.0 {
                    g.iter().map(|v| spec.step_size * v / n).collect()
                } else {
                    vec![0.0; g.len()]
                }
            }
        };
        let delta: Vec<f64> = x.iter().zip(&step).zip(x0).map(|((xi, s), o)| xi + s - o).collect();
        x = project_point(x0, &delta, spec);
        losses.push(model.loss(&x, label));
    }
    Ok(AttackOutcome { adversarial: x, losses })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackInput {
    pub example_id: String,
    pub x: Vec<f64>,
    pub label: usize,
}

/// Attacks every input in parallel. Random starts are seeded from
/// `(example_id, seed)`, so results do not depend on scheduling.
pub fn attack_batch(
    model: &dyn DifferentiableClassifier,
    inputs: &[AttackInput],
    spec: &AttackSpec,
    seed: u64,
) -> Result<Vec<AttackOutcome>, AttackError> {
    inputs
        .par_iter()
        .map(|inp| {
            let s = hash64(&[b"pgd", inp.example_id.as_bytes(), &seed.to_le_bytes()]);
            pgd_attack(model, &inp.x, inp.label, spec, s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::{AttackPreset, SoftmaxClassifier};
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    struct Flat(usize);

    impl DifferentiableClassifier for Flat {
        fn input_len(&self) -> usize {
            self.0
        }
        fn num_classes(&self) -> usize {
            2
        }
        fn forward(&self, _: &[f64]) -> Vec<f64> {
            vec![0.0, 0.0]
        }
        fn loss_gradient(&self, _: &[f64], _: usize) -> Vec<f64> {
            vec![0.0; self.0]
        }
    }

    /// L = w · x.
    struct Linear(Vec<f64>);

    impl DifferentiableClassifier for Linear {
        fn input_len(&self) -> usize {
            self.0.len()
        }
        fn num_classes(&self) -> usize {
            1
        }
        fn forward(&self, x: &[f64]) -> Vec<f64> {
            vec![self.0.iter().zip(x).map(|(w, v)| w * v).sum()]
        }
        fn loss_gradient(&self, _: &[f64], _: usize) -> Vec<f64> {
            self.0.clone()
        }
        fn loss(&self, x: &[f64], _: usize) -> f64 {
            self.forward(x)[0]
        }
    }

    /// Ascent up to rounding in the loss itself: once the iterate sits on
    /// the ball's boundary, re-projection can move it by an ulp.
    fn non_decreasing(a: f64, b: f64) -> bool {
        b >= a - 4.0 * f64::EPSILON * a.abs().max(1.0)
    }

    fn toy_image(seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..48).map(|_| rng.random_range(0.1..0.9)).collect()
    }

    #[test]
    fn flat_model_returns_input() {
        let x = toy_image(1);
        for p in AttackPreset::ALL {
            let out = pgd_attack(&Flat(48), &x, 0, &p.spec(), 0).unwrap();
            assert_eq!(out.adversarial, x);
        }
    }

    #[test]
    fn linear_loss_saturates_at_epsilon() {
        let spec = AttackSpec::new(Norm::Linf, 0.05, 0.007, 0).unwrap();
        let needed = (spec.epsilon / spec.step_size).ceil() as usize;
        let x0 = [0.5];
        let model = Linear(vec![3.0]);
        let before = pgd_attack(&model, &x0, 0, &AttackSpec { num_steps: needed - 1, ..spec }, 0).unwrap();
        assert!(before.adversarial[0] - x0[0] < spec.epsilon);
        let at = pgd_attack(&model, &x0, 0, &AttackSpec { num_steps: needed, ..spec }, 0).unwrap();
        assert_eq!(at.adversarial[0], x0[0] + spec.epsilon);
        let later = pgd_attack(&model, &x0, 0, &AttackSpec { num_steps: needed + 5, ..spec }, 0).unwrap();
        assert_eq!(later.adversarial, at.adversarial);
    }

    #[test]
    fn toy_attack_raises_loss_and_stays_feasible() {
        let model = SoftmaxClassifier::toy(48, 2, 3);
        for seed in 0..5 {
            let x = toy_image(seed);
            let label = model.predict(&x);
            for p in AttackPreset::ALL {
                let spec = p.spec();
                let out = pgd_attack(&model, &x, label, &spec, 0).unwrap();
                assert!(out.final_loss() >= out.initial_loss());
                assert!(out.losses.windows(2).all(|w| non_decreasing(w[0], w[1])), "{}", spec.name());
                let delta: Vec<f64> = out.adversarial.iter().zip(&x).map(|(a, b)| a - b).collect();
                let size = match spec.norm {
                    Norm::Linf => delta.iter().fold(0.0f64, |m, d| m.max(d.abs())),
                    Norm::L2 => l2_norm(&delta),
                };
                assert!(size <= spec.epsilon + 1e-9);
                assert!(out.adversarial.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn random_start_is_seeded() {
        let model = SoftmaxClassifier::bundled();
        let x = toy_image(9);
        let spec = AttackPreset::L2Eps0_5.spec().with_random_start(true);
        let spec = AttackSpec { num_steps: 5, ..spec };
        let a = pgd_attack(&model, &x, 1, &spec, 11).unwrap();
        let b = pgd_attack(&model, &x, 1, &spec, 11).unwrap();
        let c = pgd_attack(&model, &x, 1, &spec, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.adversarial, c.adversarial);
    }

    #[test]
    fn bad_inputs() {
        let model = SoftmaxClassifier::bundled();
        let spec = AttackPreset::LinfEps2.spec();
        assert!(matches!(pgd_attack(&model, &[0.5; 3], 0, &spec, 0), Err(AttackError::InputLength { .. })));
        assert!(matches!(pgd_attack(&model, &[1.5; 48], 0, &spec, 0), Err(AttackError::InputRange(_))));
        assert!(matches!(
            pgd_attack(&model, &[0.5; 48], 10, &spec, 0),
            Err(AttackError::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn batch_is_order_independent() {
        let model = SoftmaxClassifier::bundled();
        let spec = AttackSpec {
            num_steps: 10,
            ..AttackPreset::LinfEps2.spec().with_random_start(true)
        };
        let inputs: Vec<AttackInput> = (0..6)
            .map(|i| AttackInput {
                example_id: format!("e{i}"),
                x: toy_image(i),
                label: (i % 10) as usize,
            })
            .collect();
        let fwd = attack_batch(&model, &inputs, &spec, 5).unwrap();
        let mut rev_in = inputs.clone();
        rev_in.reverse();
        let mut rev = attack_batch(&model, &rev_in, &spec, 5).unwrap();
        rev.reverse();
        assert_eq!(fwd, rev);
    }

    #[test]
    fn l2_ascent_holds_with_saturated_pixels() {
        let model = SoftmaxClassifier::bundled();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for i in 0..20 {
            let x: Vec<f64> = (0..48).map(|_| rng.random_range(0.0..1.0)).collect();
            let spec = AttackPreset::L2Eps0_5.spec();
            let out = pgd_attack(&model, &x, i % 10, &spec, 0).unwrap();
            for w in out.losses.windows(2) {
                assert!(non_decreasing(w[0], w[1]), "{} -> {}", w[0], w[1]);
            }
            let delta: Vec<f64> = out.adversarial.iter().zip(&x).map(|(a, b)| a - b).collect();
            assert!(l2_norm(&delta) <= spec.epsilon + 1e-12);
        }
    }

    #[test]
    fn l2_double_norm_projects_to_epsilon() {
        let eps = 0.3;
        let d = vec![0.2, -0.4, 0.4, 0.2];
        let scaled: Vec<f64> = d.iter().map(|v| v * 2.0 * eps / l2_norm(&d)).collect();
        let p = project_perturbation(&scaled, Norm::L2, eps);
        assert!((l2_norm(&p) - eps).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn projection_idempotent(
            d in proptest::collection::vec(-1.0f64..1.0, 1..40),
            eps in 0.01f64..1.0,
            l2 in any::<bool>(),
        ) {
            let norm = if l2 { Norm::L2 } else { Norm::Linf };
            let once = project_perturbation(&d, norm, eps);
            let twice = project_perturbation(&once, norm, eps);
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() <= 1e-15);
            }
            let inside: Vec<f64> = once.iter().map(|v| v * 0.5).collect();
            prop_assert_eq!(project_perturbation(&inside, norm, eps), inside);
        }
    }
}
