use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A classifier the attacks can differentiate through.
///
/// Implementations must be safe to evaluate concurrently. `loss` defaults to
/// cross-entropy on `forward`; `loss_gradient` must be its gradient with
/// respect to the input.
pub trait DifferentiableClassifier: Sync {
    fn input_len(&self) -> usize;
    fn num_classes(&self) -> usize;
    /// Per-class scores (logits).
    fn forward(&self, x: &[f64]) -> Vec<f64>;
    fn loss_gradient(&self, x: &[f64], label: usize) -> Vec<f64>;

    fn loss(&self, x: &[f64], label: usize) -> f64 {
        cross_entropy(&self.forward(x), label)
    }

    fn predict(&self, x: &[f64]) -> usize {
        let s = self.forward(x);
        (0..s.len()).max_by(|&a, &b| s[a].total_cmp(&s[b]).then(b.cmp(&a))).unwrap_or(0)
    }
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// `logsumexp(scores) - scores[label]`.
pub fn cross_entropy(scores: &[f64], label: usize) -> f64 {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
    lse - scores[label]
}

/// Multinomial logistic regression: scores = W x + b.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxClassifier {
    input_len: usize,
    /// Row-major `classes × input_len`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl SoftmaxClassifier {
    pub fn new(input_len: usize, weights: Vec<f64>, bias: Vec<f64>) -> Self {
        assert!(input_len > 0 && !bias.is_empty(), "empty classifier");
        assert_eq!(weights.len(), input_len * bias.len(), "weight shape");
        Self { input_len, weights, bias }
    }

    /// Seeded random weights, uniform in ±1/sqrt(input_len), zero bias.
    pub fn toy(input_len: usize, num_classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (input_len as f64).sqrt();
        let weights = (0..input_len * num_classes)
            .map(|_| rng.random_range(-scale..scale))
            .collect();
        Self::new(input_len, weights, vec![0.0; num_classes])
    }

    /// 10-class toy model for 4×4 RGB inputs.
    pub fn bundled() -> Self {
        Self::toy(48, 10, 0)
    }

    fn row(&self, k: usize) -> &[f64] {
        &self.weights[k * self.input_len..(k + 1) * self.input_len]
    }
}

impl DifferentiableClassifier for SoftmaxClassifier {
    fn input_len(&self) -> usize {
        self.input_len
    }

    fn num_classes(&self) -> usize {
        self.bias.len()
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.bias.len())
            .map(|k| self.bias[k] + self.row(k).iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    /// W^T (softmax(s) - onehot(label)).
    fn loss_gradient(&self, x: &[f64], label: usize) -> Vec<f64> {
        let mut p = softmax(&self.forward(x));
        p[label] -= 1.0;
        let mut g = vec![0.0; self.input_len];
        for (k, pk) in p.iter().enumerate() {
            for (gi, w) in g.iter_mut().zip(self.row(k)) {
                *gi += pk * w;
            }
        }
        g
    }
}
