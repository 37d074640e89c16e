//! Class-imbalance handling: balanced minibatches and weighted loss.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities are clamped to `[EPS, 1 - EPS]` inside the loss.
pub const EPS: f64 = 1e-12;

/// Draw a batch of `batch` indices into `labels` with `⌊batch/2⌋` class-0
/// and `⌈batch/2⌉` class-1 examples. Examples are drawn at random (with
/// replacement) until both classes have reached their quota, then the
/// surplus of each class is cut away at random.
pub fn balanced_minibatch<R: Rng>(labels: &[u8], batch: usize, rng: &mut R) -> Result<Vec<usize>> {
    if batch < 2 {
        return Err(Error::invalid("balanced batches need room for both classes"));
    }
    let present = |c| labels.iter().any(|&l| l == c);
    if !present(0) || !present(1) {
        return Err(Error::MissingClass(
            "balanced batches need both classes in the training set".into(),
        ));
    }
    let quota = [batch / 2, batch - batch / 2];
    let mut drawn: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    while drawn[0].len() < quota[0] || drawn[1].len() < quota[1] {
        let i = rng.random_range(0..labels.len());
        drawn[usize::from(labels[i] == 1)].push(i);
    }
    let mut out = Vec::with_capacity(batch);
    for (c, mut pool) in drawn.into_iter().enumerate() {
        pool.shuffle(rng);
        pool.truncate(quota[c]);
        out.extend(pool);
    }
    out.shuffle(rng);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub w0: f64,
    pub w1: f64,
}

impl Default for ClassWeights {
    fn default() -> Self {
        ClassWeights { w0: 1.0, w1: 1.0 }
    }
}

impl ClassWeights {
    /// Weight 1 for the majority class and `majority / minority` for the
    /// minority class.
    pub fn from_counts(n0: usize, n1: usize) -> Result<Self> {
        if n0 == 0 || n1 == 0 {
            return Err(Error::MissingClass(format!(
                "class counts {n0}/{n1} cannot be reweighted"
            )));
        }
        let ratio = n0.max(n1) as f64 / n0.min(n1) as f64;
        Ok(if n1 < n0 {
            ClassWeights { w0: 1.0, w1: ratio }
        } else {
            ClassWeights { w0: ratio, w1: 1.0 }
        })
    }

    pub fn from_labels(labels: &[u8]) -> Result<Self> {
        let n1 = labels.iter().filter(|&&l| l == 1).count();
        Self::from_counts(labels.len() - n1, n1)
    }

    pub fn of(&self, label: u8) -> f64 {
        if label == 1 {
            self.w1
        } else {
            self.w0
        }
    }
}

/// Class-weighted binary cross-entropy for one example. The flag is set
/// when `y_hat` had to be clamped away from 0 or 1.
pub fn weighted_loss(y_hat: f64, y: u8, weights: ClassWeights) -> (f64, bool) {
    let p = y_hat.clamp(EPS, 1.0 - EPS);
    let clamped = p != y_hat;
    let nll = if y == 1 { -p.ln() } else { -(1.0 - p).ln() };
    (weights.of(y) * nll, clamped)
}

/// Weighted cross-entropy computed from the logit, stable for large |a|.
pub(crate) fn loss_from_logit(a: f64, y: u8, weights: ClassWeights) -> f64 {
    // -ln σ(a) = softplus(-a), -ln(1 - σ(a)) = softplus(a)
    let softplus = |z: f64| z.max(0.0) + (-z.abs()).exp().ln_1p();
    let nll = if y == 1 { softplus(-a) } else { softplus(a) };
    weights.of(y) * nll
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stream(n1: usize, n0: usize) -> Vec<u8> {
        let mut v = vec![1u8; n1];
        v.extend(vec![0u8; n0]);
        v
    }

    #[test]
    fn balanced_batch_from_skewed_stream() {
        let labels = stream(25, 75);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = balanced_minibatch(&labels, 100, &mut rng).unwrap();
        assert_eq!(b.len(), 100);
        assert_eq!(b.iter().filter(|&&i| labels[i] == 1).count(), 50);
    }

    #[test]
    fn odd_batch_sizes_split_within_one() {
        let labels = stream(10, 90);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = balanced_minibatch(&labels, 7, &mut rng).unwrap();
        let ones = b.iter().filter(|&&i| labels[i] == 1).count();
        assert!(ones == 3 || ones == 4);
    }

    #[test]
    fn minority_fraction_over_many_batches() {
        let labels = stream(255, 745);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ones = 0;
        for _ in 0..1000 {
            let b = balanced_minibatch(&labels, 100, &mut rng).unwrap();
            ones += b.iter().filter(|&&i| labels[i] == 1).count();
        }
        let frac = ones as f64 / 100_000.0;
        assert!((frac - 0.5).abs() <= 0.01);
    }

    #[test]
    fn missing_class_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(balanced_minibatch(&[0, 0, 0], 2, &mut rng).is_err());
    }

    #[test]
    fn loss_cases() {
        let (l, c) = weighted_loss(0.5, 1, ClassWeights::default());
        assert!((l - 2f64.ln()).abs() < 1e-15);
        assert!(!c);
        let w = ClassWeights { w0: 1.0, w1: 3.0 };
        assert!((weighted_loss(0.5, 1, w).0 - 3.0 * 2f64.ln()).abs() < 1e-15);
        let (l, c) = weighted_loss(0.0, 1, ClassWeights::default());
        assert!(c);
        assert!((l + EPS.ln()).abs() < 1e-9);
    }

    #[test]
    fn weights_from_imbalance() {
        let w = ClassWeights::from_counts(745, 255).unwrap();
        assert_eq!(w.w0, 1.0);
        assert!((w.w1 - 2.92).abs() < 0.01);
    }

    #[test]
    fn logit_loss_matches_probability_loss() {
        let w = ClassWeights { w0: 1.0, w1: 2.0 };
        for a in [-3.0, -0.2, 0.0, 1.7] {
            for y in [0, 1] {
                let p = crate::math::sigmoid(a);
                assert!((loss_from_logit(a, y, w) - weighted_loss(p, y, w).0).abs() < 1e-12);
            }
        }
        assert!(loss_from_logit(800.0, 0, w).is_finite());
    }
}
