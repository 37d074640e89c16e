//! Bag of word vectors: a logistic model on the position-summed word
//! vectors, `a = c + Σ_t Σ_d w_d x_{t,d}`. Padding rows are zero and add
//! nothing.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::net::{seq_len, Dropout, SequenceNet};
use super::params::impl_param_set;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowWvParams {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl_param_set!(BowWvParams { weights, bias });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowWvModel {
    pub dim: usize,
    pub params: BowWvParams,
}

impl BowWvModel {
    pub fn zeros(dim: usize) -> Self {
        BowWvModel {
            dim,
            params: BowWvParams {
                weights: vec![0.0; dim],
                bias: vec![0.0],
            },
        }
    }

    pub fn init<R: Rng>(dim: usize, rng: &mut R) -> Self {
        let mut m = Self::zeros(dim);
        let r = 1.0 / (dim as f64).sqrt();
        m.params
            .weights
            .iter_mut()
            .for_each(|w| *w = rng.random_range(-r..r));
        m
    }
}

impl SequenceNet for BowWvModel {
    type Params = BowWvParams;
    /// Position-summed input.
    type Cache = Vec<f64>;

    fn input_dim(&self) -> usize {
        self.dim
    }

    fn dropout_features(&self) -> usize {
        0
    }

    fn dropout_rate(&self) -> f64 {
        0.0
    }

    fn params(&self) -> &BowWvParams {
        &self.params
    }

    fn params_mut(&mut self) -> &mut BowWvParams {
        &mut self.params
    }

    fn forward(&self, x: &[f64], _dropout: Dropout<'_>) -> Result<(f64, Vec<f64>)> {
        let t = seq_len(x, self.dim)?;
        let mut summed = vec![0.0; self.dim];
        for row in x.chunks_exact(self.dim).take(t) {
            summed.iter_mut().zip(row).for_each(|(s, v)| *s += v);
        }
        let a = self.params.bias[0] + crate::math::dot(&self.params.weights, &summed);
        Ok((a, summed))
    }

    fn backward(
        &self,
        _x: &[f64],
        summed: &Vec<f64>,
        dlogit: f64,
        grads: &mut BowWvParams,
        dx: Option<&mut [f64]>,
    ) {
        crate::math::axpy(dlogit, summed, &mut grads.weights);
        grads.bias[0] += dlogit;
        if let Some(dx) = dx {
            for row in dx.chunks_exact_mut(self.dim) {
                crate::math::axpy(dlogit, &self.params.weights, row);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::gradcheck::max_rel_error;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn logit_is_linear_in_summed_vectors() {
        let mut m = BowWvModel::zeros(2);
        m.params.weights = vec![0.5, -1.0];
        m.params.bias = vec![0.25];
        let x = [1.0, 2.0, 3.0, 0.0, 0.0, 0.0];
        // summed = (4, 2)
        assert_eq!(m.logit(&x).unwrap(), 0.25 + 2.0 - 2.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = BowWvModel::init(4, &mut rng);
        m.params.bias[0] = 0.3;
        let x: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        assert!(max_rel_error(&m, &x, None, 1e-5).unwrap() < 1e-4);
    }
}
