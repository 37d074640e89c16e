//! Common interface of the word-vector classifiers.

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::params::ParamSet;
use crate::error::Result;

/// How the dropout layer behaves on one forward pass.
#[derive(Debug, Clone, Copy)]
pub enum Dropout<'a> {
    /// Inference: weights after the dropout layer are scaled by `1 - p`.
    Inference,
    /// Training: a keep mask (entries 0 or 1), one per dropped feature.
    Mask(&'a [f64]),
}

pub trait SequenceNet: Clone + Serialize + DeserializeOwned + Send + Sync {
    type Params: ParamSet;
    type Cache;

    fn input_dim(&self) -> usize;
    /// Number of features the dropout layer acts on (0 if none).
    fn dropout_features(&self) -> usize;
    fn dropout_rate(&self) -> f64;
    fn params(&self) -> &Self::Params;
    fn params_mut(&mut self) -> &mut Self::Params;

    /// Logit for a `len x input_dim` input.
    fn forward(&self, x: &[f64], dropout: Dropout<'_>) -> Result<(f64, Self::Cache)>;

    /// Accumulate `dlogit * d logit / d params` into `grads`, and into `dx`
    /// (same layout as `x`) when given.
    fn backward(
        &self,
        x: &[f64],
        cache: &Self::Cache,
        dlogit: f64,
        grads: &mut Self::Params,
        dx: Option<&mut [f64]>,
    );

    /// Whether the input must include the padding positions. Networks that
    /// return false are fed only the real tokens.
    fn uses_padding(&self) -> bool {
        true
    }

    fn logit(&self, x: &[f64]) -> Result<f64> {
        self.forward(x, Dropout::Inference).map(|(a, _)| a)
    }
}

pub(crate) fn seq_len(x: &[f64], dim: usize) -> Result<usize> {
    if dim == 0 || x.len() % dim != 0 {
        return Err(crate::Error::Shape(format!(
            "input of length {} is not a multiple of the vector size {dim}",
            x.len()
        )));
    }
    let t = x.len() / dim;
    if t == 0 {
        return Err(crate::Error::invalid("empty input sequence"));
    }
    Ok(t)
}

/// Finite-difference checks for [`SequenceNet`] implementations.
pub mod gradcheck {
    use super::*;

    /// Relative error of every analytic derivative of the logit against a
    /// central difference with step `h`, parameters then inputs.
    pub fn max_rel_error<N: SequenceNet>(net: &N, x: &[f64], mask: Option<&[f64]>, h: f64) -> Result<f64> {
        fn drop(m: Option<&[f64]>) -> Dropout<'_> {
            match m {
                Some(m) => Dropout::Mask(m),
                None => Dropout::Inference,
            }
        }
        let (_, cache) = net.forward(x, drop(mask))?;
        let mut grads = net.params().zeros_like();
        let mut dx = vec![0.0; x.len()];
        net.backward(x, &cache, 1.0, &mut grads, Some(&mut dx));

        let rel = |analytic: f64, numeric: f64| {
            (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
        };
        let mut worst: f64 = 0.0;
        let mut probe = net.clone();
        for i in 0..net.params().len() {
            let v = net.params().get_flat(i);
            probe.params_mut().set_flat(i, v + h);
            let up = probe.forward(x, drop(mask))?.0;
            probe.params_mut().set_flat(i, v - h);
            let down = probe.forward(x, drop(mask))?.0;
            probe.params_mut().set_flat(i, v);
            worst = worst.max(rel(grads.get_flat(i), (up - down) / (2.0 * h)));
        }
        let mut xp = x.to_vec();
        for i in 0..x.len() {
            let v = xp[i];
            xp[i] = v + h;
            let up = net.forward(&xp, drop(mask))?.0;
            xp[i] = v - h;
            let down = net.forward(&xp, drop(mask))?.0;
            xp[i] = v;
            worst = worst.max(rel(dx[i], (up - down) / (2.0 * h)));
        }
        Ok(worst)
    }
}
