//! Three-stage 1-d convolutional classifier.
//!
//! Stage 1 runs one group of kernels per width in `widths1` over the word
//! vectors; the pooled maps of the groups are right-padded with zeros to a
//! common length and stacked as channels. Stages 2 and 3 convolve over all
//! channels. Every stage is a narrow convolution, ReLU, then max-pool with
//! window 2 and stride 2. The flattened stage-3 output goes through dropout,
//! a fully connected ReLU layer and a logistic output.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::net::{seq_len, Dropout, SequenceNet};
use super::params::impl_param_set;
use crate::error::{Error, Result};
use crate::math::dot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnShape {
    pub widths1: Vec<usize>,
    /// Total over all stage-1 groups, split as evenly as possible.
    pub kernels1: usize,
    pub width2: usize,
    pub kernels2: usize,
    pub width3: usize,
    pub kernels3: usize,
    pub fc_units: usize,
}

impl Default for CnnShape {
    fn default() -> Self {
        CnnShape {
            widths1: vec![4, 5],
            kernels1: 100,
            width2: 3,
            kernels2: 100,
            width3: 2,
            kernels3: 100,
            fc_units: 100,
        }
    }
}

impl CnnShape {
    pub fn group_kernels(&self) -> Vec<usize> {
        let g = self.widths1.len();
        (0..g)
            .map(|i| self.kernels1 / g + usize::from(i < self.kernels1 % g))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let bad = self.widths1.is_empty()
            || self.widths1.contains(&0)
            || self.kernels1 < self.widths1.len()
            || [self.width2, self.kernels2, self.width3, self.kernels3, self.fc_units].contains(&0);
        if bad {
            Err(Error::Shape(format!("invalid CNN shape {self:?}")))
        } else {
            Ok(())
        }
    }

    /// Lengths `(pooled1 per group, pooled1, pooled2, pooled3)` for an input
    /// of `t` positions, or an error if some stage would be empty.
    pub fn lengths(&self, t: usize) -> Result<(Vec<usize>, usize, usize, usize)> {
        let too_short = || {
            Error::invalid(format!(
                "input of {t} positions is shorter than the CNN receptive field"
            ))
        };
        let pool = |n: usize| n / 2;
        let mut groups = Vec::with_capacity(self.widths1.len());
        for &h in &self.widths1 {
            let n = conv_len(t, h).ok_or_else(too_short)?;
            groups.push(pool(n));
        }
        if groups.contains(&0) {
            return Err(too_short());
        }
        let p1 = *groups.iter().max().unwrap_or(&0);
        let p2 = conv_len(p1, self.width2).map(pool).ok_or_else(too_short)?;
        let p3 = conv_len(p2, self.width3).map(pool).ok_or_else(too_short)?;
        if p2 == 0 || p3 == 0 {
            return Err(too_short());
        }
        Ok((groups, p1, p2, p3))
    }

    /// Smallest input length the network accepts.
    pub fn min_len(&self) -> usize {
        (1..).find(|&t| self.lengths(t).is_ok()).unwrap_or(usize::MAX)
    }
}

/// Narrow convolution output length, `t - h + 1`.
pub fn conv_len(t: usize, h: usize) -> Option<usize> {
    (t >= h && h > 0).then(|| t - h + 1)
}

const HE: f64 = 2.449_489_742_783_178; // √6

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnParams {
    /// Stage-1 kernels of all groups, concatenated; each kernel is
    /// `width x dim`, position-major.
    pub k1: Vec<f64>,
    pub b1: Vec<f64>,
    pub k2: Vec<f64>,
    pub b2: Vec<f64>,
    pub k3: Vec<f64>,
    pub b3: Vec<f64>,
    /// `fc_units x features`, row-major.
    pub fc_w: Vec<f64>,
    pub fc_b: Vec<f64>,
    pub out_w: Vec<f64>,
    pub out_b: Vec<f64>,
}

impl_param_set!(CnnParams {
    k1, b1, k2, b2, k3, b3, fc_w, fc_b, out_w, out_b
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnModel {
    pub dim: usize,
    pub seq_len: usize,
    pub shape: CnnShape,
    pub dropout: f64,
    pub params: CnnParams,
}

/// Convolution + ReLU + max-pool over a `len x ch` map.
struct Stage {
    /// Pre-activation conv output, `conv_len x kernels`.
    conv: Vec<f64>,
    /// Pooled output, `pooled x kernels`.
    out: Vec<f64>,
    /// Row in `conv` chosen by each pooled cell.
    arg: Vec<usize>,
}

fn conv_stage(input: &[f64], ch: usize, kernels: &[f64], bias: &[f64], h: usize) -> Stage {
    let len = input.len() / ch;
    let n = len + 1 - h;
    let k = bias.len();
    let span = h * ch;
    let mut conv = vec![0.0; n * k];
    for p in 0..n {
        let window = &input[p * ch..p * ch + span];
        for j in 0..k {
            conv[p * k + j] = bias[j] + dot(&kernels[j * span..(j + 1) * span], window);
        }
    }
    let pooled = n / 2;
    let mut out = vec![0.0; pooled * k];
    let mut arg = vec![0; pooled * k];
    for q in 0..pooled {
        for j in 0..k {
            let (a, b) = (conv[2 * q * k + j], conv[(2 * q + 1) * k + j]);
            let (row, v) = if b > a { (2 * q + 1, b) } else { (2 * q, a) };
            out[q * k + j] = v.max(0.0);
            arg[q * k + j] = row;
        }
    }
    Stage { conv, out, arg }
}

/// Backward through pool, ReLU and convolution. `dout` is laid out like
/// `stage.out`; adds into the kernel/bias gradients and `din` if given.
#[allow(clippy::too_many_arguments)]
fn conv_stage_backward(
    input: &[f64],
    ch: usize,
    kernels: &[f64],
    h: usize,
    stage: &Stage,
    dout: &[f64],
    gk: &mut [f64],
    gb: &mut [f64],
    mut din: Option<&mut [f64]>,
) {
    let k = gb.len();
    let span = h * ch;
    for (cell, &g) in dout.iter().enumerate() {
        let j = cell % k;
        let row = stage.arg[cell];
        if g == 0.0 || stage.conv[row * k + j] <= 0.0 {
            continue;
        }
        gb[j] += g;
        let window = &input[row * ch..row * ch + span];
        crate::math::axpy(g, window, &mut gk[j * span..(j + 1) * span]);
        if let Some(din) = din.as_deref_mut() {
            crate::math::axpy(
                g,
                &kernels[j * span..(j + 1) * span],
                &mut din[row * ch..row * ch + span],
            );
        }
    }
}

pub struct CnnCache {
    groups: Vec<Stage>,
    /// Stacked stage-1 output, `p1 x kernels1`.
    stacked: Vec<f64>,
    s2: Stage,
    s3: Stage,
    keep: Vec<f64>,
    /// FC pre-activations.
    fc_pre: Vec<f64>,
    fc: Vec<f64>,
    /// Dropped features fed to the FC layer.
    z: Vec<f64>,
}

impl CnnModel {
    pub fn zeros(dim: usize, seq_len: usize, shape: CnnShape, dropout: f64) -> Result<Self> {
        shape.validate()?;
        if dim == 0 {
            return Err(Error::Shape("CNN needs a positive input dimension".into()));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::invalid(format!("dropout {dropout} outside [0, 1)")));
        }
        let (_, _, _, p3) = shape.lengths(seq_len)?;
        let features = p3 * shape.kernels3;
        let k1_len: usize = shape
            .widths1
            .iter()
            .zip(shape.group_kernels())
            .map(|(h, n)| h * dim * n)
            .sum();
        let params = CnnParams {
            k1: vec![0.0; k1_len],
            b1: vec![0.0; shape.kernels1],
            k2: vec![0.0; shape.kernels2 * shape.width2 * shape.kernels1],
            b2: vec![0.0; shape.kernels2],
            k3: vec![0.0; shape.kernels3 * shape.width3 * shape.kernels2],
            b3: vec![0.0; shape.kernels3],
            fc_w: vec![0.0; shape.fc_units * features],
            fc_b: vec![0.0; shape.fc_units],
            out_w: vec![0.0; shape.fc_units],
            out_b: vec![0.0],
        };
        Ok(CnnModel {
            dim,
            seq_len,
            shape,
            dropout,
            params,
        })
    }

    /// He-uniform weights (±√(6/fan_in)) for the ReLU layers, ±1/√fan_in
    /// for the output, zero biases.
    pub fn init<R: Rng>(
        dim: usize,
        seq_len: usize,
        shape: CnnShape,
        dropout: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut m = Self::zeros(dim, seq_len, shape, dropout)?;
        let s = &m.shape;
        let features = m.params.fc_w.len() / s.fc_units;
        let mut fill = |v: &mut [f64], fan_in: usize, gain: f64| {
            let r = gain / (fan_in as f64).sqrt();
            v.iter_mut().for_each(|x| *x = rng.random_range(-r..r));
        };
        let mut off = 0;
        for (h, n) in s.widths1.iter().zip(s.group_kernels()) {
            let len = h * dim * n;
            fill(&mut m.params.k1[off..off + len], h * dim, HE);
            off += len;
        }
        fill(&mut m.params.k2, s.width2 * s.kernels1, HE);
        fill(&mut m.params.k3, s.width3 * s.kernels2, HE);
        fill(&mut m.params.fc_w, features, HE);
        fill(&mut m.params.out_w, s.fc_units, 1.0);
        Ok(m)
    }

    fn features(&self) -> usize {
        self.params.fc_w.len() / self.shape.fc_units
    }

    /// Offsets of each stage-1 group into `k1` and `b1`.
    fn group_offsets(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut out = Vec::new();
        let (mut ko, mut bo) = (0, 0);
        for (&h, n) in self.shape.widths1.iter().zip(self.shape.group_kernels()) {
            out.push((h, n, ko, bo));
            ko += h * self.dim * n;
            bo += n;
        }
        out
    }
}

impl SequenceNet for CnnModel {
    type Params = CnnParams;
    type Cache = CnnCache;

    fn input_dim(&self) -> usize {
        self.dim
    }

    fn dropout_features(&self) -> usize {
        self.features()
    }

    fn dropout_rate(&self) -> f64 {
        self.dropout
    }

    fn params(&self) -> &CnnParams {
        &self.params
    }

    fn params_mut(&mut self) -> &mut CnnParams {
        &mut self.params
    }

    fn forward(&self, x: &[f64], dropout: Dropout<'_>) -> Result<(f64, CnnCache)> {
        let t = seq_len(x, self.dim)?;
        if t != self.seq_len {
            return Err(Error::Shape(format!(
                "CNN built for {} positions got {t}",
                self.seq_len
            )));
        }
        let s = &self.shape;
        let (_, p1, _, _) = s.lengths(t)?;
        let p = &self.params;
        let k1 = s.kernels1;
        let mut stacked = vec![0.0; p1 * k1];
        let mut groups = Vec::new();
        for (h, n, ko, bo) in self.group_offsets() {
            let st = conv_stage(
                x,
                self.dim,
                &p.k1[ko..ko + h * self.dim * n],
                &p.b1[bo..bo + n],
                h,
            );
            for q in 0..st.out.len() / n {
                stacked[q * k1 + bo..q * k1 + bo + n].copy_from_slice(&st.out[q * n..(q + 1) * n]);
            }
            groups.push(st);
        }
        let s2 = conv_stage(&stacked, k1, &p.k2, &p.b2, s.width2);
        let s3 = conv_stage(&s2.out, s.kernels2, &p.k3, &p.b3, s.width3);
        let nf = self.features();
        let keep = match dropout {
            Dropout::Inference => vec![1.0 - self.dropout; nf],
            Dropout::Mask(m) => {
                if m.len() != nf {
                    return Err(Error::Shape(format!(
                        "dropout mask of length {} for {nf} features",
                        m.len()
                    )));
                }
                m.to_vec()
            }
        };
        let z: Vec<f64> = s3.out.iter().zip(&keep).map(|(a, k)| a * k).collect();
        let fc_pre: Vec<f64> = (0..s.fc_units)
            .map(|u| p.fc_b[u] + dot(&p.fc_w[u * nf..(u + 1) * nf], &z))
            .collect();
        let fc: Vec<f64> = fc_pre.iter().map(|v| v.max(0.0)).collect();
        let a = p.out_b[0] + dot(&p.out_w, &fc);
        Ok((
            a,
            CnnCache {
                groups,
                stacked,
                s2,
                s3,
                keep,
                fc_pre,
                fc,
                z,
            },
        ))
    }

    fn backward(
        &self,
        x: &[f64],
        cache: &CnnCache,
        dlogit: f64,
        g: &mut CnnParams,
        dx: Option<&mut [f64]>,
    ) {
        let s = &self.shape;
        let p = &self.params;
        let nf = self.features();
        g.out_b[0] += dlogit;
        crate::math::axpy(dlogit, &cache.fc, &mut g.out_w);
        let mut dz = vec![0.0; nf];
        for u in 0..s.fc_units {
            if cache.fc_pre[u] <= 0.0 {
                continue;
            }
            let d = dlogit * p.out_w[u];
            g.fc_b[u] += d;
            crate::math::axpy(d, &cache.z, &mut g.fc_w[u * nf..(u + 1) * nf]);
            crate::math::axpy(d, &p.fc_w[u * nf..(u + 1) * nf], &mut dz);
        }
        let d3: Vec<f64> = dz.iter().zip(&cache.keep).map(|(d, k)| d * k).collect();

        let mut d2 = vec![0.0; cache.s2.out.len()];
        conv_stage_backward(
            &cache.s2.out,
            s.kernels2,
            &p.k3,
            s.width3,
            &cache.s3,
            &d3,
            &mut g.k3,
            &mut g.b3,
            Some(&mut d2),
        );
        let mut dstacked = vec![0.0; cache.stacked.len()];
        conv_stage_backward(
            &cache.stacked,
            s.kernels1,
            &p.k2,
            s.width2,
            &cache.s2,
            &d2,
            &mut g.k2,
            &mut g.b2,
            Some(&mut dstacked),
        );
        let k1 = s.kernels1;
        let mut dx = dx;
        for ((h, n, ko, bo), st) in self.group_offsets().into_iter().zip(&cache.groups) {
            let pooled = st.out.len() / n;
            let mut dg = vec![0.0; st.out.len()];
            for q in 0..pooled {
                dg[q * n..(q + 1) * n].copy_from_slice(&dstacked[q * k1 + bo..q * k1 + bo + n]);
            }
            let span = h * self.dim * n;
            conv_stage_backward(
                x,
                self.dim,
                &p.k1[ko..ko + span],
                h,
                st,
                &dg,
                &mut g.k1[ko..ko + span],
                &mut g.b1[bo..bo + n],
                dx.as_deref_mut(),
            );
        }
    }
}
