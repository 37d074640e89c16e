//! One-layer LSTM classifier.
//!
//! Each of the `M` nodes has input weight vectors `u` (length `d`) and a
//! scalar recurrent weight `w` per gate, so the recurrence is elementwise:
//!
//! ```text
//! i = σ(u_i·x_t + w_i h_{t-1} + b_i)      f, o likewise
//! ĉ = tanh(u_c·x_t + w_c h_{t-1} + b_c)
//! c_t = c_{t-1} f + ĉ i
//! h_t = tanh(c_t) o
//! ŷ = σ(W_h · ReLU(h_T) + c_h)
//! ```
//!
//! Dropout acts on `ReLU(h_T)` during training; at inference `W_h` is
//! scaled by `1 - p`. With `skip_padding` (the default) `T` is the last
//! real token and padding positions are not fed to the recurrence.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::net::{seq_len, Dropout, SequenceNet};
use super::params::impl_param_set;
use crate::error::{Error, Result};
use crate::math::sigmoid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    /// `M x d`, node-major.
    pub u_i: Vec<f64>,
    pub u_f: Vec<f64>,
    pub u_o: Vec<f64>,
    pub u_c: Vec<f64>,
    pub w_i: Vec<f64>,
    pub w_f: Vec<f64>,
    pub w_o: Vec<f64>,
    pub w_c: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_o: Vec<f64>,
    pub b_c: Vec<f64>,
    pub w_h: Vec<f64>,
    pub c_h: Vec<f64>,
}

impl_param_set!(LstmParams {
    u_i, u_f, u_o, u_c, w_i, w_f, w_o, w_c, b_i, b_f, b_o, b_c, w_h, c_h
});

impl LstmParams {
    pub fn zeros(nodes: usize, dim: usize) -> Self {
        let md = vec![0.0; nodes * dim];
        let m = vec![0.0; nodes];
        LstmParams {
            u_i: md.clone(),
            u_f: md.clone(),
            u_o: md.clone(),
            u_c: md,
            w_i: m.clone(),
            w_f: m.clone(),
            w_o: m.clone(),
            w_c: m.clone(),
            b_i: m.clone(),
            b_f: m.clone(),
            b_o: m.clone(),
            b_c: m.clone(),
            w_h: m,
            c_h: vec![0.0],
        }
    }

    fn check(&self, nodes: usize, dim: usize) -> Result<()> {
        let ok = [&self.u_i, &self.u_f, &self.u_o, &self.u_c]
            .iter()
            .all(|u| u.len() == nodes * dim)
            && [
                &self.w_i, &self.w_f, &self.w_o, &self.w_c, &self.b_i, &self.b_f, &self.b_o,
                &self.b_c, &self.w_h,
            ]
            .iter()
            .all(|v| v.len() == nodes)
            && self.c_h.len() == 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "LSTM parameters do not match {nodes} nodes x {dim} inputs"
            )))
        }
    }
}

/// Gate activations and states after one step.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub c_hat: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

/// One LSTM step for all nodes.
pub fn lstm_cell_step(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    p: &LstmParams,
) -> Result<CellState> {
    let nodes = p.w_i.len();
    if nodes == 0 || h_prev.len() != nodes || c_prev.len() != nodes {
        return Err(Error::Shape(format!(
            "state of length {}/{} for {nodes} nodes",
            h_prev.len(),
            c_prev.len()
        )));
    }
    let dim = x.len();
    p.check(nodes, dim)?;
    let mut s = CellState {
        i: vec![0.0; nodes],
        f: vec![0.0; nodes],
        o: vec![0.0; nodes],
        c_hat: vec![0.0; nodes],
        c: vec![0.0; nodes],
        h: vec![0.0; nodes],
    };
    for j in 0..nodes {
        let row = j * dim..(j + 1) * dim;
        let pre = |u: &[f64], w: &[f64], b: &[f64]| {
            crate::math::dot(&u[row.clone()], x) + w[j] * h_prev[j] + b[j]
        };
        s.i[j] = sigmoid(pre(&p.u_i, &p.w_i, &p.b_i));
        s.f[j] = sigmoid(pre(&p.u_f, &p.w_f, &p.b_f));
        s.o[j] = sigmoid(pre(&p.u_o, &p.w_o, &p.b_o));
        s.c_hat[j] = pre(&p.u_c, &p.w_c, &p.b_c).tanh();
        s.c[j] = c_prev[j] * s.f[j] + s.c_hat[j] * s.i[j];
        s.h[j] = s.c[j].tanh() * s.o[j];
    }
    Ok(s)
}

/// Backward through one step. `dh`/`dc` are the gradients arriving at
/// `h_t`/`c_t`; returns the gradients at `(h_{t-1}, c_{t-1})` and adds the
/// input gradient to `dx` when given.
#[allow(clippy::too_many_arguments)]
pub fn lstm_cell_backward(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    s: &CellState,
    dh: &[f64],
    dc: &[f64],
    p: &LstmParams,
    g: &mut LstmParams,
    mut dx: Option<&mut [f64]>,
) -> (Vec<f64>, Vec<f64>) {
    let nodes = s.h.len();
    let dim = x.len();
    let mut dh_prev = vec![0.0; nodes];
    let mut dc_prev = vec![0.0; nodes];
    for j in 0..nodes {
        let tc = s.c[j].tanh();
        let d_o = dh[j] * tc;
        let dc_total = dc[j] + dh[j] * s.o[j] * (1.0 - tc * tc);
        let d_f = dc_total * c_prev[j];
        let d_i = dc_total * s.c_hat[j];
        let d_chat = dc_total * s.i[j];
        dc_prev[j] = dc_total * s.f[j];

        let dz_i = d_i * s.i[j] * (1.0 - s.i[j]);
        let dz_f = d_f * s.f[j] * (1.0 - s.f[j]);
        let dz_o = d_o * s.o[j] * (1.0 - s.o[j]);
        let dz_c = d_chat * (1.0 - s.c_hat[j] * s.c_hat[j]);

        let row = j * dim..(j + 1) * dim;
        for (dz, u, gu, gw, gb) in [
            (dz_i, &p.u_i, &mut g.u_i, &mut g.w_i, &mut g.b_i),
            (dz_f, &p.u_f, &mut g.u_f, &mut g.w_f, &mut g.b_f),
            (dz_o, &p.u_o, &mut g.u_o, &mut g.w_o, &mut g.b_o),
            (dz_c, &p.u_c, &mut g.u_c, &mut g.w_c, &mut g.b_c),
        ] {
            crate::math::axpy(dz, x, &mut gu[row.clone()]);
            gw[j] += dz * h_prev[j];
            gb[j] += dz;
            if let Some(dx) = dx.as_deref_mut() {
                crate::math::axpy(dz, &u[row.clone()], dx);
            }
        }
        dh_prev[j] = dz_i * p.w_i[j] + dz_f * p.w_f[j] + dz_o * p.w_o[j] + dz_c * p.w_c[j];
    }
    (dh_prev, dc_prev)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub nodes: usize,
    pub dim: usize,
    pub dropout: f64,
    #[serde(default = "yes")]
    pub skip_padding: bool,
    pub params: LstmParams,
}

fn yes() -> bool {
    true
}

pub struct LstmCache {
    states: Vec<CellState>,
    features: Vec<f64>,
    keep: Vec<f64>,
}

impl LstmModel {
    pub fn zeros(nodes: usize, dim: usize, dropout: f64) -> Result<Self> {
        if nodes == 0 || dim == 0 {
            return Err(Error::Shape("LSTM needs at least one node and input".into()));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::invalid(format!("dropout {dropout} outside [0, 1)")));
        }
        Ok(LstmModel {
            nodes,
            dim,
            dropout,
            skip_padding: true,
            params: LstmParams::zeros(nodes, dim),
        })
    }

    /// Uniform(±1/√d) gate weights, forget bias 1, uniform(±1/√M) output
    /// weights.
    pub fn init<R: Rng>(nodes: usize, dim: usize, dropout: f64, rng: &mut R) -> Result<Self> {
        let mut m = Self::zeros(nodes, dim, dropout)?;
        let r = 1.0 / (dim as f64).sqrt();
        let p = &mut m.params;
        for v in [
            &mut p.u_i, &mut p.u_f, &mut p.u_o, &mut p.u_c, &mut p.w_i, &mut p.w_f, &mut p.w_o,
            &mut p.w_c,
        ] {
            v.iter_mut().for_each(|x| *x = rng.random_range(-r..r));
        }
        p.b_f.iter_mut().for_each(|b| *b = 1.0);
        let r = 1.0 / (nodes as f64).sqrt();
        p.w_h.iter_mut().for_each(|x| *x = rng.random_range(-r..r));
        Ok(m)
    }
}

impl SequenceNet for LstmModel {
    type Params = LstmParams;
    type Cache = LstmCache;

    fn input_dim(&self) -> usize {
        self.dim
    }

    fn dropout_features(&self) -> usize {
        self.nodes
    }

    fn dropout_rate(&self) -> f64 {
        self.dropout
    }

    fn uses_padding(&self) -> bool {
        !self.skip_padding
    }

    fn params(&self) -> &LstmParams {
        &self.params
    }

    fn params_mut(&mut self) -> &mut LstmParams {
        &mut self.params
    }

    fn forward(&self, x: &[f64], dropout: Dropout<'_>) -> Result<(f64, LstmCache)> {
        let t = seq_len(x, self.dim)?;
        let mut h = vec![0.0; self.nodes];
        let mut c = vec![0.0; self.nodes];
        let mut states = Vec::with_capacity(t);
        for xt in x.chunks_exact(self.dim) {
            let s = lstm_cell_step(xt, &h, &c, &self.params)?;
            h.clone_from(&s.h);
            c.clone_from(&s.c);
            states.push(s);
        }
        let features: Vec<f64> = h.iter().map(|v| v.max(0.0)).collect();
        let keep = match dropout {
            Dropout::Inference => vec![1.0 - self.dropout; self.nodes],
            Dropout::Mask(m) => {
                if m.len() != self.nodes {
                    return Err(Error::Shape(format!(
                        "dropout mask of length {} for {} nodes",
                        m.len(),
                        self.nodes
                    )));
                }
                m.to_vec()
            }
        };
        let a = self.params.c_h[0]
            + (0..self.nodes)
                .map(|j| self.params.w_h[j] * keep[j] * features[j])
                .sum::<f64>();
        Ok((
            a,
            LstmCache {
                states,
                features,
                keep,
            },
        ))
    }

    fn backward(
        &self,
        x: &[f64],
        cache: &LstmCache,
        dlogit: f64,
        g: &mut LstmParams,
        mut dx: Option<&mut [f64]>,
    ) {
        let m = self.nodes;
        g.c_h[0] += dlogit;
        let mut dh = vec![0.0; m];
        for j in 0..m {
            g.w_h[j] += dlogit * cache.keep[j] * cache.features[j];
            if cache.features[j] > 0.0 {
                dh[j] = dlogit * self.params.w_h[j] * cache.keep[j];
            }
        }
        let mut dc = vec![0.0; m];
        let zeros = vec![0.0; m];
        for (t, s) in cache.states.iter().enumerate().rev() {
            let (h_prev, c_prev) = if t == 0 {
                (&zeros, &zeros)
            } else {
                (&cache.states[t - 1].h, &cache.states[t - 1].c)
            };
            let xt = &x[t * self.dim..(t + 1) * self.dim];
            let dxt = dx
                .as_deref_mut()
                .map(|d| &mut d[t * self.dim..(t + 1) * self.dim]);
            let (dh_prev, dc_prev) =
                lstm_cell_backward(xt, h_prev, c_prev, s, &dh, &dc, &self.params, g, dxt);
            dh = dh_prev;
            dc = dc_prev;
        }
    }
}
