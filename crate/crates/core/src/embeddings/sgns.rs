//! Skip-gram with negative sampling.
//!
//! Each (center, context) pair within a dynamic window is a positive
//! example for the logistic loss
//!
//! ```text
//! -ln σ(u_ctx · v_center) - Σ_k ln σ(-u_k · v_center)
//! ```
//!
//! with `negative` noise words `k` drawn from the unigram distribution
//! raised to 3/4. Input vectors `v` are the returned embeddings; output
//! vectors `u` are discarded after training.
//!
//! Parameters live in relaxed atomics so the same kernel serves the
//! deterministic single-threaded mode and the racy multi-threaded mode.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EmbeddingMatrix, RARE_TOKEN};
use crate::error::{Error, Result};
use crate::math::sigmoid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgnsConfig {
    pub dim: usize,
    pub window: usize,
    pub negative: usize,
    pub min_count: u64,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    /// Frequent-word subsampling threshold; `None` disables it.
    pub subsample: Option<f64>,
    pub seed: u64,
    /// 1 = deterministic. More threads race on shared rows.
    pub threads: usize,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 300,
            window: 10,
            negative: 5,
            min_count: 10,
            epochs: 5,
            lr_start: 0.025,
            lr_end: 1e-4,
            subsample: None,
            seed: 0,
            threads: 1,
        }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.window == 0 || self.negative == 0 || self.min_count == 0 {
            return Err(Error::Config(
                "dim, window, negative and min_count must be positive".into(),
            ));
        }
        if !(self.lr_start > 0.0 && self.lr_end > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(())
    }
}

/// Mean loss per pair, per epoch, plus the mean over the first tenth of
/// the first epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SgnsTrace {
    pub epoch_mean_loss: Vec<f64>,
    pub first_tenth_loss: f64,
}

/// Loss and gradient of one positive pair plus its negatives.
///
/// `outputs[0]` is the context word's output vector, the rest are noise
/// words. Gradients are written into `grad_center` and `grad_outputs` (one
/// buffer per output vector).
pub fn pair_loss_grad(
    center: &[f64],
    outputs: &[&[f64]],
    grad_center: &mut [f64],
    grad_outputs: &mut [Vec<f64>],
) -> f64 {
    grad_center.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    for (k, out) in outputs.iter().enumerate() {
        let score: f64 = center.iter().zip(*out).map(|(a, b)| a * b).sum();
        // d/ds of -ln σ(s) is σ(s) - 1; of -ln σ(-s) it is σ(s)
        let (l, g) = if k == 0 {
            (-ln_sigmoid(score), sigmoid(score) - 1.0)
        } else {
            (-ln_sigmoid(-score), sigmoid(score))
        };
        loss += l;
        for j in 0..center.len() {
            grad_center[j] += g * out[j];
            grad_outputs[k][j] = g * center[j];
        }
    }
    loss
}

fn ln_sigmoid(z: f64) -> f64 {
    // ln σ(z) = -ln(1 + e^{-z}), stable for both signs
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

struct Vocab {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
}

fn build_vocab<S: AsRef<str>>(sentences: &[Vec<S>], min_count: u64) -> Result<Vocab> {
    let mut raw: HashMap<&str, u64> = HashMap::new();
    for s in sentences {
        for t in s {
            *raw.entry(t.as_ref()).or_default() += 1;
        }
    }
    let mut rare = 0u64;
    let mut kept: Vec<(&str, u64)> = Vec::new();
    for (t, c) in raw {
        if c >= min_count && t != RARE_TOKEN {
            kept.push((t, c));
        } else {
            rare += c;
        }
    }
    if rare > 0 {
        kept.push((RARE_TOKEN, rare));
    }
    if kept.is_empty() {
        return Err(Error::invalid("empty vocabulary"));
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let tokens: Vec<String> = kept.iter().map(|(t, _)| t.to_string()).collect();
    let counts = kept.iter().map(|(_, c)| *c).collect();
    let index = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i as u32))
        .collect();
    Ok(Vocab {
        tokens,
        counts,
        index,
    })
}

/// Cumulative unigram^0.75 distribution.
struct NoiseTable {
    cumulative: Vec<f64>,
}

impl NoiseTable {
    fn new(counts: &[u64]) -> Self {
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        for c in &mut cumulative {
            *c /= acc;
        }
        NoiseTable { cumulative }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

struct Params {
    input: Vec<AtomicU64>,
    output: Vec<AtomicU64>,
    dim: usize,
}

impl Params {
    fn load(store: &[AtomicU64], row: usize, dim: usize, buf: &mut [f64]) {
        for j in 0..dim {
            buf[j] = f64::from_bits(store[row * dim + j].load(Ordering::Relaxed));
        }
    }

    fn add(store: &[AtomicU64], row: usize, dim: usize, delta: &[f64], scale: f64) {
        for j in 0..dim {
            let cell = &store[row * dim + j];
            let v = f64::from_bits(cell.load(Ordering::Relaxed)) + scale * delta[j];
            cell.store(v.to_bits(), Ordering::Relaxed);
        }
    }
}

struct Worker<'a> {
    params: &'a Params,
    noise: &'a NoiseTable,
    cfg: &'a SgnsConfig,
    keep_prob: &'a [f64],
    total_centers: f64,
    rng: ChaCha8Rng,
    center: Vec<f64>,
    outs: Vec<Vec<f64>>,
    grad_center: Vec<f64>,
    grad_outs: Vec<Vec<f64>>,
    targets: Vec<usize>,
}

impl<'a> Worker<'a> {
    fn new(
        params: &'a Params,
        noise: &'a NoiseTable,
        cfg: &'a SgnsConfig,
        keep_prob: &'a [f64],
        total_centers: f64,
        seed: u64,
    ) -> Self {
        let d = params.dim;
        let k = cfg.negative + 1;
        Worker {
            params,
            noise,
            cfg,
            keep_prob,
            total_centers,
            rng: ChaCha8Rng::seed_from_u64(seed),
            center: vec![0.0; d],
            outs: vec![vec![0.0; d]; k],
            grad_center: vec![0.0; d],
            grad_outs: vec![vec![0.0; d]; k],
            targets: Vec::with_capacity(k),
        }
    }

    /// Train on one sentence; returns (summed loss, pairs, centers seen).
    fn sentence(&mut self, sent: &[u32], processed: f64) -> (f64, usize, usize) {
        let d = self.params.dim;
        let kept: Vec<u32> = sent
            .iter()
            .copied()
            .filter(|&w| {
                let p = self.keep_prob[w as usize];
                p >= 1.0 || self.rng.random::<f64>() < p
            })
            .collect();
        let (mut loss, mut pairs) = (0.0, 0usize);
        for (pos, &c) in kept.iter().enumerate() {
            let progress = ((processed + pos as f64) / self.total_centers).min(1.0);
            let lr = (self.cfg.lr_start - (self.cfg.lr_start - self.cfg.lr_end) * progress)
                .max(self.cfg.lr_end);
            let b = self.rng.random_range(1..=self.cfg.window);
            let lo = pos.saturating_sub(b);
            let hi = (pos + b).min(kept.len() - 1);
            for ctx_pos in lo..=hi {
                if ctx_pos == pos {
                    continue;
                }
                let ctx = kept[ctx_pos] as usize;
                self.targets.clear();
                self.targets.push(ctx);
                for _ in 0..self.cfg.negative {
                    let n = self.noise.sample(&mut self.rng);
                    if n != ctx {
                        self.targets.push(n);
                    }
                }
                Params::load(&self.params.input, c as usize, d, &mut self.center);
                for (k, &t) in self.targets.iter().enumerate() {
                    Params::load(&self.params.output, t, d, &mut self.outs[k]);
                }
                let n_out = self.targets.len();
                let outs: Vec<&[f64]> = self.outs[..n_out].iter().map(Vec::as_slice).collect();
                loss += pair_loss_grad(
                    &self.center,
                    &outs,
                    &mut self.grad_center,
                    &mut self.grad_outs[..n_out],
                );
                pairs += 1;
                for (k, &t) in self.targets.iter().enumerate() {
                    Params::add(&self.params.output, t, d, &self.grad_outs[k], -lr);
                }
                Params::add(&self.params.input, c as usize, d, &self.grad_center, -lr);
            }
        }
        (loss, pairs, kept.len())
    }
}

/// Train word vectors. Sentences are token lists; tokens below
/// `min_count` are folded into [`RARE_TOKEN`].
pub fn train_skipgram<S: AsRef<str> + Sync>(
    sentences: &[Vec<S>],
    cfg: &SgnsConfig,
) -> Result<(EmbeddingMatrix, SgnsTrace)> {
    cfg.validate()?;
    let vocab = build_vocab(sentences, cfg.min_count)?;
    let rare = vocab.index.get(RARE_TOKEN).copied();
    let encoded: Vec<Vec<u32>> = sentences
        .iter()
        .map(|s| {
            s.iter()
                .map(|t| {
                    vocab
                        .index
                        .get(t.as_ref())
                        .copied()
                        .or(rare)
                        .expect("every token is in vocab or rare")
                })
                .collect()
        })
        .collect();

    let dim = cfg.dim;
    let v = vocab.tokens.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let half = 0.5 / dim as f64;
    let params = Params {
        input: (0..v * dim)
            .map(|_| AtomicU64::new(rng.random_range(-half..half).to_bits()))
            .collect(),
        output: (0..v * dim).map(|_| AtomicU64::new(0f64.to_bits())).collect(),
        dim,
    };

    let total_words: u64 = vocab.counts.iter().sum();
    let keep_prob: Vec<f64> = match cfg.subsample {
        Some(t) if t > 0.0 => vocab
            .counts
            .iter()
            .map(|&c| {
                let f = c as f64 / total_words as f64;
                ((f / t).sqrt() + 1.0) * (t / f)
            })
            .collect(),
        _ => vec![1.0; v],
    };
    let noise = NoiseTable::new(&vocab.counts);
    let total_centers = (cfg.epochs as f64 * total_words as f64).max(1.0);

    let mut trace = SgnsTrace::default();
    let tenth = encoded.len().div_ceil(10);
    for epoch in 0..cfg.epochs {
        let base = epoch as f64 * total_words as f64;
        let epoch_seed = cfg.seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let (loss, pairs) = if cfg.threads == 1 {
            let mut w = Worker::new(&params, &noise, cfg, &keep_prob, total_centers, epoch_seed);
            let (mut loss, mut pairs, mut seen) = (0.0, 0usize, 0usize);
            for (i, s) in encoded.iter().enumerate() {
                let (l, p, c) = w.sentence(s, base + seen as f64);
                loss += l;
                pairs += p;
                seen += c;
                if epoch == 0 && i + 1 == tenth {
                    trace.first_tenth_loss = loss / pairs.max(1) as f64;
                }
            }
            (loss, pairs)
        } else {
            let n_sent = encoded.len();
            let chunk = n_sent.div_ceil(cfg.threads).max(1);
            let results: Vec<(f64, usize)> = std::thread::scope(|scope| {
                let handles: Vec<_> = encoded
                    .chunks(chunk)
                    .enumerate()
                    .map(|(t, part)| {
                        let (params, noise, keep) = (&params, &noise, &keep_prob);
                        scope.spawn(move || {
                            let mut w = Worker::new(
                                params,
                                noise,
                                cfg,
                                keep,
                                total_centers,
                                epoch_seed.wrapping_add(t as u64),
                            );
                            // each thread sees its own share of the schedule
                            let offset = (t * chunk) as f64 / n_sent as f64;
                            let mut seen = 0usize;
                            let (mut loss, mut pairs) = (0.0, 0usize);
                            for s in part {
                                let processed = base + offset * total_words as f64 + seen as f64;
                                let (l, p, c) = w.sentence(s, processed);
                                loss += l;
                                pairs += p;
                                seen += c;
                            }
                            (loss, pairs)
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("sgns worker")).collect()
            });
            if epoch == 0 {
                // not tracked per tenth in racy mode
                trace.first_tenth_loss = f64::NAN;
            }
            results
                .into_iter()
                .fold((0.0, 0), |(l, p), (l2, p2)| (l + l2, p + p2))
        };
        let mean = loss / pairs.max(1) as f64;
        log::debug!("sgns epoch {epoch}: mean pair loss {mean:.5} over {pairs} pairs");
        trace.epoch_mean_loss.push(mean);
    }

    let mut m = EmbeddingMatrix::new(dim);
    let mut row = vec![0.0; dim];
    for (i, t) in vocab.tokens.iter().enumerate() {
        Params::load(&params.input, i, dim, &mut row);
        m.push(t, &row, vocab.counts[i])?;
    }
    Ok((m, trace))
}
