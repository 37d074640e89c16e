//! Minibatch SGD with validation checkpoints, early stopping and optional
//! retraining of the input word vectors.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::batch::{balanced_minibatch, loss_from_logit, ClassWeights};
use super::input::InputTable;
use super::net::{Dropout, SequenceNet};
use super::params::ParamSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ImbalanceStrategy {
    #[default]
    BalancedBatch,
    LossWeighting,
    None,
}

impl std::str::FromStr for ImbalanceStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "balanced-batch" => Ok(Self::BalancedBatch),
            "loss-weighting" => Ok(Self::LossWeighting),
            "none" => Ok(Self::None),
            other => Err(Error::Config(format!(
                "unknown imbalance strategy `{other}` (balanced-batch, loss-weighting, none)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: f64,
    /// Fraction of an epoch between validation checkpoints.
    pub eval_every: f64,
    /// Minimum validation-accuracy gain that counts as progress.
    pub min_gain: f64,
    /// Epochs without progress before stopping.
    pub patience: f64,
    pub imbalance: ImbalanceStrategy,
    pub retrain_vectors: bool,
    pub learning_rate: f64,
    pub nb_smoothing: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 100,
            max_epochs: 5.0,
            eval_every: 0.1,
            min_gain: 0.001,
            patience: 1.0,
            imbalance: ImbalanceStrategy::BalancedBatch,
            retrain_vectors: false,
            learning_rate: 0.05,
            nb_smoothing: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("{what} must be positive")));
        if self.batch_size == 0 {
            return bad("batch size");
        }
        if !(self.eval_every > 0.0) {
            return bad("checkpoint interval");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning rate");
        }
        if !(self.nb_smoothing > 0.0) {
            return bad("smoothing");
        }
        if !(self.max_epochs >= 0.0) || !(self.patience >= 0.0) {
            return Err(Error::Config("epoch counts must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: usize,
    pub epoch: f64,
    /// Mean weighted training loss since the previous checkpoint.
    pub train_loss: Option<f64>,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

/// An encoded example: padded input-table rows, the number of real
/// tokens, and the label.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub rows: Vec<usize>,
    pub len: usize,
    pub label: u8,
}

impl Encoded {
    /// The rows `net` is fed.
    pub fn rows_for<N: SequenceNet>(&self, net: &N) -> &[usize] {
        if net.uses_padding() {
            &self.rows
        } else {
            &self.rows[..self.len]
        }
    }
}

pub struct TrainOutcome<N> {
    pub net: N,
    pub table: InputTable,
    pub trace: Vec<Checkpoint>,
    pub best: usize,
}

/// Examples per gradient chunk; chunks are summed in a fixed order so the
/// result does not depend on the number of threads.
const CHUNK: usize = 10;

fn evaluate<N: SequenceNet>(net: &N, table: &InputTable, data: &[Encoded]) -> Result<(f64, f64)> {
    let per: Vec<(f64, bool)> = data
        .par_iter()
        .map(|ex| {
            let mut x = Vec::new();
            table.gather(ex.rows_for(net), &mut x);
            let a = net.logit(&x)?;
            let hit = (a >= 0.0) == (ex.label == 1);
            Ok((loss_from_logit(a, ex.label, ClassWeights::default()), hit))
        })
        .collect::<Result<_>>()?;
    let n = data.len().max(1) as f64;
    let loss = per.iter().map(|p| p.0).sum::<f64>() / n;
    let acc = per.iter().filter(|p| p.1).count() as f64 / n;
    Ok((loss, acc))
}

struct Grads<P> {
    params: P,
    rows: BTreeMap<usize, Vec<f64>>,
    loss: f64,
}

fn batch_gradient<N: SequenceNet>(
    net: &N,
    table: &InputTable,
    batch: &[(&Encoded, Option<Vec<f64>>)],
    weights: ClassWeights,
    with_rows: bool,
) -> Result<Grads<N::Params>> {
    let dim = table.dim();
    let parts: Vec<Grads<N::Params>> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = Grads {
                params: net.params().zeros_like(),
                rows: BTreeMap::new(),
                loss: 0.0,
            };
            let mut x = Vec::new();
            for (ex, mask) in chunk {
                let rows = ex.rows_for(net);
                table.gather(rows, &mut x);
                let drop = match mask {
                    Some(m) => Dropout::Mask(m),
                    None => Dropout::Inference,
                };
                let (a, cache) = net.forward(&x, drop)?;
                g.loss += loss_from_logit(a, ex.label, weights);
                let dlogit = weights.of(ex.label) * (crate::math::sigmoid(a) - f64::from(ex.label));
                if with_rows {
                    let mut dx = vec![0.0; x.len()];
                    net.backward(&x, &cache, dlogit, &mut g.params, Some(&mut dx));
                    for (t, &r) in rows.iter().enumerate() {
                        let row = g.rows.entry(r).or_insert_with(|| vec![0.0; dim]);
                        crate::math::axpy(1.0, &dx[t * dim..(t + 1) * dim], row);
                    }
                } else {
                    net.backward(&x, &cache, dlogit, &mut g.params, None);
                }
            }
            Ok(g)
        })
        .collect::<Result<_>>()?;
    let mut total = Grads {
        params: net.params().zeros_like(),
        rows: BTreeMap::new(),
        loss: 0.0,
    };
    for p in parts {
        total.params.axpy(1.0, &p.params);
        total.loss += p.loss;
        for (r, v) in p.rows {
            let row = total.rows.entry(r).or_insert_with(|| vec![0.0; dim]);
            crate::math::axpy(1.0, &v, row);
        }
    }
    Ok(total)
}

/// Train `net` on `train`, checkpointing against `val`. Returns the
/// network and input table of the checkpoint with the best validation
/// accuracy (the earliest one on ties).
pub fn train_net<N: SequenceNet>(
    net: N,
    table: InputTable,
    train: &[Encoded],
    val: &[Encoded],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<N>> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::invalid("training and validation sets must be non-empty"));
    }
    let labels: Vec<u8> = train.iter().map(|e| e.label).collect();
    let weights = match cfg.imbalance {
        ImbalanceStrategy::LossWeighting => ClassWeights::from_labels(&labels)?,
        _ => ClassWeights::default(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let steps_per_epoch = train.len().div_ceil(cfg.batch_size);
    let total_steps = (cfg.max_epochs * steps_per_epoch as f64).round() as usize;
    let eval_steps = ((cfg.eval_every * steps_per_epoch as f64).round() as usize).max(1);
    let patience_steps = (cfg.patience * steps_per_epoch as f64).round() as usize;
    let epoch_of = |step: usize| step as f64 / steps_per_epoch as f64;

    let mut net = net;
    let mut table = table;
    let (val_loss, val_accuracy) = evaluate(&net, &table, val)?;
    let mut trace = vec![Checkpoint {
        step: 0,
        epoch: 0.0,
        train_loss: None,
        val_loss,
        val_accuracy,
    }];
    let mut best = (0, val_accuracy, net.clone(), table.clone());
    let mut reference = (0, val_accuracy);

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut cursor = order.len();
    let (mut loss_sum, mut loss_n) = (0.0, 0usize);
    let p = net.dropout_rate();
    let nf = net.dropout_features();

    for step in 1..=total_steps {
        let idx: Vec<usize> = if cfg.imbalance == ImbalanceStrategy::BalancedBatch {
            balanced_minibatch(&labels, cfg.batch_size, &mut rng)?
        } else {
            if cursor >= order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let end = (cursor + cfg.batch_size).min(order.len());
            let b = order[cursor..end].to_vec();
            cursor = end;
            b
        };
        let batch: Vec<(&Encoded, Option<Vec<f64>>)> = idx
            .iter()
            .map(|&i| {
                let mask = (p > 0.0 && nf > 0).then(|| {
                    (0..nf)
                        .map(|_| if rng.random::<f64>() < p { 0.0 } else { 1.0 })
                        .collect()
                });
                (&train[i], mask)
            })
            .collect();
        let g = batch_gradient(&net, &table, &batch, weights, cfg.retrain_vectors)?;
        let n = batch.len() as f64;
        let batch_loss = g.loss / n;
        if !batch_loss.is_finite() {
            return Err(Error::Diverged {
                step,
                loss: batch_loss,
            });
        }
        net.params_mut().axpy(-cfg.learning_rate / n, &g.params);
        if !net.params().all_finite() {
            return Err(Error::Diverged {
                step,
                loss: batch_loss,
            });
        }
        for (r, grad) in &g.rows {
            table.update_row(*r, cfg.learning_rate / n, grad);
        }
        loss_sum += g.loss;
        loss_n += batch.len();

        if step % eval_steps == 0 || step == total_steps {
            let (val_loss, val_accuracy) = evaluate(&net, &table, val)?;
            trace.push(Checkpoint {
                step,
                epoch: epoch_of(step),
                train_loss: Some(loss_sum / loss_n.max(1) as f64),
                val_loss,
                val_accuracy,
            });
            loss_sum = 0.0;
            loss_n = 0;
            if val_accuracy > best.1 {
                best = (trace.len() - 1, val_accuracy, net.clone(), table.clone());
            }
            if val_accuracy >= reference.1 + cfg.min_gain {
                reference = (step, val_accuracy);
            } else if step - reference.0 >= patience_steps {
                log::info!(
                    "early stop at epoch {:.2}: no gain of {} since epoch {:.2}",
                    epoch_of(step),
                    cfg.min_gain,
                    epoch_of(reference.0)
                );
                break;
            }
        }
    }
    let (best_idx, _, net, table) = best;
    Ok(TrainOutcome {
        net,
        table,
        trace,
        best: best_idx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::bow::BowWvModel;

    fn toy() -> (InputTable, Vec<Encoded>, Vec<Encoded>) {
        let table = InputTable::from_rows(
            2,
            &[("pos", vec![1.0, 0.0]), ("neg", vec![0.0, 1.0]), ("x", vec![0.3, 0.3])],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut make = |n: usize| {
            (0..n)
                .map(|_| {
                    let label = u8::from(rng.random::<f64>() < 0.3);
                    let signal = if label == 1 { 2 } else { 3 };
                    Encoded {
                        rows: vec![signal, 4, 4, 0],
                        len: 3,
                        label,
                    }
                })
                .collect::<Vec<_>>()
        };
        (table, make(400), make(100))
    }

    #[test]
    fn zero_epochs_returns_the_initial_model() {
        let (table, train, val) = toy();
        let net = BowWvModel::zeros(2);
        let cfg = TrainConfig {
            max_epochs: 0.0,
            ..TrainConfig::default()
        };
        let out = train_net(net.clone(), table, &train, &val, &cfg).unwrap();
        assert_eq!(out.net, net);
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn separable_toy_is_learned_under_every_strategy() {
        for imbalance in [
            ImbalanceStrategy::BalancedBatch,
            ImbalanceStrategy::LossWeighting,
            ImbalanceStrategy::None,
        ] {
            let (table, train, val) = toy();
            let cfg = TrainConfig {
                batch_size: 20,
                learning_rate: 0.5,
                imbalance,
                ..TrainConfig::default()
            };
            let out = train_net(BowWvModel::zeros(2), table, &train, &val, &cfg).unwrap();
            assert!(out.trace[out.best].val_accuracy >= 0.99, "{imbalance:?}");
        }
    }

    #[test]
    fn checkpoints_every_tenth_epoch() {
        let (table, train, val) = toy();
        let cfg = TrainConfig {
            batch_size: 20,
            max_epochs: 1.0,
            patience: 10.0,
            ..TrainConfig::default()
        };
        let out = train_net(BowWvModel::zeros(2), table, &train, &val, &cfg).unwrap();
        let steps: Vec<usize> = out.trace.iter().map(|c| c.step).collect();
        assert_eq!(steps, [0, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20]);
    }

    #[test]
    fn training_is_deterministic() {
        let (table, train, val) = toy();
        let cfg = TrainConfig {
            batch_size: 20,
            retrain_vectors: true,
            ..TrainConfig::default()
        };
        let a = train_net(BowWvModel::zeros(2), table.clone(), &train, &val, &cfg).unwrap();
        let b = train_net(BowWvModel::zeros(2), table, &train, &val, &cfg).unwrap();
        assert_eq!(a.net, b.net);
        assert_eq!(a.table, b.table);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn retraining_moves_vectors_but_not_padding() {
        let (table, train, val) = toy();
        let cfg = TrainConfig {
            batch_size: 20,
            max_epochs: 0.5,
            retrain_vectors: true,
            patience: 10.0,
            ..TrainConfig::default()
        };
        let out = train_net(BowWvModel::zeros(2), table.clone(), &train, &val, &cfg).unwrap();
        assert_eq!(out.table.row(0), table.row(0));
        assert_ne!(out.table.row(2), table.row(2));
    }

    #[test]
    fn divergence_is_reported() {
        let (table, train, val) = toy();
        let mut net = BowWvModel::zeros(2);
        net.params.weights = vec![f64::NAN, 0.0];
        let cfg = TrainConfig {
            batch_size: 20,
            ..TrainConfig::default()
        };
        let err = train_net(net, table, &train, &val, &cfg).err().unwrap();
        assert!(matches!(err, Error::Diverged { step: 1, .. }));
    }
}
