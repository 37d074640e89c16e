//! Classifiers that fill the censored word: Naive Bayes, bag of word
//! vectors, LSTM and CNN, with a shared SGD training loop.

mod batch;
mod bow;
mod cnn;
mod grid;
mod input;
mod lstm;
mod naive_bayes;
mod net;
pub(crate) mod params;
mod train;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use batch::{balanced_minibatch, weighted_loss, ClassWeights, EPS};
pub use bow::{BowWvModel, BowWvParams};
pub use cnn::{conv_len, CnnModel, CnnParams, CnnShape};
pub use grid::{best_cell, run_grid, GridCell, GridResult, DEFAULT_DROPOUTS, DEFAULT_NODES};
pub use input::{pad_sequence, vocab_hash, InputTable, DEFAULT_SEQ_LEN, PAD_ROW, PAD_TOKEN, RARE_ROW};
pub use lstm::{lstm_cell_backward, lstm_cell_step, CellState, LstmModel, LstmParams};
pub use naive_bayes::{predict_nb, train_naive_bayes, NaiveBayesModel};
pub use net::{gradcheck, Dropout, SequenceNet};
pub use params::ParamSet;
pub use train::{train_net, Checkpoint, Encoded, ImbalanceStrategy, TrainConfig, TrainOutcome};

use crate::corpus::CorpusRecord;
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::math::{derive_seed, sigmoid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Nb,
    Bow,
    Lstm,
    Cnn,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Nb => "nb",
            ModelKind::Bow => "bow",
            ModelKind::Lstm => "lstm",
            ModelKind::Cnn => "cnn",
        }
    }

    pub fn needs_embeddings(self) -> bool {
        self != ModelKind::Nb
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nb" | "naive-bayes" => Ok(ModelKind::Nb),
            "bow" | "bow-wv" => Ok(ModelKind::Bow),
            "lstm" => Ok(ModelKind::Lstm),
            "cnn" => Ok(ModelKind::Cnn),
            other => Err(Error::Config(format!(
                "unknown model `{other}` (nb, bow, lstm, cnn)"
            ))),
        }
    }
}

/// Architecture choices. `nodes` is the LSTM width, or the width of the
/// CNN's fully connected layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub nodes: usize,
    pub dropout: f64,
    pub seq_len: usize,
    pub cnn: CnnShape,
    /// Run the LSTM over real tokens only instead of through the padding.
    pub lstm_skip_padding: bool,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            kind: ModelKind::Lstm,
            nodes: 125,
            dropout: 0.25,
            seq_len: DEFAULT_SEQ_LEN,
            cnn: CnnShape::default(),
            lstm_skip_padding: true,
        }
    }
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        ModelSpec {
            kind,
            ..ModelSpec::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelBody {
    Nb(NaiveBayesModel),
    Bow { net: BowWvModel, table: InputTable },
    Lstm { net: LstmModel, table: InputTable },
    Cnn { net: CnnModel, table: InputTable },
}

/// A fitted classifier with everything needed to score new messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub config: TrainConfig,
    pub body: ModelBody,
    /// Decision threshold on the probability of class 1.
    pub threshold: f64,
    pub vocab_hash: String,
    pub trace: Vec<Checkpoint>,
    /// Index into `trace` of the kept checkpoint.
    pub best_checkpoint: usize,
}

fn wv_logit<N: SequenceNet>(net: &N, table: &InputTable, tokens: &[String], seq_len: usize) -> Result<f64> {
    let ex = Encoded {
        rows: table.encode(tokens, seq_len)?,
        len: tokens.len(),
        label: 0,
    };
    let mut x = Vec::new();
    table.gather(ex.rows_for(net), &mut x);
    net.logit(&x)
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    /// Log-odds of class 1.
    pub fn logit(&self, tokens: &[String]) -> Result<f64> {
        let t = self.spec.seq_len;
        match &self.body {
            ModelBody::Nb(m) => Ok(m.logit(tokens)),
            ModelBody::Bow { net, table } => wv_logit(net, table, tokens, t),
            ModelBody::Lstm { net, table } => wv_logit(net, table, tokens, t),
            ModelBody::Cnn { net, table } => wv_logit(net, table, tokens, t),
        }
    }

    /// Probability of class 1.
    pub fn predict(&self, tokens: &[String]) -> Result<f64> {
        self.logit(tokens).map(sigmoid)
    }

    pub fn best_val_accuracy(&self) -> f64 {
        self.trace
            .get(self.best_checkpoint)
            .map_or(f64::NAN, |c| c.val_accuracy)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

fn encode_all(table: &InputTable, records: &[CorpusRecord], seq_len: usize) -> Result<Vec<Encoded>> {
    records
        .iter()
        .map(|r| {
            Ok(Encoded {
                rows: table.encode(&r.tokens, seq_len)?,
                len: r.tokens.len(),
                label: r.label,
            })
        })
        .collect()
}

fn fit_net<N: SequenceNet>(
    net: N,
    table: InputTable,
    train: &[CorpusRecord],
    val: &[CorpusRecord],
    seq_len: usize,
    cfg: &TrainConfig,
) -> Result<(N, InputTable, Vec<Checkpoint>, usize)> {
    let tr = encode_all(&table, train, seq_len)?;
    let va = encode_all(&table, val, seq_len)?;
    let out = train_net(net, table, &tr, &va, cfg)?;
    Ok((out.net, out.table, out.trace, out.best))
}

/// Fit `spec` on `train`, choosing the checkpoint by accuracy on `val`.
/// Word-vector models need `emb`; Naive Bayes is fitted in closed form.
pub fn train_model(
    spec: &ModelSpec,
    train: &[CorpusRecord],
    val: &[CorpusRecord],
    emb: Option<&EmbeddingMatrix>,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    cfg.validate()?;
    if spec.kind == ModelKind::Nb {
        let model = train_naive_bayes(
            train.iter().map(|r| (r.tokens.as_slice(), r.label)),
            cfg.nb_smoothing,
        )?;
        let trace = if val.is_empty() {
            Vec::new()
        } else {
            let n = val.len() as f64;
            let logits: Vec<f64> = val.iter().map(|r| model.logit(&r.tokens)).collect();
            let hits = logits
                .iter()
                .zip(val)
                .filter(|(a, r)| (**a >= 0.0) == (r.label == 1))
                .count();
            let loss: f64 = logits
                .iter()
                .zip(val)
                .map(|(a, r)| batch::loss_from_logit(*a, r.label, ClassWeights::default()))
                .sum();
            vec![Checkpoint {
                step: 0,
                epoch: 0.0,
                train_loss: None,
                val_loss: loss / n,
                val_accuracy: hits as f64 / n,
            }]
        };
        let hash = vocab_hash(model.log_ratios.keys().map(String::as_str));
        return Ok(TrainedModel {
            spec: spec.clone(),
            config: cfg.clone(),
            body: ModelBody::Nb(model),
            threshold: 0.5,
            vocab_hash: hash,
            trace,
            best_checkpoint: 0,
        });
    }
    let emb = emb.ok_or_else(|| {
        Error::Config(format!("the {} model needs word embeddings", spec.kind))
    })?;
    let table = InputTable::build(
        emb,
        train.iter().flat_map(|r| r.tokens.iter().map(String::as_str)),
    );
    let hash = table.vocab_hash();
    let dim = table.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "init"));
    let train_cfg = TrainConfig {
        seed: derive_seed(cfg.seed, "sgd"),
        ..cfg.clone()
    };
    let t = spec.seq_len;
    let (body, trace, best) = match spec.kind {
        ModelKind::Bow => {
            let net = BowWvModel::init(dim, &mut rng);
            let (net, table, trace, best) = fit_net(net, table, train, val, t, &train_cfg)?;
            (ModelBody::Bow { net, table }, trace, best)
        }
        ModelKind::Lstm => {
            let mut net = LstmModel::init(spec.nodes, dim, spec.dropout, &mut rng)?;
            net.skip_padding = spec.lstm_skip_padding;
            let (net, table, trace, best) = fit_net(net, table, train, val, t, &train_cfg)?;
            (ModelBody::Lstm { net, table }, trace, best)
        }
        ModelKind::Cnn => {
            let shape = CnnShape {
                fc_units: spec.nodes,
                ..spec.cnn.clone()
            };
            let net = CnnModel::init(dim, t, shape, spec.dropout, &mut rng)?;
            let (net, table, trace, best) = fit_net(net, table, train, val, t, &train_cfg)?;
            (ModelBody::Cnn { net, table }, trace, best)
        }
        ModelKind::Nb => unreachable!(),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        config: cfg.clone(),
        body,
        threshold: 0.5,
        vocab_hash: hash,
        trace,
        best_checkpoint: best,
    })
}
