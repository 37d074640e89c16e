//! Fixed-length word-vector input for the BoW-WV, LSTM and CNN models.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embeddings::{EmbeddingMatrix, RARE_TOKEN};
use crate::error::{Error, Result};

pub const PAD_TOKEN: &str = "<pad>";
pub const DEFAULT_SEQ_LEN: usize = 25;

/// Right-pad `tokens` with [`PAD_TOKEN`] up to `target_len`.
pub fn pad_sequence(tokens: &[String], target_len: usize) -> Result<Vec<String>> {
    if tokens.len() > target_len {
        return Err(Error::invalid(format!(
            "sequence of {} tokens exceeds the input length {target_len}",
            tokens.len()
        )));
    }
    let mut out = tokens.to_vec();
    out.resize(target_len, PAD_TOKEN.to_string());
    Ok(out)
}

/// The model's own copy of the word vectors it can see: the padding row
/// (always zero), the rare-word row, and every training token that has a
/// pretrained vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "TableRepr", into = "TableRepr")]
pub struct InputTable {
    tokens: Vec<String>,
    vectors: Vec<f64>,
    dim: usize,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    dim: usize,
    tokens: Vec<String>,
    vectors: Vec<f64>,
}

impl From<TableRepr> for InputTable {
    fn from(r: TableRepr) -> Self {
        let index = r
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        InputTable {
            tokens: r.tokens,
            vectors: r.vectors,
            dim: r.dim,
            index,
        }
    }
}

impl From<InputTable> for TableRepr {
    fn from(t: InputTable) -> Self {
        TableRepr {
            dim: t.dim,
            tokens: t.tokens,
            vectors: t.vectors,
        }
    }
}

pub const PAD_ROW: usize = 0;
pub const RARE_ROW: usize = 1;

impl InputTable {
    pub fn build<'a>(
        emb: &EmbeddingMatrix,
        training_tokens: impl IntoIterator<Item = &'a str>,
    ) -> Self {
        let dim = emb.dim();
        let mut tokens = vec![PAD_TOKEN.to_string(), RARE_TOKEN.to_string()];
        let mut vectors = vec![0.0; dim];
        match emb.get(RARE_TOKEN) {
            Some(v) => vectors.extend_from_slice(v),
            None => vectors.extend(std::iter::repeat_n(0.0, dim)),
        }
        let seen: BTreeSet<&str> = training_tokens
            .into_iter()
            .filter(|t| *t != PAD_TOKEN && *t != RARE_TOKEN)
            .collect();
        for t in seen {
            if let Some(v) = emb.get(t) {
                tokens.push(t.to_string());
                vectors.extend_from_slice(v);
            }
        }
        TableRepr {
            dim,
            tokens,
            vectors,
        }
        .into()
    }

    /// Table over explicit rows, after the padding and rare rows.
    pub fn from_rows(dim: usize, rows: &[(&str, Vec<f64>)]) -> Result<Self> {
        let mut tokens = vec![PAD_TOKEN.to_string(), RARE_TOKEN.to_string()];
        let mut vectors = vec![0.0; 2 * dim];
        for (t, v) in rows {
            if v.len() != dim {
                return Err(Error::Shape(format!("row `{t}` has length {}", v.len())));
            }
            tokens.push(t.to_string());
            vectors.extend_from_slice(v);
        }
        Ok(TableRepr {
            dim,
            tokens,
            vectors,
        }
        .into())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    /// Row index for each position of the padded sequence; unknown tokens
    /// map to the rare row.
    pub fn encode(&self, tokens: &[String], seq_len: usize) -> Result<Vec<usize>> {
        Ok(pad_sequence(tokens, seq_len)?
            .iter()
            .map(|t| self.index.get(t.as_str()).copied().unwrap_or(RARE_ROW))
            .collect())
    }

    /// Stack the rows for `indices` into a `len x dim` input.
    pub fn gather(&self, indices: &[usize], out: &mut Vec<f64>) {
        out.clear();
        for &i in indices {
            out.extend_from_slice(self.row(i));
        }
    }

    /// `row -= lr * grad` for a trainable row. The padding row never moves.
    pub fn update_row(&mut self, i: usize, lr: f64, grad: &[f64]) {
        if i == PAD_ROW {
            return;
        }
        let d = self.dim;
        crate::math::axpy(-lr, grad, &mut self.vectors[i * d..(i + 1) * d]);
    }

    pub fn vocab_hash(&self) -> String {
        vocab_hash(self.tokens.iter().map(String::as_str))
    }
}

pub fn vocab_hash<'a>(tokens: impl IntoIterator<Item = &'a str>) -> String {
    let mut h = Sha256::new();
    for t in tokens {
        h.update(t.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}
