//! Hyperparameter grid over node count and dropout.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train_model, ModelSpec, TrainConfig, TrainedModel};
use crate::corpus::CorpusRecord;
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::math::derive_seed;

pub const DEFAULT_NODES: [usize; 3] = [125, 250, 500];
pub const DEFAULT_DROPOUTS: [f64; 3] = [0.0, 0.25, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub nodes: usize,
    pub dropout: f64,
}

impl GridCell {
    pub fn name(&self) -> String {
        format!("nodes={}/dropout={}", self.nodes, self.dropout)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridResult {
    pub cell: GridCell,
    pub seed: u64,
    pub best_val_accuracy: f64,
    pub model: TrainedModel,
}

/// Train one model per `(nodes, dropout)` cell on a pool of `jobs`
/// threads. Each cell's seed is derived from `cfg.seed` and the cell, so
/// results do not depend on `jobs`. Results come back in grid order.
pub fn run_grid(
    base: &ModelSpec,
    nodes: &[usize],
    dropouts: &[f64],
    train: &[CorpusRecord],
    val: &[CorpusRecord],
    emb: Option<&EmbeddingMatrix>,
    cfg: &TrainConfig,
    jobs: usize,
) -> Result<Vec<GridResult>> {
    if nodes.is_empty() || dropouts.is_empty() {
        return Err(Error::Config("the grid needs at least one cell".into()));
    }
    let cells: Vec<GridCell> = nodes
        .iter()
        .flat_map(|&n| dropouts.iter().map(move |&d| GridCell { nodes: n, dropout: d }))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let spec = ModelSpec {
                    nodes: cell.nodes,
                    dropout: cell.dropout,
                    ..base.clone()
                };
                let seed = derive_seed(cfg.seed, &format!("grid/{}", cell.name()));
                let cell_cfg = TrainConfig {
                    seed,
                    ..cfg.clone()
                };
                let model = train_model(&spec, train, val, emb, &cell_cfg)?;
                log::info!(
                    "grid cell {}: validation accuracy {:.4}",
                    cell.name(),
                    model.best_val_accuracy()
                );
                Ok(GridResult {
                    cell: *cell,
                    seed,
                    best_val_accuracy: model.best_val_accuracy(),
                    model,
                })
            })
            .collect()
    })
}

/// The result with the highest validation accuracy (first on ties).
pub fn best_cell(results: &[GridResult]) -> Option<&GridResult> {
    results.iter().fold(None, |best: Option<&GridResult>, r| match best {
        Some(b) if b.best_val_accuracy >= r.best_val_accuracy => Some(b),
        _ => Some(r),
    })
}
