//! Train a small node-count by dropout grid in parallel and keep the cell
//! with the best validation accuracy.
//!
//!     cargo run --release --example grid_search

use normlens::corpus::{ingest, IngestConfig, MaskTable, TargetPair};
use normlens::embeddings::{train_skipgram, SgnsConfig};
use normlens::models::{best_cell, run_grid, ModelKind, ModelSpec, TrainConfig};
use normlens::synth::{generate_messages, CorpusSynthConfig};

fn main() -> normlens::Result<()> {
    let cfg = CorpusSynthConfig {
        messages: 8_000,
        ..Default::default()
    };
    let mut ic = IngestConfig::new(TargetPair::parse("han,hon")?, 1);
    ic.mask = Some(MaskTable::default());
    let s = ingest(generate_messages(&cfg)?, &ic)?.splits;
    let sentences: Vec<Vec<String>> = s.train.iter().map(|r| r.tokens.clone()).collect();
    let (emb, _) = train_skipgram(
        &sentences,
        &SgnsConfig {
            dim: 16,
            window: 5,
            min_count: 5,
            epochs: 2,
            ..Default::default()
        },
    )?;
    let tc = TrainConfig {
        learning_rate: 0.1,
        batch_size: 20,
        max_epochs: 2.0,
        seed: 4,
        ..Default::default()
    };
    let results = run_grid(
        &ModelSpec::new(ModelKind::Lstm),
        &[8, 16, 32],
        &[0.0, 0.25, 0.5],
        &s.train,
        &s.validation,
        Some(&emb),
        &tc,
        4,
    )?;
    for r in &results {
        println!("{:<24}{:.4}", r.cell.name(), r.best_val_accuracy);
    }
    println!("best: {}", best_cell(&results).unwrap().cell.name());
    Ok(())
}
