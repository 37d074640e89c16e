use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::config::{DataConfig, EstimateSection, EvaluateSection, IngestSection, RunConfig};
use super::run::{run_pipeline, RunManifest};
use crate::corpus::{write_messages, RawMessage};
use crate::econometrics::{CalendarIndex, Series};
use crate::embeddings::SgnsConfig;
use crate::error::{Error, Result};
use crate::math::derive_seed;
use crate::models::{ImbalanceStrategy, ModelKind, ModelSpec, TrainConfig};
use crate::synth::{generate_messages, write_mask_files, CorpusSynthConfig};

pub const DEMO_CONFIG: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemoOptions {
    pub seed: u64,
    pub year2_messages: usize,
    pub year1_messages: usize,
    pub model: ModelKind,
    /// Planted-token rate multiplier from the event on, in Year 2.
    pub shift_factor: f64,
}

impl Default for DemoOptions {
    fn default() -> Self {
        DemoOptions {
            seed: 42,
            year2_messages: 40_000,
            year1_messages: 20_000,
            model: ModelKind::Lstm,
            shift_factor: 0.5,
        }
    }
}

fn relabel(msgs: Vec<RawMessage>, prefix: &str) -> Vec<RawMessage> {
    msgs.into_iter()
        .map(|m| RawMessage {
            id: format!("{prefix}-{}", m.id),
            ..m
        })
        .collect()
}

/// Desk-scale configuration for the files [`write_demo_inputs`] creates.
pub fn demo_config(opts: &DemoOptions) -> RunConfig {
    RunConfig {
        seed: opts.seed,
        deterministic: true,
        out: PathBuf::from("run"),
        series: Series::HeShe,
        data: DataConfig {
            training: "data/year2_pre.jsonl".into(),
            evaluation: vec!["data/year2_post.jsonl".into(), "data/year1.jsonl".into()],
            mask_dir: Some("masks".into()),
            drop_hashtags: None,
            vectors: None,
        },
        ingest: IngestSection::default(),
        embeddings: opts.model.needs_embeddings().then(|| SgnsConfig {
            dim: 32,
            window: 5,
            min_count: 5,
            epochs: 3,
            ..Default::default()
        }),
        model: ModelSpec {
            nodes: 32,
            ..ModelSpec::new(opts.model)
        },
        train: TrainConfig {
            batch_size: 20,
            learning_rate: 0.1,
            max_epochs: 5.0,
            imbalance: ImbalanceStrategy::BalancedBatch,
            ..Default::default()
        },
        grid: None,
        evaluate: EvaluateSection {
            top_words: 10,
            ..Default::default()
        },
        calendar: CalendarIndex::default(),
        estimate: vec![
            EstimateSection {
                vcov: "robust".into(),
                ..EstimateSection::new("raw")
            },
            EstimateSection::new("baseline"),
            EstimateSection {
                scale: 100.0,
                ..EstimateSection::new("baseline")
            },
            EstimateSection {
                vcov: "newey-west:4".into(),
                aggregate: true,
                ..EstimateSection::new("baseline")
            },
            EstimateSection {
                vcov: "cluster:user".into(),
                ..EstimateSection::new("user_fe")
            },
        ],
        base_dir: PathBuf::new(),
    }
}

/// Two synthetic years of messages, with planted gendered tokens that grow
/// rarer after the event in Year 2, plus mask files and `config.toml`.
/// Returns the config path.
pub fn write_demo_inputs(dir: &Path, opts: &DemoOptions) -> Result<PathBuf> {
    let data = dir.join("data");
    fs::create_dir_all(&data).map_err(|e| Error::io(&data, e))?;
    let cal = CalendarIndex::default();
    let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).expect("valid date");
    let year2 = CorpusSynthConfig {
        messages: opts.year2_messages,
        users: 1_500,
        start: cal.year2_start,
        days: 365,
        shift_date: Some(cal.event),
        shift_factor: opts.shift_factor,
        seed: derive_seed(opts.seed, "demo/year2"),
        ..Default::default()
    };
    let year1 = CorpusSynthConfig {
        messages: opts.year1_messages,
        users: 1_500,
        start: d(2016, 5, 1),
        days: 365,
        seed: derive_seed(opts.seed, "demo/year1"),
        ..Default::default()
    };
    let y2 = relabel(generate_messages(&year2)?, "y2");
    let (pre, post): (Vec<_>, Vec<_>) = y2.into_iter().partition(|m| m.ts.date_naive() < cal.event);
    write_messages(&data.join("year2_pre.jsonl"), &pre)?;
    write_messages(&data.join("year2_post.jsonl"), &post)?;
    write_messages(&data.join("year1.jsonl"), &relabel(generate_messages(&year1)?, "y1"))?;
    write_mask_files(&dir.join("masks"))?;
    let path = dir.join(DEMO_CONFIG);
    demo_config(opts).save(&path)?;
    Ok(path)
}

/// Generate the demo inputs under `dir` and run the full pipeline into
/// `dir/run`.
pub fn demo(dir: &Path, opts: &DemoOptions) -> Result<RunManifest> {
    let path = write_demo_inputs(dir, opts)?;
    run_pipeline(&RunConfig::load(&path)?)
}
