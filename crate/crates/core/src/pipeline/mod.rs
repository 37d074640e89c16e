//! Config-driven orchestration: ingest, embed, train, evaluate, estimate
//! and report, each stage in its own directory under the run directory,
//! with a manifest of input and output digests.

mod config;
mod demo;
mod report;
mod run;

pub use config::{DataConfig, EstimateSection, EvaluateSection, GridSection, IngestSection, RunConfig};
pub use demo::{demo, demo_config, write_demo_inputs, DemoOptions, DEMO_CONFIG};
pub use report::{report, RunReport, NOTHING_TO_REPORT};
pub use run::*;
