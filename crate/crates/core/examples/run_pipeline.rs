//! The config-driven pipeline: write demo inputs, run every stage, rerun
//! with one changed setting and watch only the affected stages execute.
//!
//!     cargo run --release --example run_pipeline

use normlens::models::ModelKind;
use normlens::pipeline::{report, run_pipeline, write_demo_inputs, DemoOptions, RunConfig};

fn main() -> normlens::Result<()> {
    let dir = std::env::temp_dir().join("normlens_pipeline_example");
    let opts = DemoOptions {
        year2_messages: 10_000,
        year1_messages: 5_000,
        model: ModelKind::Nb,
        ..Default::default()
    };
    let path = write_demo_inputs(&dir, &opts)?;
    println!("config at {}:\n{}", path.display(), std::fs::read_to_string(&path).unwrap());

    let mut cfg = RunConfig::load(&path)?;
    let first = run_pipeline(&cfg)?;
    cfg.estimate.truncate(2);
    let second = run_pipeline(&cfg)?;
    for (a, b) in first.stages.iter().zip(&second.stages) {
        let state = if a == b { "reused" } else { "rerun" };
        println!("{:<10}{state}", a.name);
    }
    print!("\n{}", report(&cfg.out_dir(), 5)?.text);
    Ok(())
}
