//! Word Color: the median predicted class-1 probability of the messages
//! containing each token, plus per-token accuracy differences between two
//! periods.
//!
//!     cargo run --release --example word_color

use chrono::NaiveDate;
use normlens::corpus::{ingest, IngestConfig, MaskTable, TargetPair};
use normlens::evaluation::{accuracy_diff_by_word, predict_records, word_color, DiffParams, PredictionRecord};
use normlens::math::lower_median;
use normlens::models::{train_model, ModelKind, ModelSpec, TrainConfig};
use normlens::synth::{generate_messages, planted_tokens, CorpusSynthConfig};

fn main() -> normlens::Result<()> {
    let event = NaiveDate::from_ymd_opt(2017, 10, 17).unwrap();
    let cfg = CorpusSynthConfig {
        messages: 30_000,
        start: NaiveDate::from_ymd_opt(2017, 5, 1).unwrap(),
        shift_date: Some(event),
        shift_factor: 0.3,
        ..Default::default()
    };
    let mut ic = IngestConfig::new(TargetPair::parse("han,hon")?, 2);
    ic.mask = Some(MaskTable::default());
    let data = ingest(generate_messages(&cfg)?, &ic)?;
    let s = &data.splits;
    let model = train_model(&ModelSpec::new(ModelKind::Nb), &s.train, &s.validation, None, &TrainConfig::default())?;
    let preds = predict_records(&model, &s.test, 0.5)?;

    let wc = word_color(&preds);
    let mut all: Vec<f64> = wc.iter().map(|w| w.wc).collect();
    let median = lower_median(&mut all).unwrap();
    let (fem, mal) = planted_tokens(&cfg);
    let side = |t: &str| wc.iter().find(|w| w.token == t).map(|w| w.wc);
    let above = fem.iter().filter(|t| side(t).is_some_and(|v| v > median)).count();
    let below = mal.iter().filter(|t| side(t).is_some_and(|v| v < median)).count();
    println!("median WC {median:.3}; class-1 tokens above {above}/{}, class-0 tokens below {below}/{}", fem.len(), mal.len());
    for w in wc.iter().take(5).chain(wc.iter().rev().take(5)) {
        println!("  {:<8}{:.3}{:>7}", w.token, w.wc, w.count);
    }

    let (before, after): (Vec<PredictionRecord>, Vec<PredictionRecord>) =
        preds.into_iter().partition(|p| p.day < event);
    let bins = accuracy_diff_by_word(
        &before,
        &after,
        &DiffParams {
            bins: 5,
            top_k: 5,
            ..Default::default()
        },
    );
    println!("\nlargest accuracy drops after the shift:");
    for b in bins {
        let toks: Vec<&str> = b.tokens.iter().map(|t| t.token.as_str()).collect();
        println!("  [{:.3}, {:.3}) {}", b.lower, b.upper, toks.join(" "));
    }
    Ok(())
}
