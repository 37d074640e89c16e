//! Naive Bayes and an LSTM on a corpus with planted gendered tokens, and on
//! a variant where only the order of token pairs carries the class.
//!
//!     cargo run --release --example train_classifiers [order]

use normlens::corpus::{ingest, IngestConfig, MaskTable, TargetPair};
use normlens::embeddings::{train_skipgram, SgnsConfig};
use normlens::evaluation::{choose_threshold, metric_report, predict_records, Objective, SampleKind};
use normlens::models::{train_model, ModelKind, ModelSpec, TrainConfig};
use normlens::synth::{generate_messages, CorpusSynthConfig, Signal};

fn main() -> normlens::Result<()> {
    let signal = match std::env::args().nth(1).as_deref() {
        Some("order") => Signal::Order,
        _ => Signal::Lexical,
    };
    let cfg = CorpusSynthConfig {
        messages: 20_000,
        signal,
        obvious_rate: 0.0,
        name_rate: 0.0,
        seed: 1,
        ..Default::default()
    };
    let mut ic = IngestConfig::new(TargetPair::parse("han,hon")?, 3);
    ic.mask = Some(MaskTable::default());
    let data = ingest(generate_messages(&cfg)?, &ic)?;
    let s = &data.splits;
    println!("{signal:?} signal: {} train / {} validation / {} test", s.train.len(), s.validation.len(), s.test.len());

    let sentences: Vec<Vec<String>> = s.train.iter().map(|r| r.tokens.clone()).collect();
    let sg = SgnsConfig {
        dim: 32,
        window: 5,
        min_count: 5,
        epochs: 3,
        seed: 5,
        ..Default::default()
    };
    let (emb, _) = train_skipgram(&sentences, &sg)?;
    let tc = TrainConfig {
        learning_rate: 0.1,
        batch_size: 20,
        seed: 9,
        ..Default::default()
    };

    for kind in [ModelKind::Nb, ModelKind::Bow, ModelKind::Lstm] {
        let spec = ModelSpec {
            nodes: 32,
            ..ModelSpec::new(kind)
        };
        let model = train_model(&spec, &s.train, &s.validation, Some(&emb), &tc)?;
        let val = predict_records(&model, &s.validation, 0.5)?;
        let scores: Vec<f64> = val.iter().map(|p| p.score).collect();
        let labels: Vec<u8> = val.iter().map(|p| p.label).collect();
        let th = choose_threshold(&scores, &labels, Objective::Accuracy)?;
        let test = predict_records(&model, &s.test, th)?;
        let m = metric_report(&test, th, Objective::Accuracy, SampleKind::Unbalanced)?;
        println!("{:>5}: AUC {:.3}  accuracy {:.3}  threshold {:.3}", kind.as_str(), m.roc_auc, m.accuracy, th);
    }
    Ok(())
}
