//! ROC AUC, confusion metrics and the two threshold objectives on scored
//! messages, on the full test set and on a class-balanced subsample.
//!
//!     cargo run --example thresholds_and_metrics

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use normlens::evaluation::{
    balanced_subsample, choose_threshold, format_metric_table, metric_report, roc_auc, Objective, PredictionRecord,
    SampleKind,
};

fn main() -> normlens::Result<()> {
    // a noisy scorer on an imbalanced label set
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let preds: Vec<PredictionRecord> = (0..4000)
        .map(|i| {
            let label = u8::from(rng.random_bool(0.255));
            let z: f64 = rng.random_range(-1.0..1.0) + if label == 1 { 0.6 } else { 0.0 };
            PredictionRecord {
                id: i.to_string(),
                user: None,
                day: NaiveDate::from_ymd_opt(2017, 6, 1).unwrap(),
                score: 1.0 / (1.0 + (-2.0 * z).exp()),
                label,
                predicted: 0,
                tokens: vec![],
            }
        })
        .collect();
    let (val, test) = preds.split_at(2000);
    let scores: Vec<f64> = val.iter().map(|p| p.score).collect();
    let labels: Vec<u8> = val.iter().map(|p| p.label).collect();
    println!("validation AUC {:.4}", roc_auc(&scores, &labels)?);

    let t_acc = choose_threshold(&scores, &labels, Objective::Accuracy)?;
    let t_bal = choose_threshold(&scores, &labels, Objective::Balanced)?;
    let balanced = balanced_subsample(test, |p| p.label, 1)?;
    let reports = [
        metric_report(test, t_acc, Objective::Accuracy, SampleKind::Unbalanced)?,
        metric_report(&balanced, t_bal, Objective::Balanced, SampleKind::Balanced)?,
    ];
    print!("{}", format_metric_table("Model evaluation on test set", &reports));
    let share = test.iter().filter(|p| p.label == 0).count() as f64 / test.len() as f64;
    println!("majority share {share:.4}");
    Ok(())
}
