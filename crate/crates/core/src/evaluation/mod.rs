//! Scoring trained models: ROC AUC, confusion metrics, thresholds,
//! balanced subsamples, Word Color and word-level accuracy differences.

mod report;
mod words;

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::CorpusRecord;
use crate::error::{Error, Result};
use crate::models::TrainedModel;

pub use report::{
    format_metric_table, read_predictions, read_word_color_csv, write_diff_csv, write_metrics_csv,
    write_predictions, write_word_color_csv,
};
pub use words::{accuracy_diff_by_word, word_color, DiffBin, DiffParams, DiffToken, WordColor};

/// One scored message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub user: Option<String>,
    pub day: NaiveDate,
    pub score: f64,
    pub label: u8,
    pub predicted: u8,
    #[serde(default)]
    pub tokens: Vec<String>,
}

impl PredictionRecord {
    /// 1 when the prediction matches the true word.
    pub fn correct(&self) -> bool {
        self.predicted == self.label
    }
}

/// Score `records` with `model`, predicting class 1 when the score is at
/// least `threshold`. Output order follows the input.
pub fn predict_records(
    model: &TrainedModel,
    records: &[CorpusRecord],
    threshold: f64,
) -> Result<Vec<PredictionRecord>> {
    records
        .par_iter()
        .map(|r| {
            let score = model.predict(&r.tokens)?;
            Ok(PredictionRecord {
                id: r.id.clone(),
                user: r.user.clone(),
                day: r.day,
                score,
                label: r.label,
                predicted: u8::from(score >= threshold),
                tokens: r.tokens.clone(),
            })
        })
        .collect()
}

/// Re-threshold predictions in place.
pub fn apply_threshold(preds: &mut [PredictionRecord], threshold: f64) {
    for p in preds {
        p.predicted = u8::from(p.score >= threshold);
    }
}

fn class_counts(labels: &[u8]) -> Result<(usize, usize)> {
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::invalid(format!("label {bad} is not 0 or 1")));
    }
    let n1 = labels.iter().filter(|&&l| l == 1).count();
    Ok((labels.len() - n1, n1))
}

fn require_both(labels: &[u8]) -> Result<(usize, usize)> {
    let (n0, n1) = class_counts(labels)?;
    if n0 == 0 || n1 == 0 {
        return Err(Error::MissingClass(format!(
            "need both classes, got {n0} negatives and {n1} positives"
        )));
    }
    Ok((n0, n1))
}

/// Probability that a random positive outranks a random negative, ties
/// counting one half (Mann-Whitney U / (n1 n0)).
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    let (n0, n1) = require_both(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // U = Σ over positives of (#negatives below + ½ #negatives tied)
    let mut u = 0.0;
    let mut neg_below = 0usize;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let tied = &order[i..j];
        let pos = tied.iter().filter(|&&k| labels[k] == 1).count();
        let neg = tied.len() - pos;
        u += pos as f64 * (neg_below as f64 + 0.5 * neg as f64);
        neg_below += neg;
        i = j;
    }
    Ok(u / (n0 as f64 * n1 as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(predicted: &[u8], labels: &[u8]) -> Result<Self> {
        if predicted.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} predictions for {} labels",
                predicted.len(),
                labels.len()
            )));
        }
        if predicted.is_empty() {
            return Err(Error::invalid("no predictions"));
        }
        class_counts(labels)?;
        let mut c = Confusion::default();
        for (&p, &y) in predicted.iter().zip(labels) {
            match (p == 1, y == 1) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// Class-1 recall; NaN without class-1 examples.
    pub fn sensitivity(&self) -> f64 {
        self.tp as f64 / (self.tp + self.fn_) as f64
    }

    /// Class-0 recall; NaN without class-0 examples.
    pub fn specificity(&self) -> f64 {
        self.tn as f64 / (self.tn + self.fp) as f64
    }
}

/// Accuracy, sensitivity and specificity of hard predictions.
pub fn confusion_metrics(predicted: &[u8], labels: &[u8]) -> Result<(f64, f64, f64)> {
    let c = Confusion::from_predictions(predicted, labels)?;
    Ok((c.accuracy(), c.sensitivity(), c.specificity()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    #[default]
    Accuracy,
    /// Maximize min(sensitivity, specificity).
    Balanced,
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" => Ok(Objective::Accuracy),
            "balanced" => Ok(Objective::Balanced),
            other => Err(Error::Config(format!(
                "unknown objective `{other}` (accuracy, balanced)"
            ))),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Accuracy => "accuracy",
            Objective::Balanced => "balanced",
        })
    }
}

/// Candidate thresholds: 0, the midpoints between adjacent distinct
/// scores, and 1, ascending.
pub fn threshold_candidates(scores: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = scores.to_vec();
    u.sort_by(f64::total_cmp);
    u.dedup();
    let mut c = Vec::with_capacity(u.len() + 1);
    c.push(0.0);
    c.extend(u.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    c.push(1.0);
    c.sort_by(f64::total_cmp);
    c.dedup();
    c
}

fn objective_value(c: &Confusion, objective: Objective) -> f64 {
    match objective {
        Objective::Accuracy => c.accuracy(),
        Objective::Balanced => c.sensitivity().min(c.specificity()),
    }
}

/// Threshold maximizing `objective` over [`threshold_candidates`]; the
/// lowest candidate wins ties.
pub fn choose_threshold(scores: &[f64], labels: &[u8], objective: Objective) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape("scores and labels differ in length".into()));
    }
    let (n0, n1) = require_both(labels)?;
    let mut pairs: Vec<(f64, u8)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // pos_below[k]: positives among the k lowest scores
    let mut pos_below = Vec::with_capacity(pairs.len() + 1);
    pos_below.push(0usize);
    for p in &pairs {
        pos_below.push(pos_below.last().unwrap() + usize::from(p.1 == 1));
    }
    let mut best = (f64::NEG_INFINITY, 0.0);
    for t in threshold_candidates(scores) {
        let k = pairs.partition_point(|p| p.0 < t);
        let fn_ = pos_below[k];
        let tn = k - fn_;
        let c = Confusion {
            tp: n1 - fn_,
            tn,
            fp: n0 - tn,
            fn_,
        };
        let v = objective_value(&c, objective);
        if v > best.0 {
            best = (v, t);
        }
    }
    Ok(best.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleKind {
    Unbalanced,
    Balanced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub sample: SampleKind,
    pub n: usize,
    pub roc_auc: f64,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub threshold: f64,
    pub objective: Objective,
    /// Set when the AUC is below one half, i.e. the scores are
    /// oriented against class 1.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

/// Metrics for one prediction set at `threshold`.
pub fn metric_report(
    preds: &[PredictionRecord],
    threshold: f64,
    objective: Objective,
    sample: SampleKind,
) -> Result<MetricReport> {
    let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
    let labels: Vec<u8> = preds.iter().map(|p| p.label).collect();
    let predicted: Vec<u8> = scores.iter().map(|&s| u8::from(s >= threshold)).collect();
    let auc = roc_auc(&scores, &labels)?;
    let c = Confusion::from_predictions(&predicted, &labels)?;
    Ok(MetricReport {
        sample,
        n: preds.len(),
        roc_auc: auc,
        accuracy: c.accuracy(),
        sensitivity: c.sensitivity(),
        specificity: c.specificity(),
        threshold,
        objective,
        note: (auc < 0.5).then(|| {
            "AUC below 0.5: scores rank class 0 above class 1".to_string()
        }),
    })
}

/// Keep every minority-class item and an equally large random subset of
/// the majority class, in input order.
pub fn balanced_subsample<T: Clone>(
    items: &[T],
    label: impl Fn(&T) -> u8,
    seed: u64,
) -> Result<Vec<T>> {
    let labels: Vec<u8> = items.iter().map(&label).collect();
    let (n0, n1) = require_both(&labels)?;
    let (major, keep) = if n0 >= n1 { (0, n1) } else { (1, n0) };
    let major_idx: Vec<usize> = (0..items.len()).filter(|&i| labels[i] == major).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; items.len()];
    for k in sample(&mut rng, major_idx.len(), keep) {
        chosen[major_idx[k]] = true;
    }
    Ok(items
        .iter()
        .enumerate()
        .filter(|(i, _)| labels[*i] != major || chosen[*i])
        .map(|(_, t)| t.clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_auc(scores: &[f64], labels: &[u8]) -> f64 {
        let mut s = 0.0;
        let mut n = 0.0;
        for (i, &a) in scores.iter().enumerate() {
            for (j, &b) in scores.iter().enumerate() {
                if labels[i] == 1 && labels[j] == 0 {
                    n += 1.0;
                    s += if a > b {
                        1.0
                    } else if a == b {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        s / n
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.3], &[1, 1, 0]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.4; 6], &[1, 0, 1, 0, 0, 0]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap(), 0.75);
        assert!(roc_auc(&[0.1, 0.2], &[1, 1]).is_err());
    }

    #[test]
    fn confusion_examples() {
        let (a, s, p) = confusion_metrics(&[1, 0, 0, 0], &[1, 1, 0, 0]).unwrap();
        assert_eq!((a, s, p), (0.75, 0.5, 1.0));
        let (a, s, p) = confusion_metrics(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!((a, s, p), (1.0, 1.0, 1.0));
        assert!(confusion_metrics(&[], &[]).is_err());
    }

    #[test]
    fn separated_scores_get_perfect_accuracy() {
        let scores = [0.1, 0.2, 0.3, 0.7, 0.8];
        let labels = [0, 0, 0, 1, 1];
        let t = choose_threshold(&scores, &labels, Objective::Accuracy).unwrap();
        assert_eq!(t, 0.5);
        let pred: Vec<u8> = scores.iter().map(|&s| u8::from(s >= t)).collect();
        assert_eq!(confusion_metrics(&pred, &labels).unwrap().0, 1.0);
    }

    #[test]
    fn balanced_threshold_on_symmetric_scores() {
        // class-1 scores mirror class-0 scores around 0.5
        let scores = [0.1, 0.2, 0.45, 0.7, 0.3, 0.55, 0.8, 0.9];
        let labels = [0, 0, 0, 0, 1, 1, 1, 1];
        let t = choose_threshold(&scores, &labels, Objective::Balanced).unwrap();
        let pred: Vec<u8> = scores.iter().map(|&s| u8::from(s >= t)).collect();
        let (_, s, p) = confusion_metrics(&pred, &labels).unwrap();
        assert_eq!(t, 0.5);
        assert_eq!(s, p);
    }

    #[test]
    fn balanced_subsample_cases() {
        let items: Vec<u8> = [vec![0u8; 75], vec![1u8; 25]].concat();
        let out = balanced_subsample(&items, |&l| l, 3).unwrap();
        assert_eq!(out.iter().filter(|&&l| l == 1).count(), 25);
        assert_eq!(out.iter().filter(|&&l| l == 0).count(), 25);
        assert_eq!(out, balanced_subsample(&items, |&l| l, 3).unwrap());
        let even = vec![0u8, 1, 0, 1];
        assert_eq!(balanced_subsample(&even, |&l| l, 1).unwrap(), even);
    }

    fn labelled() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        (2usize..50).prop_flat_map(|n| {
            (
                prop::collection::vec(prop::sample::select(vec![0.1, 0.25, 0.5, 0.6, 0.9]), n),
                prop::collection::vec(0u8..2, n),
            )
                .prop_filter("both classes", |(_, l)| l.contains(&0) && l.contains(&1))
        })
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise_oracle((s, l) in labelled()) {
            prop_assert!((roc_auc(&s, &l).unwrap() - brute_auc(&s, &l)).abs() <= 1e-12);
        }

        #[test]
        fn auc_flip_sums_to_one((s, l) in labelled()) {
            let flipped: Vec<u8> = l.iter().map(|x| 1 - x).collect();
            let total = roc_auc(&s, &l).unwrap() + roc_auc(&s, &flipped).unwrap();
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn auc_is_rank_invariant((s, l) in labelled()) {
            let t: Vec<f64> = s.iter().map(|x| (3.0 * x).exp() - 7.0).collect();
            prop_assert_eq!(roc_auc(&s, &l).unwrap(), roc_auc(&t, &l).unwrap());
        }

        #[test]
        fn threshold_matches_exhaustive_search((s, l) in labelled(), balanced in any::<bool>()) {
            let obj = if balanced { Objective::Balanced } else { Objective::Accuracy };
            let mut best = (f64::NEG_INFINITY, 0.0);
            for t in threshold_candidates(&s) {
                let p: Vec<u8> = s.iter().map(|&x| u8::from(x >= t)).collect();
                let c = Confusion::from_predictions(&p, &l).unwrap();
                let v = objective_value(&c, obj);
                if v > best.0 {
                    best = (v, t);
                }
            }
            prop_assert_eq!(choose_threshold(&s, &l, obj).unwrap(), best.1);
        }

        #[test]
        fn optimal_accuracy_beats_majority_share((s, l) in labelled()) {
            let t = choose_threshold(&s, &l, Objective::Accuracy).unwrap();
            let p: Vec<u8> = s.iter().map(|&x| u8::from(x >= t)).collect();
            let acc = confusion_metrics(&p, &l).unwrap().0;
            let share1 = l.iter().filter(|&&x| x == 1).count() as f64 / l.len() as f64;
            prop_assert!(acc >= share1.max(1.0 - share1) - 1e-12);
        }
    }
}
