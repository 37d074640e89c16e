use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::PredictionRecord;
use crate::math::lower_median;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordColor {
    pub token: String,
    /// Lower median score of the messages containing the token.
    pub wc: f64,
    /// Number of messages containing the token.
    pub count: usize,
}

fn distinct(tokens: &[String]) -> BTreeSet<&str> {
    tokens.iter().map(String::as_str).collect()
}

/// Word Color of every token, sorted by descending WC, then by token.
pub fn word_color(preds: &[PredictionRecord]) -> Vec<WordColor> {
    let mut by_token: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for p in preds {
        for t in distinct(&p.tokens) {
            by_token.entry(t).or_default().push(p.score);
        }
    }
    let mut out: Vec<WordColor> = by_token
        .into_iter()
        .map(|(t, mut scores)| WordColor {
            token: t.to_string(),
            count: scores.len(),
            wc: lower_median(&mut scores).unwrap_or(f64::NAN),
        })
        .collect();
    out.sort_by(|a, b| b.wc.total_cmp(&a.wc).then_with(|| a.token.cmp(&b.token)));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffParams {
    pub bin_width: f64,
    pub bins: usize,
    pub top_k: usize,
    pub min_support: usize,
}

impl Default for DiffParams {
    fn default() -> Self {
        DiffParams {
            bin_width: 0.005,
            bins: 20,
            top_k: 10,
            min_support: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffToken {
    pub token: String,
    pub diff: f64,
    pub acc_a: f64,
    pub acc_b: f64,
    pub count_a: usize,
    pub count_b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffBin {
    /// Bin `[lower, lower + width)` as `lower / width`.
    pub index: i64,
    pub lower: f64,
    pub upper: f64,
    /// Eligible tokens in the bin.
    pub n_tokens: usize,
    /// The `top_k` most frequent period-A tokens.
    pub tokens: Vec<DiffToken>,
}

fn per_token_accuracy(preds: &[PredictionRecord]) -> BTreeMap<&str, (usize, usize)> {
    let mut m: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for p in preds {
        let hit = usize::from(p.correct());
        for t in distinct(&p.tokens) {
            let e = m.entry(t).or_default();
            e.0 += hit;
            e.1 += 1;
        }
    }
    m
}

/// Per-token accuracy difference `acc_A - acc_B` between two prediction
/// sets, binned by `bin_width`. Returns the `bins` highest non-empty bins,
/// highest first. Tokens need `min_support` messages in both sets.
pub fn accuracy_diff_by_word(
    a: &[PredictionRecord],
    b: &[PredictionRecord],
    params: &DiffParams,
) -> Vec<DiffBin> {
    let acc_a = per_token_accuracy(a);
    let acc_b = per_token_accuracy(b);
    let mut bins: BTreeMap<i64, Vec<DiffToken>> = BTreeMap::new();
    for (t, &(hit_a, n_a)) in &acc_a {
        let Some(&(hit_b, n_b)) = acc_b.get(t) else {
            continue;
        };
        if n_a < params.min_support || n_b < params.min_support {
            continue;
        }
        let (ra, rb) = (hit_a as f64 / n_a as f64, hit_b as f64 / n_b as f64);
        let diff = ra - rb;
        // nudge so that exact multiples of the width land in their own bin
        let index = (diff / params.bin_width + 1e-9).floor() as i64;
        bins.entry(index).or_default().push(DiffToken {
            token: t.to_string(),
            diff,
            acc_a: ra,
            acc_b: rb,
            count_a: n_a,
            count_b: n_b,
        });
    }
    bins.into_iter()
        .rev()
        .take(params.bins)
        .map(|(index, mut toks)| {
            let n_tokens = toks.len();
            toks.sort_by(|x, y| y.count_a.cmp(&x.count_a).then_with(|| x.token.cmp(&y.token)));
            toks.truncate(params.top_k);
            DiffBin {
                index,
                lower: index as f64 * params.bin_width,
                upper: (index + 1) as f64 * params.bin_width,
                n_tokens,
                tokens: toks,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn pred(score: f64, tokens: &str, correct: bool) -> PredictionRecord {
        PredictionRecord {
            id: String::new(),
            user: None,
            day: NaiveDate::from_ymd_opt(2017, 5, 1).unwrap(),
            score,
            label: 1,
            predicted: u8::from(correct),
            tokens: tokens.split_whitespace().map(str::to_string).collect(),
        }
    }

    #[test]
    fn word_color_is_the_lower_median() {
        let preds = [pred(0.2, "x a", true), pred(0.8, "x", true), pred(0.5, "x b", true)];
        let wc = word_color(&preds);
        let get = |t: &str| wc.iter().find(|w| w.token == t).unwrap().wc;
        assert_eq!(get("x"), 0.5);
        assert_eq!(get("a"), 0.2);
        let even = [pred(0.2, "y", true), pred(0.6, "y", true)];
        assert_eq!(word_color(&even)[0].wc, 0.2);
    }

    #[test]
    fn repeated_token_counts_once_per_message() {
        let preds = [pred(0.9, "x x x", true), pred(0.1, "x", true), pred(0.2, "x", true)];
        assert_eq!(word_color(&preds)[0].wc, 0.2);
    }

    #[test]
    fn word_color_is_permutation_invariant() {
        let mut preds = vec![
            pred(0.3, "a b", true),
            pred(0.7, "b c", true),
            pred(0.4, "a c", true),
            pred(0.9, "a", true),
        ];
        let before = word_color(&preds);
        preds.reverse();
        assert_eq!(word_color(&preds), before);
        assert!(before.windows(2).all(|w| w[0].wc >= w[1].wc));
    }

    #[test]
    fn identical_sets_have_zero_diff() {
        let preds: Vec<_> = (0..6).map(|i| pred(0.5, "a b", i % 2 == 0)).collect();
        let table = accuracy_diff_by_word(&preds, &preds, &DiffParams::default());
        assert_eq!(table.len(), 1);
        assert_eq!(table[0].index, 0);
        assert!(table[0].tokens.iter().all(|t| t.diff == 0.0));
    }

    #[test]
    fn flip_word_lands_in_the_top_bin() {
        let mut a: Vec<_> = (0..6).map(|_| pred(0.5, "flip", true)).collect();
        let mut b: Vec<_> = (0..6).map(|_| pred(0.5, "flip", false)).collect();
        for i in 0..10 {
            a.push(pred(0.5, "common", i % 2 == 0));
            b.push(pred(0.5, "common", i % 2 == 0));
        }
        let table = accuracy_diff_by_word(&a, &b, &DiffParams::default());
        assert_eq!(table[0].tokens[0].token, "flip");
        assert_eq!(table[0].tokens[0].diff, 1.0);
        assert_eq!(table[0].index, 200);
    }

    #[test]
    fn support_filter_applies_to_both_periods() {
        let a: Vec<_> = (0..6).map(|_| pred(0.5, "w", true)).collect();
        let b: Vec<_> = (0..4).map(|_| pred(0.5, "w", false)).collect();
        assert!(accuracy_diff_by_word(&a, &b, &DiffParams::default()).is_empty());
    }
}
