//! Multinomial Naive Bayes in its log-odds form: a logistic model that is
//! linear in word counts, with intercept `ln P(C1)/P(C0)` and one
//! coefficient `ln p_{1,v}/p_{0,v}` per vocabulary word.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::sigmoid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub log_prior: f64,
    pub log_ratios: BTreeMap<String, f64>,
    pub smoothing: f64,
}

/// Fit from `(tokens, label)` pairs with Laplace-style smoothing `alpha`.
pub fn train_naive_bayes<'a, I>(docs: I, alpha: f64) -> Result<NaiveBayesModel>
where
    I: IntoIterator<Item = (&'a [String], u8)>,
{
    if !(alpha > 0.0) {
        return Err(Error::invalid("smoothing must be positive"));
    }
    let mut counts: BTreeMap<&str, [u64; 2]> = BTreeMap::new();
    let mut docs_per_class = [0u64; 2];
    let mut words_per_class = [0u64; 2];
    for (tokens, label) in docs {
        let c = usize::from(label == 1);
        docs_per_class[c] += 1;
        for t in tokens {
            counts.entry(t.as_str()).or_default()[c] += 1;
            words_per_class[c] += 1;
        }
    }
    if docs_per_class[0] == 0 || docs_per_class[1] == 0 {
        return Err(Error::MissingClass(format!(
            "naive bayes training saw {} class-0 and {} class-1 documents",
            docs_per_class[0], docs_per_class[1]
        )));
    }
    let v = counts.len() as f64;
    let denom = [
        words_per_class[0] as f64 + alpha * v,
        words_per_class[1] as f64 + alpha * v,
    ];
    let log_ratios = counts
        .into_iter()
        .map(|(t, [c0, c1])| {
            let p1 = (c1 as f64 + alpha) / denom[1];
            let p0 = (c0 as f64 + alpha) / denom[0];
            (t.to_string(), (p1 / p0).ln())
        })
        .collect();
    Ok(NaiveBayesModel {
        log_prior: (docs_per_class[1] as f64 / docs_per_class[0] as f64).ln(),
        log_ratios,
        smoothing: alpha,
    })
}

impl NaiveBayesModel {
    /// Log-odds of class 1; unknown tokens contribute nothing. Counts are
    /// accumulated per word first, so the result does not depend on token
    /// order even in the last bit.
    pub fn logit(&self, tokens: &[String]) -> f64 {
        let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
        for t in tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
        self.log_prior
            + counts
                .into_iter()
                .filter_map(|(t, n)| self.log_ratios.get(t).map(|b| f64::from(n) * b))
                .sum::<f64>()
    }

    pub fn predict(&self, tokens: &[String]) -> f64 {
        sigmoid(self.logit(tokens))
    }
}

pub fn predict_nb(model: &NaiveBayesModel, tokens: &[String]) -> f64 {
    model.predict(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(text: &str) -> Vec<String> {
        text.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn hand_computed_fit() {
        let d1 = s("a a b");
        let d2 = s("a b b");
        let m = train_naive_bayes([(&d1[..], 1), (&d2[..], 0)], 1.0).unwrap();
        // p(a|1) = 3/5, p(a|0) = 2/5
        assert!((m.log_ratios["a"] - 1.5f64.ln()).abs() < 1e-15);
        assert!((m.log_ratios["a"] - 0.4055).abs() < 1e-4);
        assert_eq!(m.log_prior, 0.0);
        assert!((m.predict(&s("a")) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn prior_only_cases() {
        let d1 = s("a");
        let d2 = s("b");
        let d3 = s("b c");
        let m = train_naive_bayes([(&d1[..], 1), (&d2[..], 0), (&d3[..], 0)], 1.0).unwrap();
        let prior = sigmoid(0.5f64.ln());
        assert!((m.predict(&[]) - prior).abs() < 1e-15);
        assert!((m.predict(&s("zz yy")) - prior).abs() < 1e-15);
    }

    #[test]
    fn single_class_is_an_error() {
        let d = s("a");
        assert!(train_naive_bayes([(&d[..], 0), (&d[..], 0)], 1.0).is_err());
    }

    #[test]
    fn order_invariant() {
        let d1 = s("a b c");
        let d2 = s("c c d");
        let m = train_naive_bayes([(&d1[..], 1), (&d2[..], 0)], 1.0).unwrap();
        assert_eq!(m.predict(&s("a c d")), m.predict(&s("d a c")));
    }
}
