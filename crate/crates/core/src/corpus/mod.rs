//! Message ingestion: tokenize, censor the target word pair, mask, filter
//! and split into train / validation / test (or a single evaluation set).

mod io;
mod mask;
mod tokenize;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, NaiveDate, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{
    group_file, read_ingest_stats, read_jsonl, read_messages, read_records, resolve_records,
    write_ingest_output, write_jsonl, write_messages, write_records, STATS_FILE,
};
pub use mask::{
    apply_mask, MaskTable, EXCLUSIONS_FILE, FAMILY_FILE, FAMILY_NAME_TOKEN, FIRST_NAME_TOKEN,
    NAMES_FILE, PAIRS_FILE,
};
pub use tokenize::{hashtags, tokenize, HASHTAG_TOKEN, URL_TOKEN, USER_TOKEN};

/// Placeholder left where the target word was removed.
pub const SENTINEL: &str = "___";

pub const DEFAULT_MIN_WORDS: usize = 10;
pub const DEFAULT_MAX_WORDS: usize = 25;

/// One line of the raw input corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawMessage {
    pub id: String,
    #[serde(default)]
    pub user: Option<String>,
    pub ts: DateTime<Utc>,
    pub text: String,
    #[serde(default)]
    pub retweet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Train,
    Validation,
    Test,
    Evaluation,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::Train => "train",
            Group::Validation => "validation",
            Group::Test => "test",
            Group::Evaluation => "evaluation",
        }
    }
}

/// A censored, filtered message ready for training or scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub user: Option<String>,
    pub day: NaiveDate,
    pub tokens: Vec<String>,
    /// 1 for the infrequent word of the pair.
    pub label: u8,
    pub group: Group,
}

impl CorpusRecord {
    /// Token count, sentinel included.
    pub fn word_count(&self) -> usize {
        self.tokens.len()
    }
}

/// The censored word pair. `word_a` is the majority class (label 0),
/// `word_b` the minority class (label 1).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetPair {
    pub word_a: String,
    pub word_b: String,
    pub sentinel: String,
}

impl TargetPair {
    pub fn new(word_a: &str, word_b: &str) -> Result<Self> {
        let word_a = word_a.trim().to_lowercase();
        let word_b = word_b.trim().to_lowercase();
        if word_a.is_empty() || word_b.is_empty() {
            return Err(Error::invalid("target words must be non-empty"));
        }
        if word_a == word_b {
            return Err(Error::invalid(format!("target pair repeats `{word_a}`")));
        }
        if word_a == SENTINEL || word_b == SENTINEL {
            return Err(Error::invalid("target word equals the sentinel"));
        }
        Ok(TargetPair {
            word_a,
            word_b,
            sentinel: SENTINEL.to_string(),
        })
    }

    /// Parse `"han,hon"`.
    pub fn parse(s: &str) -> Result<Self> {
        match s.split_once(',') {
            Some((a, b)) => Self::new(a, b),
            None => Err(Error::invalid(format!("expected `wordA,wordB`, got `{s}`"))),
        }
    }

    pub fn word(&self, label: u8) -> &str {
        if label == 1 {
            &self.word_b
        } else {
            &self.word_a
        }
    }
}

/// Why a message did not become a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    Neither,
    Both,
    Repeated,
}

/// Replace the single target word with the sentinel.
///
/// Returns `None` when neither or both pair words occur. A word occurring
/// more than once is also rejected so that every record has exactly one
/// sentinel.
pub fn extract_target(tokens: &[String], pair: &TargetPair) -> Option<(Vec<String>, u8)> {
    classify_target(tokens, pair).ok()
}

fn classify_target(
    tokens: &[String],
    pair: &TargetPair,
) -> std::result::Result<(Vec<String>, u8), Rejection> {
    let count = |w: &str| tokens.iter().filter(|t| *t == w).count();
    let (na, nb) = (count(&pair.word_a), count(&pair.word_b));
    let (word, label) = match (na, nb) {
        (0, 0) => return Err(Rejection::Neither),
        (_, 0) => (&pair.word_a, 0),
        (0, _) => (&pair.word_b, 1),
        _ => return Err(Rejection::Both),
    };
    if na + nb > 1 {
        return Err(Rejection::Repeated);
    }
    let censored = tokens
        .iter()
        .map(|t| if t == word { pair.sentinel.clone() } else { t.clone() })
        .collect();
    Ok((censored, label))
}

/// Put the label word back at the sentinel.
pub fn uncensor(tokens: &[String], label: u8, pair: &TargetPair) -> Vec<String> {
    tokens
        .iter()
        .map(|t| {
            if *t == pair.sentinel {
                pair.word(label).to_string()
            } else {
                t.clone()
            }
        })
        .collect()
}

pub fn filter_length(record: &CorpusRecord, min_words: usize, max_words: usize) -> bool {
    (min_words..=max_words).contains(&record.word_count())
}

/// Split shares in percent, e.g. 64/16/20.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: u32,
    pub validation: u32,
    pub test: u32,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 64,
            validation: 16,
            test: 20,
        }
    }
}

impl SplitFractions {
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<u32> = s
            .split(',')
            .map(|p| p.trim().parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::invalid(format!("split `{s}`: {e}")))?;
        match parts[..] {
            [train, validation, test] if train + validation + test == 100 => Ok(SplitFractions {
                train,
                validation,
                test,
            }),
            _ => Err(Error::invalid(format!(
                "split `{s}` must be three percentages summing to 100"
            ))),
        }
    }

    /// Set sizes for `n` records by largest remainder, so each size is
    /// within one record of its exact share.
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        let shares = [self.train, self.validation, self.test];
        let exact: Vec<u128> = shares.iter().map(|&p| n as u128 * p as u128).collect();
        let mut sizes: [usize; 3] = [0; 3];
        for i in 0..3 {
            sizes[i] = (exact[i] / 100) as usize;
        }
        let mut left = n - sizes.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(exact[i] % 100));
        for &i in &order {
            if left == 0 {
                break;
            }
            sizes[i] += 1;
            left -= 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Splits {
    pub train: Vec<CorpusRecord>,
    pub validation: Vec<CorpusRecord>,
    pub test: Vec<CorpusRecord>,
}

/// Random split into train / validation / test, a pure function of the
/// record set and the seed (input order does not matter).
pub fn split_sets(
    mut records: Vec<CorpusRecord>,
    fractions: SplitFractions,
    seed: u64,
) -> Result<Splits> {
    if records.len() < 5 {
        return Err(Error::invalid(format!(
            "need at least 5 records to split, got {}",
            records.len()
        )));
    }
    records.sort_by(|a, b| a.id.cmp(&b.id));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    records.shuffle(&mut rng);

    let [n_train, n_val, _] = fractions.sizes(records.len());
    let mut test = records.split_off(n_train + n_val);
    let mut validation = records.split_off(n_train);
    let mut train = records;
    for (set, group) in [
        (&mut train, Group::Train),
        (&mut validation, Group::Validation),
        (&mut test, Group::Test),
    ] {
        for r in set.iter_mut() {
            r.group = group;
        }
        set.sort_by(|a, b| a.id.cmp(&b.id));
    }
    Ok(Splits {
        train,
        validation,
        test,
    })
}

/// Drop messages carrying any of `tags` (case-insensitive, whole hashtag).
pub fn filter_hashtag_correlated(messages: Vec<RawMessage>, tags: &[String]) -> Vec<RawMessage> {
    if tags.is_empty() {
        return messages;
    }
    let wanted: BTreeSet<String> = tags
        .iter()
        .map(|t| format!("#{}", t.trim().trim_start_matches('#').to_lowercase()))
        .collect();
    messages
        .into_iter()
        .filter(|m| !hashtags(&m.text).iter().any(|h| wanted.contains(h)))
        .collect()
}

/// Share of label-1 records.
pub fn class_balance<I: IntoIterator<Item = u8>>(labels: I) -> Result<f64> {
    let (mut n, mut pos) = (0usize, 0usize);
    for l in labels {
        n += 1;
        pos += usize::from(l == 1);
    }
    if n == 0 {
        return Err(Error::invalid("class balance of an empty set"));
    }
    Ok(pos as f64 / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DailyShare {
    pub day: NaiveDate,
    pub tagged: usize,
    pub total: usize,
    /// `None` for a day with no messages at all.
    pub share: Option<f64>,
}

/// Per calendar day, the fraction of messages carrying `tag`. Days between
/// the first and last observed day with no messages are reported with
/// `share = None`.
pub fn hashtag_share_series(messages: &[RawMessage], tag: &str) -> Vec<DailyShare> {
    let tag = format!("#{}", tag.trim().trim_start_matches('#').to_lowercase());
    let mut per_day: BTreeMap<NaiveDate, (usize, usize)> = BTreeMap::new();
    for m in messages {
        let e = per_day.entry(m.ts.date_naive()).or_default();
        e.1 += 1;
        if hashtags(&m.text).contains(&tag) {
            e.0 += 1;
        }
    }
    let (Some(&first), Some(&last)) = (per_day.keys().next(), per_day.keys().next_back()) else {
        return Vec::new();
    };
    first
        .iter_days()
        .take_while(|d| *d <= last)
        .map(|day| match per_day.get(&day) {
            Some(&(tagged, total)) => DailyShare {
                day,
                tagged,
                total,
                share: Some(tagged as f64 / total as f64),
            },
            None => DailyShare {
                day,
                tagged: 0,
                total: 0,
                share: None,
            },
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub pair: TargetPair,
    pub min_words: usize,
    pub max_words: usize,
    pub seed: u64,
    pub split: SplitFractions,
    pub mask: Option<MaskTable>,
    pub drop_hashtags: Vec<String>,
    /// Put every record in the evaluation group instead of splitting.
    pub evaluation: bool,
}

impl IngestConfig {
    pub fn new(pair: TargetPair, seed: u64) -> Self {
        IngestConfig {
            pair,
            min_words: DEFAULT_MIN_WORDS,
            max_words: DEFAULT_MAX_WORDS,
            seed,
            split: SplitFractions::default(),
            mask: None,
            drop_hashtags: Vec::new(),
            evaluation: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub input: usize,
    pub retweets: usize,
    pub hashtag_filtered: usize,
    pub no_target: usize,
    pub both_targets: usize,
    pub repeated_target: usize,
    pub length_filtered: usize,
    pub kept: usize,
}

#[derive(Debug, Clone, Default)]
pub struct IngestOutput {
    pub splits: Splits,
    pub evaluation: Vec<CorpusRecord>,
    pub stats: IngestStats,
}

impl IngestOutput {
    pub fn all_records(&self) -> impl Iterator<Item = &CorpusRecord> {
        self.splits
            .train
            .iter()
            .chain(&self.splits.validation)
            .chain(&self.splits.test)
            .chain(&self.evaluation)
    }
}

/// Full ingest: drop retweets and tagged messages, tokenize, censor, mask,
/// length-filter and split.
pub fn ingest(messages: Vec<RawMessage>, cfg: &IngestConfig) -> Result<IngestOutput> {
    let mut stats = IngestStats {
        input: messages.len(),
        ..Default::default()
    };
    let originals: Vec<RawMessage> = messages.into_iter().filter(|m| !m.retweet).collect();
    stats.retweets = stats.input - originals.len();
    let before = originals.len();
    let kept = filter_hashtag_correlated(originals, &cfg.drop_hashtags);
    stats.hashtag_filtered = before - kept.len();

    let mut records = Vec::with_capacity(kept.len());
    for m in kept {
        let tokens = tokenize(&m.text);
        let (censored, label) = match classify_target(&tokens, &cfg.pair) {
            Ok(x) => x,
            Err(Rejection::Neither) => {
                stats.no_target += 1;
                continue;
            }
            Err(Rejection::Both) => {
                stats.both_targets += 1;
                continue;
            }
            Err(Rejection::Repeated) => {
                stats.repeated_target += 1;
                continue;
            }
        };
        let tokens = match &cfg.mask {
            Some(mask) => apply_mask(&censored, mask),
            None => censored,
        };
        let record = CorpusRecord {
            id: m.id,
            user: m.user.filter(|u| !u.is_empty()),
            day: m.ts.date_naive(),
            tokens,
            label,
            group: Group::Evaluation,
        };
        if !filter_length(&record, cfg.min_words, cfg.max_words) {
            stats.length_filtered += 1;
            continue;
        }
        records.push(record);
    }
    stats.kept = records.len();

    if cfg.evaluation {
        records.sort_by(|a, b| a.id.cmp(&b.id));
        return Ok(IngestOutput {
            splits: Splits::default(),
            evaluation: records,
            stats,
        });
    }
    let splits = split_sets(records, cfg.split, cfg.seed)?;
    Ok(IngestOutput {
        splits,
        evaluation: Vec::new(),
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    fn pair() -> TargetPair {
        TargetPair::new("han", "hon").unwrap()
    }

    fn record(id: usize, n_tokens: usize, label: u8) -> CorpusRecord {
        CorpusRecord {
            id: format!("r{id:05}"),
            user: Some(format!("u{}", id % 7)),
            day: NaiveDate::from_ymd_opt(2016, 6, 1).unwrap(),
            tokens: vec!["x".to_string(); n_tokens],
            label,
            group: Group::Train,
        }
    }

    fn msg(id: &str, day: u32, text: &str) -> RawMessage {
        RawMessage {
            id: id.into(),
            user: Some("u".into()),
            ts: Utc.with_ymd_and_hms(2017, 10, day, 12, 0, 0).unwrap(),
            text: text.into(),
            retweet: false,
        }
    }

    #[test]
    fn extract_single_occurrence() {
        let got = extract_target(&s(&["han", "går", "hem"]), &pair()).unwrap();
        assert_eq!(got, (s(&["___", "går", "hem"]), 0));
        let got = extract_target(&s(&["nu", "kommer", "hon"]), &pair()).unwrap();
        assert_eq!(got.1, 1);
    }

    #[test]
    fn extract_rejects_both_neither_and_repeats() {
        assert_eq!(extract_target(&s(&["han", "ser", "hon"]), &pair()), None);
        assert_eq!(extract_target(&s(&["går", "hem"]), &pair()), None);
        assert_eq!(extract_target(&s(&["han", "och", "han"]), &pair()), None);
    }

    #[test]
    fn uncensor_restores_tokens() {
        let original = s(&["i", "dag", "hon", "skrev"]);
        let (c, l) = extract_target(&original, &pair()).unwrap();
        assert_eq!(uncensor(&c, l, &pair()), original);
    }

    #[test]
    fn target_pair_validation() {
        assert!(TargetPair::new("han", "han").is_err());
        assert!(TargetPair::new("han", SENTINEL).is_err());
        assert_eq!(TargetPair::parse("Jag,Vi").unwrap().word_b, "vi");
    }

    #[test]
    fn length_bounds_inclusive() {
        assert!(filter_length(&record(0, 10, 0), 10, 25));
        assert!(filter_length(&record(0, 25, 0), 10, 25));
        assert!(!filter_length(&record(0, 26, 0), 10, 25));
        assert!(!filter_length(&record(0, 9, 0), 10, 25));
    }

    #[test]
    fn split_100_is_exact() {
        let recs: Vec<_> = (0..100).map(|i| record(i, 12, 0)).collect();
        let sp = split_sets(recs, SplitFractions::default(), 7).unwrap();
        assert_eq!(
            (sp.train.len(), sp.validation.len(), sp.test.len()),
            (64, 16, 20)
        );
        assert!(sp.validation.iter().all(|r| r.group == Group::Validation));
    }

    #[test]
    fn split_is_deterministic_and_order_free() {
        let recs: Vec<_> = (0..57).map(|i| record(i, 12, 0)).collect();
        let mut rev = recs.clone();
        rev.reverse();
        let a = split_sets(recs.clone(), SplitFractions::default(), 3).unwrap();
        let b = split_sets(rev, SplitFractions::default(), 3).unwrap();
        assert_eq!(a, b);
        let c = split_sets(recs, SplitFractions::default(), 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn split_rejects_tiny_input() {
        let recs: Vec<_> = (0..4).map(|i| record(i, 12, 0)).collect();
        assert!(split_sets(recs, SplitFractions::default(), 1).is_err());
    }

    #[test]
    fn split_sizes_at_full_scale() {
        let n = 984_337 + 246_085 + 307_606;
        let [a, b, c] = SplitFractions::default().sizes(n);
        assert_eq!(a + b + c, n);
        assert!(a.abs_diff(984_337) <= 1);
        assert!(b.abs_diff(246_085) <= 1);
        assert!(c.abs_diff(307_606) <= 1);
    }

    #[test]
    fn split_fraction_parsing() {
        assert_eq!(
            SplitFractions::parse("64,16,20").unwrap(),
            SplitFractions::default()
        );
        assert!(SplitFractions::parse("60,20,30").is_err());
        assert!(SplitFractions::parse("a,b,c").is_err());
    }

    #[test]
    fn hashtag_filter() {
        let msgs = vec![msg("1", 17, "Jag med #MeToo"), msg("2", 17, "inget här")];
        let out = filter_hashtag_correlated(msgs.clone(), &["#metoo".to_string()]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].id, "2");
        assert_eq!(filter_hashtag_correlated(msgs.clone(), &[]), msgs);
    }

    #[test]
    fn class_balance_counts_label_one() {
        assert_eq!(class_balance([1, 0, 0, 0]).unwrap(), 0.25);
        assert!(class_balance(Vec::<u8>::new()).is_err());
    }

    #[test]
    fn daily_share_with_gap() {
        let mut msgs = Vec::new();
        for i in 0..200 {
            let text = if i < 2 { "#metoo ja" } else { "nej" };
            msgs.push(msg(&format!("a{i}"), 17, text));
        }
        msgs.push(msg("b", 19, "hej"));
        let series = hashtag_share_series(&msgs, "metoo");
        assert_eq!(series.len(), 3);
        assert_eq!(series[0].share, Some(0.01));
        assert_eq!(series[1].share, None);
        assert_eq!(series[2].share, Some(0.0));
        assert!(hashtag_share_series(&msgs, "#fika")
            .iter()
            .all(|d| d.share.unwrap_or(0.0) == 0.0));
    }

    #[test]
    fn ingest_end_to_end() {
        let long = "och sedan gick vi alla hem till stugan vid sjön";
        let msgs = vec![
            msg("1", 2, &format!("han {long}")),
            msg("2", 2, &format!("hon {long}")),
            msg("3", 2, &format!("han och hon {long}")),
            msg("4", 2, "han kort"),
            RawMessage {
                retweet: true,
                ..msg("5", 2, &format!("hon {long}"))
            },
            msg("6", 2, &format!("#metoo hon {long}")),
            msg("7", 2, long),
        ];
        let mut cfg = IngestConfig::new(pair(), 1);
        cfg.drop_hashtags = vec!["metoo".into()];
        cfg.evaluation = true;
        let out = ingest(msgs, &cfg).unwrap();
        assert_eq!(
            out.stats,
            IngestStats {
                input: 7,
                retweets: 1,
                hashtag_filtered: 1,
                no_target: 1,
                both_targets: 1,
                repeated_target: 0,
                length_filtered: 1,
                kept: 2,
            }
        );
        assert_eq!(out.evaluation.len(), 2);
        assert!(out
            .evaluation
            .iter()
            .all(|r| r.tokens.iter().filter(|t| *t == SENTINEL).count() == 1));
    }

    #[test]
    fn record_json_keys() {
        let r = record(3, 2, 1);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let keys: BTreeSet<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(
            keys,
            ["day", "group", "id", "label", "tokens", "user"]
                .iter()
                .map(|s| s.to_string())
                .collect()
        );
        assert_eq!(v["group"], "train");
        assert_eq!(v["day"], "2016-06-01");
    }

    #[test]
    fn raw_message_parses_input_line() {
        let line = r#"{"id":"9","user":"42","ts":"2017-10-17T08:30:00Z","text":"hej","retweet":false}"#;
        let m: RawMessage = serde_json::from_str(line).unwrap();
        assert_eq!(m.ts.date_naive(), NaiveDate::from_ymd_opt(2017, 10, 17).unwrap());
        assert!(!m.retweet);
    }
}
