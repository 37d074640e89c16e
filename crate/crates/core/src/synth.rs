//! Synthetic corpora with planted structure, for demos and for checking
//! that the pipeline recovers what was put in.

use std::fs;
use std::path::Path;

use chrono::{Duration, NaiveDate, TimeZone, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::corpus::{RawMessage, EXCLUSIONS_FILE, FAMILY_FILE, NAMES_FILE, PAIRS_FILE};
use crate::econometrics::{PanelObservation, Series};
use crate::error::{Error, Result};

/// Where the class signal lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    /// Planted tokens whose presence shifts the class log-odds.
    Lexical,
    /// Token pairs whose order, not presence, reveals the class.
    Order,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSynthConfig {
    pub messages: usize,
    /// Share of class 1 (`word_b`).
    pub imbalance: f64,
    pub signal: Signal,
    /// Planted tokens, half for each class.
    pub gendered_tokens: usize,
    /// Log likelihood ratio each planted token carries.
    pub log_odds: f64,
    /// Chance that a body slot holds a planted token.
    pub gendered_rate: f64,
    /// Distinct order pairs, for [`Signal::Order`].
    pub order_pairs: usize,
    /// Ordered pairs per message, for [`Signal::Order`].
    pub pairs_per_message: usize,
    pub neutral_vocab: usize,
    /// Token counts including the target word.
    pub min_words: usize,
    pub max_words: usize,
    pub users: usize,
    pub start: NaiveDate,
    pub days: i64,
    /// Planted tokens are this much rarer from `shift_date` on.
    pub shift_date: Option<NaiveDate>,
    pub shift_factor: f64,
    /// Chance of an obviously gendered word or a first name, both masked.
    pub obvious_rate: f64,
    pub name_rate: f64,
    pub word_a: String,
    pub word_b: String,
    pub seed: u64,
}

impl Default for CorpusSynthConfig {
    fn default() -> Self {
        CorpusSynthConfig {
            messages: 50_000,
            imbalance: 0.255,
            signal: Signal::Lexical,
            gendered_tokens: 40,
            log_odds: 1.5,
            gendered_rate: 0.12,
            order_pairs: 10,
            pairs_per_message: 2,
            neutral_vocab: 400,
            min_words: 10,
            max_words: 25,
            users: 2_000,
            start: NaiveDate::from_ymd_opt(2016, 5, 1).expect("valid date"),
            days: 365,
            shift_date: None,
            shift_factor: 1.0,
            obvious_rate: 0.05,
            name_rate: 0.05,
            word_a: "han".into(),
            word_b: "hon".into(),
            seed: 0,
        }
    }
}

/// Lowercase letters only, so every token survives tokenization intact.
fn code(mut i: usize) -> String {
    let mut s = Vec::new();
    loop {
        s.push(b'a' + (i % 26) as u8);
        i /= 26;
        if i == 0 {
            break;
        }
    }
    s.reverse();
    String::from_utf8(s).expect("ascii")
}

fn neutral_token(i: usize) -> String {
    format!("ne{}", code(i))
}

/// Planted tokens: `(class 1, class 0)`.
pub fn planted_tokens(cfg: &CorpusSynthConfig) -> (Vec<String>, Vec<String>) {
    let half = cfg.gendered_tokens / 2;
    (
        (0..half).map(|i| format!("fe{}", code(i))).collect(),
        (0..cfg.gendered_tokens - half).map(|i| format!("ma{}", code(i))).collect(),
    )
}

/// Order pair tokens `(first, second)`; class 1 writes them in this order,
/// class 0 reversed.
pub fn order_pairs(cfg: &CorpusSynthConfig) -> Vec<(String, String)> {
    (0..cfg.order_pairs).map(|i| (format!("pa{}", code(i)), format!("pb{}", code(i)))).collect()
}

const OBVIOUS: [(&str, &str); 2] = [("mamma", "pappa"), ("dotter", "son")];
const FIRST_NAMES: [&str; 4] = ["anna", "erik", "maria", "lars"];

impl CorpusSynthConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0 < self.imbalance && self.imbalance < 1.0) {
            return Err(Error::Config("imbalance must be in (0, 1)".into()));
        }
        if self.min_words < 4 || self.max_words < self.min_words {
            return Err(Error::Config("need 4 <= min_words <= max_words".into()));
        }
        if self.signal == Signal::Order && 2 * self.pairs_per_message + 2 > self.min_words {
            return Err(Error::Config("messages too short for the order pairs".into()));
        }
        if self.neutral_vocab == 0 || self.users == 0 || self.days <= 0 {
            return Err(Error::Config("neutral_vocab, users and days must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gendered_rate) {
            return Err(Error::Config("gendered_rate must be a probability".into()));
        }
        Ok(())
    }
}

/// Raw messages, each containing exactly one of the two target words.
pub fn generate_messages(cfg: &CorpusSynthConfig) -> Result<Vec<RawMessage>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let zipf: Vec<f64> = (0..cfg.neutral_vocab).map(|r| 1.0 / (r as f64 + 2.0)).collect();
    let neutral = WeightedIndex::new(&zipf).map_err(|e| Error::Config(e.to_string()))?;
    let user_w: Vec<f64> = (0..cfg.users).map(|r| 1.0 / (r as f64 + 5.0).powf(0.7)).collect();
    let users = WeightedIndex::new(&user_w).map_err(|e| Error::Config(e.to_string()))?;
    let neutral_tokens: Vec<String> = (0..cfg.neutral_vocab).map(neutral_token).collect();
    let (fem, mal) = planted_tokens(cfg);
    let pairs = order_pairs(cfg);
    // each class draws its own half e^log_odds times as often as the other half
    let up = cfg.log_odds.exp();
    let planted_for = |label: u8| -> Vec<f64> {
        fem.iter()
            .map(|_| if label == 1 { up } else { 1.0 })
            .chain(mal.iter().map(|_| if label == 0 { up } else { 1.0 }))
            .collect()
    };
    let planted_all: Vec<&String> = fem.iter().chain(&mal).collect();
    let planted_dist = [
        WeightedIndex::new(planted_for(0)).ok(),
        WeightedIndex::new(planted_for(1)).ok(),
    ];

    let mut out = Vec::with_capacity(cfg.messages);
    for id in 0..cfg.messages {
        let label = u8::from(rng.random_bool(cfg.imbalance));
        let day = rng.random_range(0..cfg.days);
        let date = cfg.start + Duration::days(day);
        let rate = match cfg.shift_date {
            Some(s) if date >= s => cfg.gendered_rate * cfg.shift_factor,
            _ => cfg.gendered_rate,
        };
        let n = rng.random_range(cfg.min_words..=cfg.max_words);
        let mut body: Vec<String> = (0..n - 1)
            .map(|_| match &planted_dist[label as usize] {
                Some(d) if cfg.signal == Signal::Lexical && rng.random_bool(rate) => {
                    planted_all[d.sample(&mut rng)].clone()
                }
                _ => neutral_tokens[neutral.sample(&mut rng)].clone(),
            })
            .collect();
        if cfg.signal == Signal::Order && !pairs.is_empty() {
            let slots = body.len() / 2;
            let mut used: Vec<usize> = Vec::new();
            for _ in 0..cfg.pairs_per_message {
                let s = loop {
                    let s = rng.random_range(0..slots);
                    if !used.contains(&s) {
                        break s;
                    }
                };
                used.push(s);
                let (a, b) = &pairs[rng.random_range(0..pairs.len())];
                let (x, y) = if label == 1 { (a, b) } else { (b, a) };
                body[2 * s] = x.clone();
                body[2 * s + 1] = y.clone();
            }
        }
        if rng.random_bool(cfg.obvious_rate) {
            let (f, m) = OBVIOUS[rng.random_range(0..OBVIOUS.len())];
            let pos = rng.random_range(0..body.len());
            body[pos] = if label == 1 { f } else { m }.to_string();
        }
        if rng.random_bool(cfg.name_rate) {
            let pos = rng.random_range(0..body.len());
            body[pos] = FIRST_NAMES[rng.random_range(0..FIRST_NAMES.len())].to_string();
        }
        let target = if label == 1 { &cfg.word_b } else { &cfg.word_a };
        let pos = rng.random_range(0..=body.len());
        body.insert(pos, target.clone());
        let secs = rng.random_range(0..86_400);
        let ts = Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0).expect("midnight")) + Duration::seconds(secs);
        out.push(RawMessage {
            id: format!("{}{id:07}", cfg.seed % 1000),
            user: Some(format!("u{:05}", users.sample(&mut rng))),
            ts,
            text: body.join(" "),
            retweet: false,
        });
    }
    Ok(out)
}

/// Mask files matching the obvious words and names the generator plants.
pub fn write_mask_files(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let pairs: String = OBVIOUS.iter().map(|(f, m)| format!("{f},{m},{f}{m}\n")).collect();
    let files = [
        (PAIRS_FILE, pairs),
        (NAMES_FILE, FIRST_NAMES.join("\n") + "\n"),
        (FAMILY_FILE, "andersson\njohansson\n".to_string()),
        (EXCLUSIONS_FILE, String::new()),
    ];
    for (name, text) in files {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

/// Two-year message panel with shared seasonal day effects, persistent
/// user effects and a planted post-event change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PanelSynthConfig {
    pub days: i64,
    pub per_day: usize,
    pub users: usize,
    pub base: f64,
    pub effect: f64,
    pub event_day: i64,
    pub day_sd: f64,
    pub user_sd: f64,
    pub seasonal_amplitude: f64,
    /// Add a togetherness series without any event effect.
    pub togetherness: bool,
    pub she_share: f64,
    pub seed: u64,
}

impl Default for PanelSynthConfig {
    fn default() -> Self {
        PanelSynthConfig {
            days: 365,
            per_day: 60,
            users: 4_000,
            base: 0.77,
            effect: -0.015,
            event_day: 169,
            day_sd: 0.01,
            user_sd: 0.05,
            seasonal_amplitude: 0.02,
            togetherness: false,
            she_share: 0.255,
            seed: 0,
        }
    }
}

pub fn generate_panel(cfg: &PanelSynthConfig) -> Result<Vec<PanelObservation>> {
    let normal = |sd: f64| Normal::new(0.0, sd).map_err(|e| Error::Config(e.to_string()));
    let (day_n, user_n) = (normal(cfg.day_sd)?, normal(cfg.user_sd)?);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let day_eff: Vec<f64> = (0..cfg.days)
        .map(|d| {
            let season = cfg.seasonal_amplitude * (2.0 * std::f64::consts::PI * d as f64 / 365.0).sin();
            season + day_n.sample(&mut rng)
        })
        .collect();
    let user_eff: Vec<f64> = (0..cfg.users).map(|_| user_n.sample(&mut rng)).collect();
    let series: &[Series] = if cfg.togetherness { &[Series::HeShe, Series::Togetherness] } else { &[Series::HeShe] };
    let mut out = Vec::with_capacity(series.len() * 2 * cfg.days as usize * cfg.per_day);
    for &s in series {
        for year2 in [0u8, 1] {
            for d in 0..cfg.days {
                for k in 0..cfg.per_day {
                    let u = rng.random_range(0..cfg.users);
                    let after = u8::from(year2 == 1 && d >= cfg.event_day);
                    let shift = if s == Series::HeShe { cfg.effect * f64::from(after) } else { 0.0 };
                    let p = (cfg.base + day_eff[d as usize] + user_eff[u] + shift).clamp(0.01, 0.99);
                    let y = rng.random_bool(p);
                    out.push(PanelObservation {
                        id: format!("{}-{year2}-{d}-{k}", s.as_str()),
                        user: Some(format!("u{u:05}")),
                        series: s,
                        day_index: d,
                        year2,
                        after,
                        follow_norms: f64::from(u8::from(y)),
                        gendered_language: p,
                        she_count: f64::from(u8::from(rng.random_bool(cfg.she_share))),
                    });
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize, MaskTable};

    fn small(signal: Signal) -> CorpusSynthConfig {
        CorpusSynthConfig { messages: 4000, signal, seed: 7, ..Default::default() }
    }

    #[test]
    fn every_message_has_one_target_and_valid_length() {
        let cfg = small(Signal::Lexical);
        for m in generate_messages(&cfg).unwrap() {
            let toks = tokenize(&m.text);
            let hits = toks.iter().filter(|t| *t == "han" || *t == "hon").count();
            assert_eq!(hits, 1, "{}", m.text);
            assert!((cfg.min_words..=cfg.max_words).contains(&toks.len()));
        }
    }

    #[test]
    fn imbalance_is_close_to_target() {
        let msgs = generate_messages(&CorpusSynthConfig { messages: 20_000, ..Default::default() }).unwrap();
        let she = msgs.iter().filter(|m| tokenize(&m.text).contains(&"hon".to_string())).count();
        assert!((she as f64 / 20_000.0 - 0.255).abs() < 0.01);
    }

    #[test]
    fn planted_tokens_carry_the_log_odds() {
        let cfg = CorpusSynthConfig { messages: 30_000, ..Default::default() };
        let msgs = generate_messages(&cfg).unwrap();
        let (fem, _) = planted_tokens(&cfg);
        let (mut c1, mut c0, mut n1, mut n0) = (0.0, 0.0, 0.0, 0.0);
        for m in &msgs {
            let toks = tokenize(&m.text);
            let she = toks.contains(&"hon".to_string());
            let k = toks.iter().filter(|t| fem.contains(t)).count() as f64;
            let len = toks.len() as f64;
            if she {
                c1 += k;
                n1 += len;
            } else {
                c0 += k;
                n0 += len;
            }
        }
        let lr = ((c1 / n1) / (c0 / n0)).ln();
        assert!((lr - 1.5).abs() < 0.15, "{lr}");
    }

    #[test]
    fn order_variant_has_no_unigram_signal() {
        let cfg = CorpusSynthConfig { messages: 20_000, signal: Signal::Order, ..Default::default() };
        let msgs = generate_messages(&cfg).unwrap();
        let (a, _) = &order_pairs(&cfg)[0];
        let rate = |label: &str| {
            let sel: Vec<_> = msgs.iter().map(|m| tokenize(&m.text)).filter(|t| t.contains(&label.to_string())).collect();
            sel.iter().filter(|t| t.contains(a)).count() as f64 / sel.len() as f64
        };
        assert!((rate("hon") - rate("han")).abs() < 0.02);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = small(Signal::Order);
        assert_eq!(generate_messages(&cfg).unwrap(), generate_messages(&cfg).unwrap());
    }

    #[test]
    fn mask_files_load() {
        let dir = tempfile::tempdir().unwrap();
        write_mask_files(dir.path()).unwrap();
        let t = MaskTable::from_dir(dir.path()).unwrap();
        assert_eq!(t.lookup("mamma"), Some("mammapappa"));
        assert!(t.lookup("anna").is_some());
    }

    #[test]
    fn panel_has_both_years_and_the_event() {
        let cfg = PanelSynthConfig { per_day: 5, users: 100, togetherness: true, ..Default::default() };
        let p = generate_panel(&cfg).unwrap();
        assert_eq!(p.len(), 2 * 2 * 365 * 5);
        assert!(p.iter().all(|o| o.after == 0 || (o.year2 == 1 && o.day_index >= 169)));
    }
}
