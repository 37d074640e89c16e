use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::corpus::RawMessage;
use crate::math::{mean, sample_sd};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryExit {
    pub day: NaiveDate,
    pub messages: usize,
    /// Users whose first message falls on this day.
    pub entries: usize,
    /// Users whose last message falls on this day.
    pub exits: usize,
    pub entry_rate: f64,
    pub exit_rate: f64,
    /// Rates standardized to mean 0 and sample sd 1 over days.
    pub entry_z: f64,
    pub exit_z: f64,
}

fn standardize(v: &[f64]) -> Vec<f64> {
    let m = mean(v).unwrap_or(0.0);
    match sample_sd(v) {
        Some(s) if s > 0.0 => v.iter().map(|x| (x - m) / s).collect(),
        _ => vec![0.0; v.len()],
    }
}

/// Daily entry and exit rates: first and last messages of users over all
/// messages of the day. Messages without a user count towards the daily
/// total only.
pub fn entry_exit_rates(messages: &[RawMessage]) -> Vec<EntryExit> {
    let mut span: BTreeMap<&str, (NaiveDate, NaiveDate)> = BTreeMap::new();
    let mut totals: BTreeMap<NaiveDate, usize> = BTreeMap::new();
    for m in messages {
        let day = m.ts.date_naive();
        *totals.entry(day).or_default() += 1;
        if let Some(u) = &m.user {
            let e = span.entry(u.as_str()).or_insert((day, day));
            e.0 = e.0.min(day);
            e.1 = e.1.max(day);
        }
    }
    let mut entries: BTreeMap<NaiveDate, usize> = BTreeMap::new();
    let mut exits: BTreeMap<NaiveDate, usize> = BTreeMap::new();
    for (first, last) in span.values() {
        *entries.entry(*first).or_default() += 1;
        *exits.entry(*last).or_default() += 1;
    }
    let days: Vec<(NaiveDate, usize)> = totals.into_iter().collect();
    let rate = |m: &BTreeMap<NaiveDate, usize>| -> Vec<f64> {
        days.iter().map(|(d, n)| *m.get(d).unwrap_or(&0) as f64 / *n as f64).collect()
    };
    let (er, xr) = (rate(&entries), rate(&exits));
    let (ez, xz) = (standardize(&er), standardize(&xr));
    days.iter()
        .enumerate()
        .map(|(i, (d, n))| EntryExit {
            day: *d,
            messages: *n,
            entries: *entries.get(d).unwrap_or(&0),
            exits: *exits.get(d).unwrap_or(&0),
            entry_rate: er[i],
            exit_rate: xr[i],
            entry_z: ez[i],
            exit_z: xz[i],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone, Utc};

    fn msg(user: &str, day: i64) -> RawMessage {
        RawMessage {
            id: String::new(),
            user: Some(user.into()),
            ts: Utc.with_ymd_and_hms(2017, 5, 1, 12, 0, 0).unwrap() + Duration::days(day),
            text: String::new(),
            retweet: false,
        }
    }

    #[test]
    fn single_message_users_give_unit_rates() {
        let m: Vec<_> = (0..6).map(|i| msg(&format!("u{i}"), i / 2)).collect();
        let r = entry_exit_rates(&m);
        assert_eq!(r.len(), 3);
        assert!(r.iter().all(|d| d.entry_rate == 1.0 && d.exit_rate == 1.0));
        assert!(r.iter().all(|d| d.entry_z == 0.0));
    }

    #[test]
    fn standardized_series_has_zero_mean() {
        let mut m = Vec::new();
        for d in 0..20 {
            for u in 0..(3 + d % 4) {
                m.push(msg(&format!("u{}", (u * 7 + d) % 13), d));
            }
        }
        let r = entry_exit_rates(&m);
        let me: f64 = r.iter().map(|d| d.entry_z).sum::<f64>() / r.len() as f64;
        let mx: f64 = r.iter().map(|d| d.exit_z).sum::<f64>() / r.len() as f64;
        assert!(me.abs() < 1e-12 && mx.abs() < 1e-12);
    }

    #[test]
    fn planted_mass_exit_is_the_peak() {
        // 300 users active from day 0; 150 leave after day 10, a few leave
        // every other day, and the final day is busy enough to dilute the
        // censoring exits
        let mut m = Vec::new();
        for u in 0..300 {
            let last = match u {
                0..150 => 10,
                150..180 => 12 + (u - 150) / 2,
                _ => 29,
            };
            for d in 0..=last {
                let n = if d == 29 { 20 } else { 1 };
                for _ in 0..n {
                    m.push(msg(&format!("u{u}"), d));
                }
            }
        }
        let r = entry_exit_rates(&m);
        let peak = r.iter().max_by(|a, b| a.exit_z.total_cmp(&b.exit_z)).unwrap();
        assert_eq!(peak.day, (Utc.with_ymd_and_hms(2017, 5, 11, 0, 0, 0).unwrap()).date_naive());
    }
}
