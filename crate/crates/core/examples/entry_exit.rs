//! Daily entry and exit rates of users, standardized over days, to spot a
//! wave of accounts leaving.
//!
//!     cargo run --example entry_exit

use chrono::{Duration, TimeZone, Utc};
use normlens::corpus::RawMessage;
use normlens::econometrics::entry_exit_rates;

fn main() {
    let t0 = Utc.with_ymd_and_hms(2017, 10, 1, 9, 0, 0).unwrap();
    let mut msgs = Vec::new();
    for u in 0..200 {
        // a quarter of the users go quiet after day 12
        let last = if u % 4 == 0 { 12 } else { 29 };
        for d in 0..=last {
            for _ in 0..if d == 29 { 10 } else { 1 } {
                msgs.push(RawMessage {
                    id: format!("{u}-{d}"),
                    user: Some(format!("u{u}")),
                    ts: t0 + Duration::days(d),
                    text: String::new(),
                    retweet: false,
                });
            }
        }
    }
    let rates = entry_exit_rates(&msgs);
    println!("{:<12}{:>9}{:>7}{:>10}{:>8}", "day", "messages", "exits", "exit rate", "z");
    for r in &rates {
        println!("{:<12}{:>9}{:>7}{:>10.4}{:>8.2}", r.day, r.messages, r.exits, r.exit_rate, r.exit_z);
    }
}
