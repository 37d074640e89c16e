//! Tokenize raw messages, censor the target pair, mask obvious gendered
//! words and names, filter by length and split.
//!
//!     cargo run --example ingest_messages

use chrono::{TimeZone, Utc};
use normlens::corpus::{ingest, tokenize, IngestConfig, MaskTable, RawMessage, TargetPair};

fn main() -> normlens::Result<()> {
    let text = "@anna Hon sa att mamma kommer hem ikväll :) #fredag https://t.co/x hon är bäst!!";
    println!("tokens: {:?}\n", tokenize(text));

    let mask = MaskTable::from_sources("mamma,pappa,mammapappa\n", "andersson\n", "anna\nerik\n", "")?;
    let bodies = [
        "han gick till affären och köpte mjölk och bröd till hela familjen idag",
        "hon läste en bok om rymden hela kvällen och somnade sent till slut",
        "mamma sa att hon skulle ringa erik i morgon bitti innan jobbet börjar",
        "han och hon gick dit",
        "han tränade fotboll med laget i regnet hela eftermiddagen utan paus alls",
        "vi vet inte riktigt vad hon tycker om den nya filmen som kom ut nyss",
        "igår spelade han gitarr på festen tills grannarna klagade på ljudet ute",
    ];
    let messages: Vec<RawMessage> = bodies
        .iter()
        .enumerate()
        .map(|(i, b)| RawMessage {
            id: format!("m{i}"),
            user: Some(format!("u{}", i % 3)),
            ts: Utc.with_ymd_and_hms(2017, 9, 1 + i as u32, 12, 0, 0).unwrap(),
            text: b.to_string(),
            retweet: false,
        })
        .collect();

    let mut cfg = IngestConfig::new(TargetPair::parse("han,hon")?, 7);
    cfg.mask = Some(mask);
    let out = ingest(messages, &cfg)?;
    println!("{:#?}\n", out.stats);
    for r in out.all_records() {
        println!("{:<10} label {} {}", r.group.as_str(), r.label, r.tokens.join(" "));
    }
    Ok(())
}
