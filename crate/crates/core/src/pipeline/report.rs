use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use super::run::{
    METRICS_JSON, RESULTS_FILE, STAGE_ESTIMATE, STAGE_EVALUATE, STAGE_INGEST, WORD_COLOR_FILE,
};
use crate::corpus::{IngestStats, STATS_FILE};
use crate::econometrics::{format_regression_table, read_result_json};
use crate::error::{Error, Result};
use crate::evaluation::{format_metric_table, read_word_color_csv, MetricReport};

pub const NOTHING_TO_REPORT: &str = "nothing to report";

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub text: String,
    /// Section titles present, in order.
    pub sections: Vec<String>,
    /// Expected outputs that were not found, relative to the run directory.
    pub missing: Vec<String>,
}

impl RunReport {
    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(f))?)
}

fn ingest_section(stats: &IngestStats) -> String {
    let mut s = String::new();
    let rows = [
        ("Input messages", stats.input),
        ("Retweets", stats.retweets),
        ("Dropped by hashtag", stats.hashtag_filtered),
        ("No target word", stats.no_target),
        ("Both target words", stats.both_targets),
        ("Repeated target", stats.repeated_target),
        ("Length filtered", stats.length_filtered),
        ("Kept", stats.kept),
    ];
    for (k, v) in rows {
        let _ = writeln!(s, "{k:<22}{v:>10}");
    }
    s
}

/// Human-readable summary of whatever outputs exist under `run_dir`.
/// Word Color lists show `top` tokens at each end.
pub fn report(run_dir: &Path, top: usize) -> Result<RunReport> {
    let mut text = String::new();
    let mut sections = Vec::new();
    let mut missing = Vec::new();
    let mut section = |title: &str, body: String, text: &mut String| {
        let _ = writeln!(text, "== {title} ==\n");
        text.push_str(&body);
        text.push('\n');
        sections.push(title.to_string());
    };

    let p = run_dir.join(STAGE_INGEST).join(STATS_FILE);
    if p.exists() {
        section("Corpus", ingest_section(&read_json(&p)?), &mut text);
    } else {
        missing.push(format!("{STAGE_INGEST}/{STATS_FILE}"));
    }

    let p = run_dir.join(STAGE_EVALUATE).join(METRICS_JSON);
    if p.exists() {
        let reports: Vec<MetricReport> = read_json(&p)?;
        section("Model evaluation", format_metric_table("Model evaluation on test set", &reports), &mut text);
    } else {
        missing.push(format!("{STAGE_EVALUATE}/{METRICS_JSON}"));
    }

    let p = run_dir.join(STAGE_EVALUATE).join(WORD_COLOR_FILE);
    if p.exists() {
        let wc = read_word_color_csv(&p)?;
        let mut body = String::new();
        let _ = writeln!(body, "Highest (class 1):");
        for w in wc.iter().take(top) {
            let _ = writeln!(body, "  {:<20}{:>8.4}{:>8}", w.token, w.wc, w.count);
        }
        let _ = writeln!(body, "Lowest (class 0):");
        for w in wc.iter().rev().take(top) {
            let _ = writeln!(body, "  {:<20}{:>8.4}{:>8}", w.token, w.wc, w.count);
        }
        section("Word color", body, &mut text);
    } else {
        missing.push(format!("{STAGE_EVALUATE}/{WORD_COLOR_FILE}"));
    }

    let p = run_dir.join(STAGE_ESTIMATE).join(RESULTS_FILE);
    if p.exists() {
        let results = read_result_json(&p)?;
        section("Regressions", format_regression_table("Event-study regressions", &results), &mut text);
    } else {
        missing.push(format!("{STAGE_ESTIMATE}/{RESULTS_FILE}"));
    }

    if sections.is_empty() {
        return Ok(RunReport {
            text: format!("{NOTHING_TO_REPORT}\n"),
            sections,
            missing,
        });
    }
    if !missing.is_empty() {
        let _ = writeln!(text, "Missing outputs:");
        for m in &missing {
            let _ = writeln!(text, "  {m}");
        }
    }
    Ok(RunReport { text, sections, missing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{Objective, SampleKind};
    use std::fs;

    #[test]
    fn empty_directory_has_nothing_to_report() {
        let dir = tempfile::tempdir().unwrap();
        let r = report(dir.path(), 5).unwrap();
        assert!(r.is_empty());
        assert_eq!(r.text.trim(), NOTHING_TO_REPORT);
        assert_eq!(r.missing.len(), 4);
    }

    #[test]
    fn evaluation_only_run_reports_metrics_and_lists_the_rest() {
        let dir = tempfile::tempdir().unwrap();
        let ev = dir.path().join(STAGE_EVALUATE);
        fs::create_dir_all(&ev).unwrap();
        let m = MetricReport {
            sample: SampleKind::Unbalanced,
            n: 100,
            roc_auc: 0.81,
            accuracy: 0.77,
            sensitivity: 0.3,
            specificity: 0.95,
            threshold: 0.5,
            objective: Objective::Accuracy,
            note: None,
        };
        fs::write(ev.join(METRICS_JSON), serde_json::to_string(&vec![m]).unwrap()).unwrap();
        let r = report(dir.path(), 5).unwrap();
        assert_eq!(r.sections, vec!["Model evaluation".to_string()]);
        assert!(r.text.contains("0.8100"));
        assert!(r.text.contains("Missing outputs"));
        assert!(r.missing.contains(&format!("{STAGE_ESTIMATE}/{RESULTS_FILE}")));
    }
}
