use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{DiffBin, MetricReport, PredictionRecord, SampleKind, WordColor};
use crate::error::{Error, Result};

/// One JSON object per line.
pub fn write_predictions(path: &Path, preds: &[PredictionRecord]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for p in preds {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let p = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(p);
    }
    Ok(out)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

pub fn write_metrics_csv(path: &Path, reports: &[MetricReport]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e| csv_err(path, e);
    w.write_record([
        "sample",
        "n",
        "roc_auc",
        "accuracy",
        "sensitivity",
        "specificity",
        "threshold",
        "objective",
    ])
    .map_err(err)?;
    for r in reports {
        let sample = match r.sample {
            SampleKind::Unbalanced => "unbalanced",
            SampleKind::Balanced => "balanced",
        };
        w.write_record([
            sample.to_string(),
            r.n.to_string(),
            r.roc_auc.to_string(),
            r.accuracy.to_string(),
            r.sensitivity.to_string(),
            r.specificity.to_string(),
            r.threshold.to_string(),
            r.objective.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_word_color_csv(path: &Path, colors: &[WordColor]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e| csv_err(path, e);
    w.write_record(["token", "word_color", "count"]).map_err(err)?;
    for c in colors {
        w.write_record([c.token.clone(), c.wc.to_string(), c.count.to_string()])
            .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_word_color_csv(path: &Path) -> Result<Vec<WordColor>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(f);
    let mut out = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let bad = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            msg,
        };
        if row.len() != 3 {
            return Err(bad(format!("expected 3 fields, got {}", row.len())));
        }
        out.push(WordColor {
            token: row[0].to_string(),
            wc: row[1].parse().map_err(|e| bad(format!("word_color: {e}")))?,
            count: row[2].parse().map_err(|e| bad(format!("count: {e}")))?,
        });
    }
    Ok(out)
}

pub fn write_diff_csv(path: &Path, bins: &[DiffBin]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e| csv_err(path, e);
    w.write_record([
        "bin_lower", "bin_upper", "token", "diff", "acc_a", "acc_b", "count_a", "count_b",
    ])
    .map_err(err)?;
    for b in bins {
        for t in &b.tokens {
            w.write_record([
                format!("{:.3}", b.lower),
                format!("{:.3}", b.upper),
                t.token.clone(),
                t.diff.to_string(),
                t.acc_a.to_string(),
                t.acc_b.to_string(),
                t.count_a.to_string(),
                t.count_b.to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Plain-text table with one column per sample, rows ROC AUC, accuracy,
/// sensitivity, specificity, threshold and N.
pub fn format_metric_table(title: &str, reports: &[MetricReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{title}");
    let head: Vec<String> = reports
        .iter()
        .map(|r| match r.sample {
            SampleKind::Unbalanced => "Unbalanced".to_string(),
            SampleKind::Balanced => "Balanced".to_string(),
        })
        .collect();
    let rule = "-".repeat(14 + 12 * reports.len());
    let _ = writeln!(s, "{rule}");
    let _ = write!(s, "{:<14}", "");
    for h in &head {
        let _ = write!(s, "{h:>12}");
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "{rule}");
    let rows: [(&str, fn(&MetricReport) -> String); 6] = [
        ("ROC AUC", |r| format!("{:.4}", r.roc_auc)),
        ("Accuracy", |r| format!("{:.4}", r.accuracy)),
        ("Sensitivity", |r| format!("{:.4}", r.sensitivity)),
        ("Specificity", |r| format!("{:.4}", r.specificity)),
        ("Threshold", |r| format!("{:.4}", r.threshold)),
        ("N", |r| r.n.to_string()),
    ];
    for (name, f) in rows {
        let _ = write!(s, "{name:<14}");
        for r in reports {
            let _ = write!(s, "{:>12}", f(r));
        }
        let _ = writeln!(s);
    }
    let _ = writeln!(s, "{rule}");
    for r in reports {
        if let Some(n) = &r.note {
            let _ = writeln!(s, "note: {n}");
        }
    }
    s
}
