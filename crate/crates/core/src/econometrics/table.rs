use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use super::design::FixedEffects;
use super::RegressionResult;
use crate::error::{Error, Result};

fn thousands(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, c) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push(' ');
        }
        out.push(c);
    }
    out
}

fn pretty(name: &str) -> String {
    name.replace("After", "After Metoo").replace("Before", "Before Metoo")
}

/// Side-by-side regression table: coefficients with stars, standard
/// errors in parentheses, then the specification footer.
pub fn format_regression_table(title: &str, results: &[RegressionResult]) -> String {
    let mut names: Vec<&str> = Vec::new();
    for r in results {
        for n in &r.names {
            if !names.contains(&n.as_str()) {
                names.push(n);
            }
        }
    }
    let lw = names.iter().map(|n| pretty(n).len()).max().unwrap_or(0).max(12) + 2;
    let widest = results
        .iter()
        .flat_map(|r| [r.spec.len(), r.vcov_label.len(), r.data.len(), r.outcome.label().len() + 10])
        .max()
        .unwrap_or(0);
    let cw = (widest + 2).max(20);
    let rule = "=".repeat(lw + cw * results.len());
    let mut s = String::new();
    let row = |s: &mut String, label: &str, cells: Vec<String>| {
        let _ = write!(s, "{label:<lw$}");
        for c in cells {
            let _ = write!(s, "{c:>cw$}");
        }
        let _ = writeln!(s);
    };
    let _ = writeln!(s, "{title}");
    let _ = writeln!(s, "{rule}");
    row(&mut s, "", (1..=results.len()).map(|i| format!("({i})")).collect());
    row(&mut s, "Specification", results.iter().map(|r| r.spec.clone()).collect());
    row(
        &mut s,
        "Dep Var",
        results
            .iter()
            .map(|r| {
                if r.scale == 1.0 {
                    r.outcome.label().to_string()
                } else {
                    format!("{} * {}", r.outcome.label(), r.scale)
                }
            })
            .collect(),
    );
    let _ = writeln!(s, "{}", "-".repeat(rule.len()));
    for n in &names {
        let mut coefs = Vec::new();
        let mut ses = Vec::new();
        for r in results {
            match r.names.iter().position(|m| m == n) {
                Some(j) => {
                    coefs.push(format!("{:.3}{}", r.coef[j], r.stars[j]));
                    ses.push(format!("({:.3})", r.se[j]));
                }
                None => {
                    coefs.push(String::new());
                    ses.push(String::new());
                }
            }
        }
        row(&mut s, &pretty(n), coefs);
        row(&mut s, "", ses);
    }
    let _ = writeln!(s);
    let yn = |b: bool| if b { "Yes" } else { "No" }.to_string();
    row(&mut s, "Time FE", results.iter().map(|r| yn(r.fe.has_day())).collect());
    row(&mut s, "User FE", results.iter().map(|r| yn(r.fe.has_user())).collect());
    row(&mut s, "SEs", results.iter().map(|r| r.vcov_label.clone()).collect());
    row(&mut s, "Tweets", results.iter().map(|r| thousands(r.tweets)).collect());
    row(&mut s, "Days (T)", results.iter().map(|r| thousands(r.days)).collect());
    row(&mut s, "Users (N)", results.iter().map(|r| thousands(r.users)).collect());
    if results.iter().any(|r| r.fe == FixedEffects::DayUser || r.users_year1 > 0) {
        row(&mut s, "...in year 2", results.iter().map(|r| thousands(r.users_year2)).collect());
        row(&mut s, "...in year 1", results.iter().map(|r| thousands(r.users_year1)).collect());
    }
    row(&mut s, "R2", results.iter().map(|r| format!("{:.4}", r.r2)).collect());
    row(&mut s, "Data", results.iter().map(|r| r.data.clone()).collect());
    if results.iter().any(|r| r.aggregated) {
        row(&mut s, "Daily rows", results.iter().map(|r| if r.aggregated { thousands(r.rows) } else { String::new() }).collect());
    }
    let _ = writeln!(s, "{rule}");
    let _ = writeln!(s, "*** p<0.01, ** p<0.05, * p<0.1");
    for (i, r) in results.iter().enumerate() {
        for n in &r.notes {
            let _ = writeln!(s, "({}) {n}", i + 1);
        }
    }
    s
}

pub fn write_coefficients_csv(path: &Path, results: &[RegressionResult]) -> Result<()> {
    let err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["spec", "outcome", "term", "coef", "se", "t", "p", "stars", "vcov", "n"]).map_err(err)?;
    for r in results {
        for j in 0..r.names.len() {
            w.write_record([
                r.spec.clone(),
                r.outcome.to_string(),
                r.names[j].clone(),
                r.coef[j].to_string(),
                r.se[j].to_string(),
                r.t[j].to_string(),
                r.p[j].to_string(),
                r.stars[j].clone(),
                r.vcov_label.clone(),
                r.tweets.to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Full result, variance matrix included.
pub fn write_result_json(path: &Path, results: &[RegressionResult]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(f), results)?;
    Ok(())
}

pub fn read_result_json(path: &Path) -> Result<Vec<RegressionResult>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econometrics::{Outcome, VcovKind};
    use std::collections::BTreeMap;

    fn result() -> RegressionResult {
        RegressionResult {
            spec: "baseline".into(),
            outcome: Outcome::FollowNorms,
            names: vec!["Year2".into(), "After".into()],
            coef: vec![0.01, -0.015],
            se: vec![0.004, 0.005],
            t: vec![2.5, -3.0],
            p: vec![0.02, 0.003],
            stars: vec!["**".into(), "***".into()],
            vcov: vec![vec![1.6e-5, 0.0], vec![0.0, 2.5e-5]],
            vcov_kind: VcovKind::Cluster,
            vcov_label: "Clustered on day".into(),
            clusters: BTreeMap::from([("day".to_string(), 365)]),
            df: 364.0,
            rows: 1_192_719,
            tweets: 1_192_719,
            days: 365,
            users: 114_040,
            users_year2: 0,
            users_year1: 0,
            r2: 0.001,
            scale: 1.0,
            fe: FixedEffects::Day,
            data: "Year2/1".into(),
            aggregated: false,
            vcov_repaired: false,
            notes: vec![],
        }
    }

    #[test]
    fn table_layout() {
        let t = format_regression_table("Event results", &[result()]);
        assert!(t.contains("After Metoo"));
        assert!(t.contains("-0.015***"));
        assert!(t.contains("(0.005)"));
        assert!(t.contains("1 192 719"));
        assert!(t.contains("Clustered on day"));
    }

    #[test]
    fn long_labels_keep_columns_apart() {
        let mut a = result();
        a.spec = "placebo_togetherness".into();
        a.vcov_label = "Clustered on day & user".into();
        let t = format_regression_table("t", &[a.clone(), a]);
        assert!(!t.contains("togethernessplacebo"), "{t}");
        assert!(!t.contains("userClustered"), "{t}");
    }

    #[test]
    fn json_sidecar_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        write_result_json(&p, &[result()]).unwrap();
        assert_eq!(read_result_json(&p).unwrap(), vec![result()]);
        let c = dir.path().join("r.csv");
        write_coefficients_csv(&c, &[result()]).unwrap();
        let text = std::fs::read_to_string(&c).unwrap();
        assert!(text.contains("baseline,follow_norms,After,-0.015,0.005,-3,0.003,***"));
    }
}
