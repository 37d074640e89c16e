use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::design::{absorb, build_design, FeMethod, FixedEffects, SpecDef};
use super::ols::{ols, OlsFit};
use super::vcov::{
    cluster_count, std_errors, vcov_cluster, vcov_hc1, vcov_newey_west, vcov_ols, vcov_twoway_unrepaired, psd_repair, VcovKind,
};
use super::{Outcome, PanelObservation, Series};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterDim {
    Day,
    User,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "arg")]
pub enum VcovChoice {
    Ols,
    Hc1,
    Cluster(ClusterDim),
    /// Day and user.
    TwoWay,
    NeweyWest(usize),
}

impl FromStr for VcovChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Ok(match s.as_str() {
            "ols" | "classical" => VcovChoice::Ols,
            "hc1" | "robust" => VcovChoice::Hc1,
            "cluster:day" => VcovChoice::Cluster(ClusterDim::Day),
            "cluster:user" => VcovChoice::Cluster(ClusterDim::User),
            "cluster:day,user" | "cluster:user,day" | "twoway" => VcovChoice::TwoWay,
            _ => match s.strip_prefix("newey-west:").or_else(|| s.strip_prefix("nw:")) {
                Some(l) => VcovChoice::NeweyWest(
                    l.parse().map_err(|_| Error::Config(format!("bad Newey-West lag in `{s}`")))?,
                ),
                None if s == "newey-west" => VcovChoice::NeweyWest(4),
                None => return Err(Error::Config(format!("unknown variance estimator `{s}`"))),
            },
        })
    }
}

impl fmt::Display for VcovChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VcovChoice::Ols => f.write_str("ols"),
            VcovChoice::Hc1 => f.write_str("robust"),
            VcovChoice::Cluster(ClusterDim::Day) => f.write_str("cluster:day"),
            VcovChoice::Cluster(ClusterDim::User) => f.write_str("cluster:user"),
            VcovChoice::TwoWay => f.write_str("cluster:day,user"),
            VcovChoice::NeweyWest(l) => write!(f, "newey-west:{l}"),
        }
    }
}

impl VcovChoice {
    fn label(&self) -> String {
        match self {
            VcovChoice::Ols => "Classical".into(),
            VcovChoice::Hc1 => "Robust".into(),
            VcovChoice::Cluster(ClusterDim::Day) => "Clustered on day".into(),
            VcovChoice::Cluster(ClusterDim::User) => "Clustered on user".into(),
            VcovChoice::TwoWay => "Clustered on day & user".into(),
            VcovChoice::NeweyWest(l) => format!("Newey-West, lag {l}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub outcome: Outcome,
    pub vcov: VcovChoice,
    /// Multiplies the outcome; 100 reports percentage points.
    pub scale: f64,
    /// Keep only messages whose true class is this value.
    pub subset: Option<u8>,
    /// Year-1 sampling probability; Year-1 messages get weight `1/p`.
    pub year1_inclusion: Option<f64>,
    pub fe_method: FeMethod,
    /// Regress daily cell means instead of messages.
    pub aggregate: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            outcome: Outcome::FollowNorms,
            vcov: VcovChoice::Cluster(ClusterDim::Day),
            scale: 1.0,
            subset: None,
            year1_inclusion: None,
            fe_method: FeMethod::Within,
            aggregate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub spec: String,
    pub outcome: Outcome,
    pub names: Vec<String>,
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub stars: Vec<String>,
    pub vcov: Vec<Vec<f64>>,
    pub vcov_kind: VcovKind,
    pub vcov_label: String,
    /// Cluster counts per clustering dimension.
    pub clusters: BTreeMap<String, usize>,
    /// Degrees of freedom of the reference t distribution.
    pub df: f64,
    /// Regression rows (messages, or days when aggregated).
    pub rows: usize,
    pub tweets: usize,
    pub days: usize,
    pub users: usize,
    pub users_year2: usize,
    pub users_year1: usize,
    /// Within R^2 when fixed effects are absorbed.
    pub r2: f64,
    pub scale: f64,
    pub fe: FixedEffects,
    pub data: String,
    pub aggregated: bool,
    pub vcov_repaired: bool,
    pub notes: Vec<String>,
}

impl RegressionResult {
    pub fn coef_of(&self, name: &str) -> Option<(f64, f64)> {
        let j = self.names.iter().position(|n| n == name)?;
        Some((self.coef[j], self.se[j]))
    }
}

/// `***` below 0.01, `**` below 0.05, `*` below 0.1.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

fn two_sided_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return if t.is_nan() { f64::NAN } else { 0.0 };
    }
    match StudentsT::new(0.0, 1.0, df.max(1.0)) {
        Ok(d) => 2.0 * d.sf(t.abs()),
        Err(_) => f64::NAN,
    }
}

/// Daily mean of one outcome for one `(day, year, series)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCell {
    pub day_index: i64,
    pub year2: u8,
    pub series: Series,
    pub after: u8,
    pub mean: f64,
    /// Summed observation weight.
    pub weight: f64,
    pub count: usize,
}

/// Per-cell (weighted) means, ordered by day, year and series.
pub fn aggregate_daily(obs: &[&PanelObservation], outcome: Outcome, weights: Option<&[f64]>) -> Vec<AggregateCell> {
    let mut cells: BTreeMap<(i64, u8, Series), AggregateCell> = BTreeMap::new();
    for (i, o) in obs.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        let c = cells.entry((o.day_index, o.year2, o.series)).or_insert(AggregateCell {
            day_index: o.day_index,
            year2: o.year2,
            series: o.series,
            after: o.after,
            mean: 0.0,
            weight: 0.0,
            count: 0,
        });
        c.mean += w * outcome.value(o);
        c.weight += w;
        c.count += 1;
    }
    cells
        .into_values()
        .map(|mut c| {
            c.mean /= c.weight;
            c
        })
        .collect()
}

struct Counts {
    tweets: usize,
    days: usize,
    users: usize,
    users_year2: usize,
    users_year1: usize,
}

fn counts(sel: &[&PanelObservation]) -> Counts {
    let users = |pred: &dyn Fn(&PanelObservation) -> bool| {
        sel.iter()
            .filter(|o| pred(o))
            .filter_map(|o| o.user.as_deref().map(|u| (o.series, u)))
            .collect::<BTreeSet<_>>()
            .len()
    };
    Counts {
        tweets: sel.len(),
        days: sel.iter().map(|o| o.day_index).collect::<BTreeSet<_>>().len(),
        users: users(&|_| true),
        users_year2: users(&|o| o.year2 == 1),
        users_year1: users(&|o| o.year2 == 0),
    }
}

fn within_r2(y: &DVector<f64>, resid: &DVector<f64>, w: Option<&[f64]>) -> f64 {
    let wt = |i: usize| w.map_or(1.0, |w| w[i]);
    let sw: f64 = (0..y.len()).map(wt).sum();
    let ybar = (0..y.len()).map(|i| wt(i) * y[i]).sum::<f64>() / sw;
    let sst: f64 = (0..y.len()).map(|i| wt(i) * (y[i] - ybar).powi(2)).sum();
    let ssr: f64 = (0..y.len()).map(|i| wt(i) * resid[i].powi(2)).sum();
    if sst > 0.0 {
        1.0 - ssr / sst
    } else {
        0.0
    }
}

/// Estimate one specification end to end.
pub fn estimate_spec(spec: &SpecDef, data: &[PanelObservation], opts: &EstimateOptions) -> Result<RegressionResult> {
    if !(opts.scale.is_finite() && opts.scale != 0.0) {
        return Err(Error::Config("outcome scale must be finite and non-zero".into()));
    }
    let mut sel = spec.select(data)?;
    if let Some(class) = opts.subset {
        sel.retain(|o| o.she_count == f64::from(class));
        if sel.is_empty() {
            return Err(Error::invalid(format!("no observations with class {class}")));
        }
    }
    let weights = match opts.year1_inclusion {
        None => None,
        Some(p) if p > 0.0 && p <= 1.0 => Some(sel.iter().map(|o| if o.year2 == 0 { 1.0 / p } else { 1.0 }).collect()),
        Some(p) => return Err(Error::Config(format!("inclusion probability {p} outside (0, 1]"))),
    };
    let c = counts(&sel);
    let mut notes = Vec::new();
    if opts.year1_inclusion.is_some() {
        notes.push("Year-1 messages reweighted by inverse inclusion probability".to_string());
    }

    let (fit, terms, y_within, ids) = if opts.aggregate {
        let (fit, y) = aggregate_fit(spec, &sel, opts, weights.as_deref(), &mut notes)?;
        let k = fit.x.ncols();
        (fit, 0..k, y, None)
    } else {
        if matches!(opts.vcov, VcovChoice::NeweyWest(_)) {
            return Err(Error::Config("Newey-West standard errors need the aggregated daily series".into()));
        }
        let d = build_design(spec, &sel, opts.outcome, opts.scale, weights)?;
        let a = absorb(&d, opts.fe_method)?;
        let mut fit = ols(a.x, &a.y, d.weights.as_deref(), &a.names, a.ref_norms.as_deref())?;
        fit.absorbed = a.absorbed;
        (fit, a.terms, a.y_within, Some((d.day, d.user)))
    };

    let mut clusters = BTreeMap::new();
    let mut repaired = false;
    let (full, kind, df) = match (opts.vcov, &ids) {
        (VcovChoice::Ols, _) => (vcov_ols(&fit)?, VcovKind::Ols, fit.df_resid() as f64),
        (VcovChoice::Hc1, _) => (vcov_hc1(&fit)?, VcovKind::Hc1, fit.df_resid() as f64),
        (VcovChoice::NeweyWest(lag), _) => (vcov_newey_west(&fit, lag)?, VcovKind::NeweyWest, fit.df_resid() as f64),
        (VcovChoice::Cluster(dim), Some((day, user))) => {
            let (v, g) = match dim {
                ClusterDim::Day => (vcov_cluster(&fit, day)?, cluster_count(day)),
                ClusterDim::User => {
                    require_users(&sel)?;
                    (vcov_cluster(&fit, user)?, cluster_count(user))
                }
            };
            clusters.insert(format!("{dim:?}").to_lowercase(), g);
            (v, VcovKind::Cluster, (g - 1) as f64)
        }
        (VcovChoice::TwoWay, Some((day, user))) => {
            require_users(&sel)?;
            let v = vcov_twoway_unrepaired(&fit, day, user)?;
            let (gd, gu) = (cluster_count(day), cluster_count(user));
            clusters.insert("day".into(), gd);
            clusters.insert("user".into(), gu);
            (v, VcovKind::TwoWayCluster, (gd.min(gu) - 1) as f64)
        }
        (_, None) => {
            return Err(Error::Config(format!(
                "variance estimator `{}` is not available for aggregated regressions",
                opts.vcov
            )))
        }
    };
    let mut v: DMatrix<f64> = full.view((terms.start, terms.start), (terms.len(), terms.len())).into_owned();
    if opts.vcov == VcovChoice::TwoWay {
        // only the reported block is repaired, so both fixed-effect methods agree
        let (r, changed) = psd_repair(v);
        v = r;
        repaired = changed;
        if changed {
            notes.push("two-way variance was indefinite; negative eigenvalues set to zero".into());
        }
    }
    let se = std_errors(&v);
    let coef: Vec<f64> = terms.clone().map(|j| fit.coef[j]).collect();
    let t: Vec<f64> = coef.iter().zip(&se).map(|(b, s)| b / s).collect();
    let p: Vec<f64> = t.iter().map(|&t| two_sided_p(t, df)).collect();
    Ok(RegressionResult {
        spec: spec.name.clone(),
        outcome: opts.outcome,
        names: fit.names[terms.clone()].to_vec(),
        stars: p.iter().map(|&p| stars(p).to_string()).collect(),
        coef,
        se,
        t,
        p,
        vcov: (0..v.nrows()).map(|i| v.row(i).iter().copied().collect()).collect(),
        vcov_kind: kind,
        vcov_label: opts.vcov.label(),
        clusters,
        df,
        rows: fit.n(),
        tweets: c.tweets,
        days: c.days,
        users: c.users,
        users_year2: c.users_year2,
        users_year1: c.users_year1,
        r2: within_r2(&y_within, &fit.resid, fit.weights.as_deref()),
        scale: opts.scale,
        fe: spec.fe,
        data: spec.data_label().to_string(),
        aggregated: opts.aggregate,
        vcov_repaired: repaired,
        notes,
    })
}

fn require_users(sel: &[&PanelObservation]) -> Result<()> {
    if sel.iter().any(|o| o.user.is_none()) {
        return Err(Error::invalid("clustering on users needs a user id on every observation"));
    }
    Ok(())
}

/// Regression on daily cells. With day fixed effects each day must hold
/// exactly two cells; the regression then runs on their difference,
/// weighted by the summed observation count.
fn aggregate_fit(
    spec: &SpecDef,
    sel: &[&PanelObservation],
    opts: &EstimateOptions,
    weights: Option<&[f64]>,
    notes: &mut Vec<String>,
) -> Result<(OlsFit, DVector<f64>)> {
    if spec.fe.has_user() {
        return Err(Error::Config("user fixed effects cannot be combined with daily aggregation".into()));
    }
    let cells = aggregate_daily(sel, opts.outcome, weights);
    let row = |c: &AggregateCell| -> Vec<f64> {
        spec.terms
            .iter()
            .map(|t| t.eval(c.series, c.day_index, c.year2, c.after, spec.placebo_after))
            .collect()
    };
    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    if spec.fe.has_day() {
        let mut by_day: BTreeMap<i64, Vec<&AggregateCell>> = BTreeMap::new();
        for c in &cells {
            by_day.entry(c.day_index).or_default().push(c);
        }
        let mut dropped = Vec::new();
        for (day, mut cs) in by_day {
            match cs.len() {
                2 => {
                    cs.sort_by_key(|c| (c.year2, c.series == Series::HeShe));
                    let (b, a) = (cs[0], cs[1]);
                    xs.push(row(a).iter().zip(row(b)).map(|(p, q)| p - q).collect());
                    ys.push((a.mean - b.mean) * opts.scale);
                    ws.push(a.weight + b.weight);
                }
                1 => dropped.push(day),
                n => {
                    return Err(Error::invalid(format!(
                        "day {day} has {n} comparison cells; differencing needs exactly two"
                    )))
                }
            }
        }
        if !dropped.is_empty() {
            log::warn!("{} days lack a comparison cell and were dropped", dropped.len());
            notes.push(format!("dropped {} days without a comparison cell: {:?}", dropped.len(), dropped));
        }
        notes.push("daily differences weighted by the summed observation count of both cells".into());
    } else {
        for c in &cells {
            xs.push(row(c));
            ys.push(c.mean * opts.scale);
            ws.push(c.weight);
        }
        notes.push("daily means weighted by observation count".into());
    }
    let n = ys.len();
    let k = spec.terms.len();
    let x = DMatrix::from_fn(n, k, |i, j| xs[i][j]);
    let y = DVector::from_vec(ys);
    let fit = ols(x, &y, Some(&ws), &spec.term_names(), None)?;
    Ok((fit, y))
}
