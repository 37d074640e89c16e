//! Regression specifications, sample selection and fixed-effect absorption.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Outcome, PanelObservation, Series};
use crate::error::{Error, Result};

/// Binary variable that a term multiplies with a power of `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Indicator {
    Const,
    Year2,
    After,
    /// Year 2 before the event.
    Before,
    HeShe,
}

impl Indicator {
    fn base_name(self) -> &'static str {
        match self {
            Indicator::Const => "Constant",
            Indicator::Year2 => "Year2",
            Indicator::After => "After",
            Indicator::Before => "Before",
            Indicator::HeShe => "HeShe",
        }
    }
}

impl FromStr for Indicator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "const" | "constant" | "1" => Ok(Indicator::Const),
            "year2" => Ok(Indicator::Year2),
            "after" => Ok(Indicator::After),
            "before" => Ok(Indicator::Before),
            "heshe" => Ok(Indicator::HeShe),
            other => Err(Error::invalid(format!("unknown indicator `{other}`"))),
        }
    }
}

/// `indicator * t^power`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub indicator: Indicator,
    pub power: u8,
}

impl Term {
    pub const fn new(indicator: Indicator, power: u8) -> Self {
        Term { indicator, power }
    }

    pub fn name(&self) -> String {
        let t = match self.power {
            0 => String::new(),
            1 => "t".to_string(),
            p => format!("t^{p}"),
        };
        match (self.indicator, self.power) {
            (Indicator::Const, 0) => "Constant".into(),
            (Indicator::Const, _) => t,
            (ind, 0) => ind.base_name().into(),
            (ind, _) => format!("{}*{t}", ind.base_name()),
        }
    }

    /// Value for a message described by its cell attributes.
    pub fn eval(&self, series: Series, day_index: i64, year2: u8, after: u8, placebo_after: bool) -> f64 {
        let after_applies = after == 1 && (series == Series::HeShe || placebo_after);
        let on = match self.indicator {
            Indicator::Const => true,
            Indicator::Year2 => year2 == 1,
            Indicator::After => after_applies,
            Indicator::Before => year2 == 1 && after == 0,
            Indicator::HeShe => series == Series::HeShe,
        };
        if on {
            (day_index as f64).powi(i32::from(self.power))
        } else {
            0.0
        }
    }

    pub fn value(&self, o: &PanelObservation, placebo_after: bool) -> f64 {
        self.eval(o.series, o.day_index, o.year2, o.after, placebo_after)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedEffects {
    None,
    Day,
    User,
    DayUser,
}

impl FixedEffects {
    pub fn has_day(self) -> bool {
        matches!(self, FixedEffects::Day | FixedEffects::DayUser)
    }

    pub fn has_user(self) -> bool {
        matches!(self, FixedEffects::User | FixedEffects::DayUser)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleYears {
    Year2,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesFilter {
    HeShe,
    Togetherness,
    Both,
}

impl SeriesFilter {
    fn admits(self, s: Series) -> bool {
        match self {
            SeriesFilter::HeShe => s == Series::HeShe,
            SeriesFilter::Togetherness => s == Series::Togetherness,
            SeriesFilter::Both => true,
        }
    }
}

/// A named regression specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecDef {
    pub name: String,
    pub terms: Vec<Term>,
    pub fe: FixedEffects,
    pub years: SampleYears,
    pub series: SeriesFilter,
    /// Let `After` switch on for the togetherness series too.
    pub placebo_after: bool,
    /// Keep Year-2 users seen both before and after the event.
    pub restrict_users: bool,
}

const PRESETS: &[&str] = &[
    "raw",
    "raw_cut",
    "baseline",
    "baseline_cut",
    "user_fe",
    "day_user_fe",
    "day_fe",
    "placebo_togetherness",
];

fn trends(ind: &[Indicator]) -> Vec<Term> {
    ind.iter().flat_map(|&i| (0..=2).map(move |p| Term::new(i, p))).collect()
}

impl SpecDef {
    /// Names accepted by [`SpecDef::parse`] besides the `time_trends:` form.
    pub fn presets() -> &'static [&'static str] {
        PRESETS
    }

    /// Parse a preset name or
    /// `time_trends:<ind,...>[;fe=day|user|day,user][;years=2|both][;series=heshe|togetherness|all][;cut][;placebo]`.
    pub fn parse(s: &str) -> Result<Self> {
        use Indicator::*;
        let s = s.trim();
        let spec = |terms: Vec<Term>, fe, years, series, restrict_users| SpecDef {
            name: s.to_string(),
            terms,
            fe,
            years,
            series,
            placebo_after: false,
            restrict_users,
        };
        let t0 = |i: &[Indicator]| i.iter().map(|&i| Term::new(i, 0)).collect::<Vec<_>>();
        Ok(match s {
            "raw" => spec(t0(&[Const, After]), FixedEffects::None, SampleYears::Year2, SeriesFilter::HeShe, false),
            "raw_cut" => spec(t0(&[Const, After]), FixedEffects::None, SampleYears::Year2, SeriesFilter::HeShe, true),
            "baseline" => spec(t0(&[Year2, After]), FixedEffects::Day, SampleYears::Both, SeriesFilter::HeShe, false),
            "baseline_cut" => spec(t0(&[Year2, After]), FixedEffects::Day, SampleYears::Both, SeriesFilter::HeShe, true),
            "user_fe" => spec(t0(&[After]), FixedEffects::User, SampleYears::Year2, SeriesFilter::HeShe, true),
            "day_user_fe" => spec(t0(&[Year2, After]), FixedEffects::DayUser, SampleYears::Both, SeriesFilter::HeShe, true),
            "day_fe" => spec(trends(&[After, HeShe]), FixedEffects::Day, SampleYears::Year2, SeriesFilter::Both, false),
            "placebo_togetherness" => SpecDef {
                placebo_after: true,
                ..spec(trends(&[Const, After]), FixedEffects::None, SampleYears::Year2, SeriesFilter::Togetherness, false)
            },
            _ => match s.strip_prefix("time_trends:") {
                Some(rest) => Self::parse_trends(s, rest)?,
                None => {
                    return Err(Error::Config(format!(
                        "unknown specification `{s}`; expected one of {} or time_trends:...",
                        PRESETS.join(", ")
                    )))
                }
            },
        })
    }

    fn parse_trends(name: &str, rest: &str) -> Result<Self> {
        let mut parts = rest.split(';');
        let inds: Vec<Indicator> = parts
            .next()
            .unwrap_or("")
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        if inds.is_empty() {
            return Err(Error::Config(format!("`{name}` lists no indicators")));
        }
        let mut def = SpecDef {
            name: name.to_string(),
            terms: trends(&inds),
            fe: FixedEffects::None,
            years: SampleYears::Year2,
            series: if inds.contains(&Indicator::HeShe) { SeriesFilter::Both } else { SeriesFilter::HeShe },
            placebo_after: false,
            restrict_users: false,
        };
        for opt in parts {
            let (k, v) = opt.split_once('=').unwrap_or((opt, ""));
            match (k.trim(), v.trim()) {
                ("fe", "day") => def.fe = FixedEffects::Day,
                ("fe", "user") => def.fe = FixedEffects::User,
                ("fe", "day,user") | ("fe", "user,day") => def.fe = FixedEffects::DayUser,
                ("fe", "none") => def.fe = FixedEffects::None,
                ("years", "2") | ("years", "year2") => def.years = SampleYears::Year2,
                ("years", "both") => def.years = SampleYears::Both,
                ("series", "heshe") => def.series = SeriesFilter::HeShe,
                ("series", "togetherness") => def.series = SeriesFilter::Togetherness,
                ("series", "all") | ("series", "both") => def.series = SeriesFilter::Both,
                ("cut", "") => def.restrict_users = true,
                ("placebo", "") => def.placebo_after = true,
                _ => return Err(Error::Config(format!("bad option `{opt}` in `{name}`"))),
            }
        }
        Ok(def)
    }

    pub fn term_names(&self) -> Vec<String> {
        self.terms.iter().map(Term::name).collect()
    }

    /// Short description of the data used, in the style `Year2/1`.
    pub fn data_label(&self) -> &'static str {
        match (self.years, self.series) {
            (SampleYears::Year2, SeriesFilter::HeShe) => "Year2",
            (SampleYears::Both, SeriesFilter::HeShe) => "Year2/1",
            (_, SeriesFilter::Togetherness) => "Togetherness",
            (SampleYears::Year2, SeriesFilter::Both) => "Year2/Togetherness",
            (SampleYears::Both, SeriesFilter::Both) => "Year2/1/Togetherness",
        }
    }

    /// Observations entering the specification.
    pub fn select<'a>(&self, obs: &'a [PanelObservation]) -> Result<Vec<&'a PanelObservation>> {
        let mut keep: Vec<&PanelObservation> = obs
            .iter()
            .filter(|o| self.series.admits(o.series))
            .filter(|o| self.years == SampleYears::Both || o.year2 == 1)
            .collect();
        let uses_after = self.terms.iter().any(|t| matches!(t.indicator, Indicator::After | Indicator::Before));
        if uses_after && !keep.iter().any(|o| o.year2 == 1) {
            return Err(Error::invalid(format!(
                "specification `{}` needs Year-2 observations; the event indicator is undefined otherwise",
                self.name
            )));
        }
        if self.restrict_users {
            let mut sides: BTreeMap<(Series, &str), (bool, bool)> = BTreeMap::new();
            for o in keep.iter().filter(|o| o.year2 == 1) {
                if let Some(u) = &o.user {
                    let e = sides.entry((o.series, u.as_str())).or_default();
                    if o.after == 1 {
                        e.1 = true;
                    } else {
                        e.0 = true;
                    }
                }
            }
            keep.retain(|o| {
                o.year2 == 0
                    || o.user
                        .as_deref()
                        .and_then(|u| sides.get(&(o.series, u)))
                        .is_some_and(|&(b, a)| b && a)
            });
        }
        if keep.is_empty() {
            return Err(Error::invalid(format!("specification `{}` selects no observations", self.name)));
        }
        if self.fe.has_user() && keep.iter().any(|o| o.user.is_none()) {
            return Err(Error::invalid("user fixed effects need a user id on every observation"));
        }
        Ok(keep)
    }
}

impl fmt::Display for SpecDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeMethod {
    /// Alternating weighted demeaning.
    #[default]
    Within,
    /// Explicit indicator columns.
    Dummies,
}

/// Factor codes `0..levels` in sorted key order.
pub(crate) fn factorize<K: Ord + Clone>(keys: &[K]) -> (Vec<usize>, usize) {
    let levels: BTreeMap<K, usize> = keys
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, k)| (k, i))
        .collect();
    (keys.iter().map(|k| levels[k]).collect(), levels.len())
}

/// Selected sample laid out for estimation.
#[derive(Debug, Clone)]
pub struct Design {
    pub names: Vec<String>,
    /// Explicit terms, one column each.
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub weights: Option<Vec<f64>>,
    pub day: Vec<i64>,
    /// `(series, user)` keys; empty strings when absent.
    pub user: Vec<(Series, String)>,
    pub fe: FixedEffects,
}

impl Design {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Factor codes of each fixed-effect dimension.
    pub fn fe_factors(&self) -> Vec<(Vec<usize>, usize)> {
        let mut out = Vec::new();
        if self.fe.has_day() {
            out.push(factorize(&self.day));
        }
        if self.fe.has_user() {
            out.push(factorize(&self.user));
        }
        out
    }
}

/// Lay out the selected sample: term columns, scaled outcome, weights.
pub fn build_design(
    spec: &SpecDef,
    obs: &[&PanelObservation],
    outcome: Outcome,
    scale: f64,
    weights: Option<Vec<f64>>,
) -> Result<Design> {
    let n = obs.len();
    let k = spec.terms.len();
    if k == 0 {
        return Err(Error::Config(format!("specification `{}` has no terms", spec.name)));
    }
    let mut x = DMatrix::zeros(n, k);
    for (i, o) in obs.iter().enumerate() {
        for (j, t) in spec.terms.iter().enumerate() {
            x[(i, j)] = t.value(o, spec.placebo_after);
        }
    }
    let y = DVector::from_iterator(n, obs.iter().map(|o| outcome.value(o) * scale));
    Ok(Design {
        names: spec.term_names(),
        x,
        y,
        weights,
        day: obs.iter().map(|o| o.day_index).collect(),
        user: obs.iter().map(|o| (o.series, o.user.clone().unwrap_or_default())).collect(),
        fe: spec.fe,
    })
}

const DEMEAN_TOL: f64 = 1e-14;
const DEMEAN_MAX_SWEEPS: usize = 100_000;

fn group_means(v: &[f64], codes: &[usize], levels: usize, w: Option<&[f64]>) -> Vec<f64> {
    let mut num = vec![0.0; levels];
    let mut den = vec![0.0; levels];
    for (i, &g) in codes.iter().enumerate() {
        let wi = w.map_or(1.0, |w| w[i]);
        num[g] += wi * v[i];
        den[g] += wi;
    }
    num.iter().zip(&den).map(|(a, b)| a / b).collect()
}

/// Weighted demeaning of `v` within every factor in turn, repeated until
/// the group means vanish. One factor needs a single pass.
pub fn demean(v: &mut [f64], factors: &[(Vec<usize>, usize)], w: Option<&[f64]>) -> Result<()> {
    if factors.is_empty() {
        return Ok(());
    }
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    for sweep in 0..DEMEAN_MAX_SWEEPS {
        for (codes, levels) in factors {
            let m = group_means(v, codes, *levels, w);
            for (x, &g) in v.iter_mut().zip(codes) {
                *x -= m[g];
            }
        }
        if factors.len() == 1 {
            return Ok(());
        }
        let worst = factors
            .iter()
            .flat_map(|(codes, levels)| group_means(v, codes, *levels, w))
            .fold(0.0f64, |m, x| m.max(x.abs()));
        if worst <= DEMEAN_TOL * scale {
            log::debug!("demeaning converged after {} sweeps", sweep + 1);
            return Ok(());
        }
    }
    Err(Error::invalid("fixed-effect demeaning did not converge"))
}

/// Levels absorbed by the fixed effects: the level count for one factor,
/// `levels_a + levels_b - components` for two.
pub(crate) fn absorbed_dof(factors: &[(Vec<usize>, usize)]) -> usize {
    match factors {
        [] => 0,
        [(_, l)] => *l,
        [(a, la), (b, lb)] => la + lb - components(a, *la, b).len(),
        _ => unreachable!("at most two fixed-effect dimensions"),
    }
}

/// Connected components of the bipartite level graph, each listed by its
/// `b` levels.
fn components(a: &[usize], la: usize, b: &[usize]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..la + b.iter().max().map_or(0, |m| m + 1)).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (&i, &j) in a.iter().zip(b) {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, la + j));
        if ri != rj {
            parent[ri.max(rj)] = ri.min(rj);
        }
    }
    let mut comps: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for i in a {
        let r = find(&mut parent, *i);
        comps.entry(r).or_default();
    }
    for &j in b {
        let r = find(&mut parent, la + j);
        comps.entry(r).or_default().insert(j);
    }
    comps.into_values().map(|s| s.into_iter().collect()).collect()
}

/// Estimation-ready arrays after fixed effects have been handled.
pub(crate) struct Absorbed {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub names: Vec<String>,
    /// Columns of `x` holding the explicit terms.
    pub terms: std::ops::Range<usize>,
    pub absorbed: usize,
    pub ref_norms: Option<Vec<f64>>,
    /// Outcome net of fixed effects, for the within R^2.
    pub y_within: DVector<f64>,
}

pub(crate) fn absorb(d: &Design, method: FeMethod) -> Result<Absorbed> {
    let factors = d.fe_factors();
    let w = d.weights.as_deref();
    let mut y_within = d.y.clone();
    demean(y_within.as_mut_slice(), &factors, w)?;
    let k = d.x.ncols();
    if factors.is_empty() {
        return Ok(Absorbed {
            x: d.x.clone(),
            y: d.y.clone(),
            names: d.names.clone(),
            terms: 0..k,
            absorbed: 0,
            ref_norms: None,
            y_within,
        });
    }
    match method {
        FeMethod::Within => {
            let ref_norms: Vec<f64> = (0..k)
                .map(|j| {
                    d.x.column(j)
                        .iter()
                        .enumerate()
                        .map(|(i, v)| w.map_or(1.0, |w| w[i]) * v * v)
                        .sum::<f64>()
                        .sqrt()
                })
                .collect();
            let mut x = d.x.clone();
            for j in 0..k {
                demean(x.column_mut(j).as_mut_slice(), &factors, w)?;
            }
            Ok(Absorbed {
                x,
                y: y_within.clone(),
                names: d.names.clone(),
                terms: 0..k,
                absorbed: absorbed_dof(&factors),
                ref_norms: Some(ref_norms),
                y_within,
            })
        }
        FeMethod::Dummies => {
            let mut cols: Vec<(String, Vec<usize>)> = Vec::new();
            let labels = ["day", "user"];
            let dims: Vec<&str> = match d.fe {
                FixedEffects::Day => vec![labels[0]],
                FixedEffects::User => vec![labels[1]],
                FixedEffects::DayUser => vec![labels[0], labels[1]],
                FixedEffects::None => vec![],
            };
            let mut dropped: BTreeSet<usize> = BTreeSet::new();
            if let [(a, la), (b, _)] = factors.as_slice() {
                dropped = components(a, *la, b).iter().filter_map(|c| c.first().copied()).collect();
            }
            for (dim, (codes, levels)) in factors.iter().enumerate() {
                for level in 0..*levels {
                    if dim == 1 && dropped.contains(&level) {
                        continue;
                    }
                    let rows = codes.iter().enumerate().filter(|(_, &g)| g == level).map(|(i, _)| i).collect();
                    cols.push((format!("fe:{}={level}", dims[dim]), rows));
                }
            }
            let m = cols.len();
            let n = d.n();
            let mut x = DMatrix::zeros(n, m + k);
            let mut names = Vec::with_capacity(m + k);
            for (j, (name, rows)) in cols.into_iter().enumerate() {
                for i in rows {
                    x[(i, j)] = 1.0;
                }
                names.push(name);
            }
            x.columns_mut(m, k).copy_from(&d.x);
            names.extend(d.names.iter().cloned());
            Ok(Absorbed {
                x,
                y: d.y.clone(),
                names,
                terms: m..m + k,
                absorbed: 0,
                ref_norms: None,
                y_within,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(day: i64, year2: u8, after: u8, user: &str, y: f64) -> PanelObservation {
        PanelObservation {
            id: String::new(),
            user: Some(user.into()),
            series: Series::HeShe,
            day_index: day,
            year2,
            after,
            follow_norms: y,
            gendered_language: 0.5,
            she_count: 0.0,
        }
    }

    #[test]
    fn term_names() {
        assert_eq!(Term::new(Indicator::Const, 0).name(), "Constant");
        assert_eq!(Term::new(Indicator::Const, 2).name(), "t^2");
        assert_eq!(Term::new(Indicator::After, 1).name(), "After*t");
        assert_eq!(Term::new(Indicator::Before, 0).name(), "Before");
    }

    #[test]
    fn presets_parse() {
        for p in SpecDef::presets() {
            assert_eq!(SpecDef::parse(p).unwrap().name, *p);
        }
        assert!(SpecDef::parse("nonsense").is_err());
    }

    #[test]
    fn time_trend_grammar() {
        let s = SpecDef::parse("time_trends:after,before;fe=day,user;years=both;cut").unwrap();
        assert_eq!(s.terms.len(), 6);
        assert_eq!(s.fe, FixedEffects::DayUser);
        assert_eq!(s.years, SampleYears::Both);
        assert!(s.restrict_users);
        assert_eq!(s.series, SeriesFilter::HeShe);
        let h = SpecDef::parse("time_trends:const,after,heshe").unwrap();
        assert_eq!(h.series, SeriesFilter::Both);
        assert_eq!(h.term_names()[3..6], ["After", "After*t", "After*t^2"]);
        assert!(SpecDef::parse("time_trends:after;fe=week").is_err());
        assert!(SpecDef::parse("time_trends:").is_err());
    }

    #[test]
    fn after_applies_to_togetherness_only_in_placebo() {
        let mut o = obs(200, 1, 1, "u", 1.0);
        o.series = Series::Togetherness;
        let t = Term::new(Indicator::After, 0);
        assert_eq!(t.value(&o, false), 0.0);
        assert_eq!(t.value(&o, true), 1.0);
    }

    #[test]
    fn raw_on_year_one_is_an_error() {
        let data = vec![obs(1, 0, 0, "a", 1.0), obs(2, 0, 0, "b", 0.0)];
        let raw = SpecDef::parse("raw").unwrap();
        assert!(matches!(raw.select(&data), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn baseline_aligns_calendar_days_across_years() {
        let data = vec![
            obs(5, 0, 0, "a", 1.0),
            obs(6, 0, 0, "a", 0.0),
            obs(5, 1, 0, "b", 1.0),
            obs(6, 1, 0, "b", 1.0),
        ];
        let spec = SpecDef::parse("baseline").unwrap();
        let sel = spec.select(&data).unwrap();
        let d = build_design(&spec, &sel, Outcome::FollowNorms, 1.0, None).unwrap();
        let (codes, levels) = &d.fe_factors()[0];
        assert_eq!(*levels, 2);
        assert_eq!(codes, &vec![0, 1, 0, 1]);
    }

    #[test]
    fn user_restriction_keeps_both_sided_year2_users_and_all_year1() {
        let data = vec![
            obs(10, 1, 0, "both", 1.0),
            obs(200, 1, 1, "both", 1.0),
            obs(10, 1, 0, "before_only", 1.0),
            obs(200, 1, 1, "after_only", 1.0),
            obs(10, 0, 0, "year1", 1.0),
        ];
        let spec = SpecDef::parse("baseline_cut").unwrap();
        let users: Vec<&str> = spec.select(&data).unwrap().iter().map(|o| o.user.as_deref().unwrap()).collect();
        assert_eq!(users, ["both", "both", "year1"]);
    }

    #[test]
    fn one_way_demeaning_zeroes_group_means() {
        let mut v = vec![1.0, 3.0, 10.0, 20.0];
        let f = vec![(vec![0, 0, 1, 1], 2)];
        demean(&mut v, &f, Some(&[1.0, 3.0, 1.0, 1.0])).unwrap();
        assert!((v[0] + 1.5).abs() < 1e-12 && (v[1] - 0.5).abs() < 1e-12);
        assert!((v[2] + 5.0).abs() < 1e-12);
    }

    #[test]
    fn absorbed_dof_counts_components() {
        // two disconnected blocks: days {0,1} with users {0}, day {2} with user {1}
        let f = vec![(vec![0, 1, 2], 3), (vec![0, 0, 1], 2)];
        assert_eq!(absorbed_dof(&f), 3 + 2 - 2);
    }
}
