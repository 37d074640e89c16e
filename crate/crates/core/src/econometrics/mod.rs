//! Event-study regressions on per-message panel observations.

mod design;
mod entry_exit;
mod estimate;
mod ols;
mod panel;
mod table;
mod vcov;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use design::{
    build_design, demean, Design, FeMethod, FixedEffects, Indicator, SampleYears, SeriesFilter, SpecDef, Term,
};
pub use entry_exit::{entry_exit_rates, EntryExit};
pub use estimate::{
    aggregate_daily, estimate_spec, stars, AggregateCell, ClusterDim, EstimateOptions, RegressionResult, VcovChoice,
};
pub use ols::{ols, OlsFit, COLLINEARITY_TOL};
pub use panel::{panel_from_predictions, CalendarIndex, EVENT_DATE};
pub use table::{format_regression_table, read_result_json, write_coefficients_csv, write_result_json};
pub use vcov::{
    cluster_count, psd_repair, std_errors, vcov_cluster, vcov_hc1, vcov_newey_west, vcov_ols, vcov_twoway, VcovKind,
};

/// Which classifier produced the observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Series {
    /// Main he/she series.
    HeShe,
    /// Placebo I/we series.
    Togetherness,
}

impl Series {
    pub fn as_str(self) -> &'static str {
        match self {
            Series::HeShe => "heshe",
            Series::Togetherness => "togetherness",
        }
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Series {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heshe" => Ok(Series::HeShe),
            "togetherness" => Ok(Series::Togetherness),
            _ => Err(Error::invalid(format!("unknown series `{s}`"))),
        }
    }
}

/// One scored message placed on the common calendar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelObservation {
    pub id: String,
    pub user: Option<String>,
    pub series: Series,
    /// Days since May 1 of the observation's year.
    pub day_index: i64,
    pub year2: u8,
    /// 1 on and after the event date. Set from the calendar for every
    /// series; specifications decide which series it applies to.
    pub after: u8,
    pub follow_norms: f64,
    pub gendered_language: f64,
    pub she_count: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    #[default]
    FollowNorms,
    GenderedLanguage,
    SheCount,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::FollowNorms => "follow_norms",
            Outcome::GenderedLanguage => "gendered_language",
            Outcome::SheCount => "she_count",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Outcome::FollowNorms => "Follow Norms",
            Outcome::GenderedLanguage => "Gendered Language",
            Outcome::SheCount => "She Count",
        }
    }

    pub fn value(self, o: &PanelObservation) -> f64 {
        match self {
            Outcome::FollowNorms => o.follow_norms,
            Outcome::GenderedLanguage => o.gendered_language,
            Outcome::SheCount => o.she_count,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "follow_norms" => Ok(Outcome::FollowNorms),
            "gendered_language" => Ok(Outcome::GenderedLanguage),
            "she_count" => Ok(Outcome::SheCount),
            _ => Err(Error::invalid(format!("unknown outcome `{s}`"))),
        }
    }
}

/// 1 when the prediction matches the true class.
pub fn follow_norms(predicted: u8, label: u8) -> u8 {
    u8::from(predicted == label)
}

pub fn write_observations(path: &Path, obs: &[PanelObservation]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    for o in obs {
        w.serialize(o).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_observations(path: &Path) -> Result<Vec<PanelObservation>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let mut out = Vec::new();
    for (i, row) in r.deserialize().enumerate() {
        let o: PanelObservation = row.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            msg: e.to_string(),
        })?;
        if o.after == 1 && o.year2 == 0 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                msg: "after = 1 requires year2 = 1".into(),
            });
        }
        out.push(o);
    }
    Ok(out)
}
