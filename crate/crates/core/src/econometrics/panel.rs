use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::{follow_norms, PanelObservation, Series};
use crate::error::{Error, Result};
use crate::evaluation::PredictionRecord;

/// 2017-10-17.
pub const EVENT_DATE: (i32, u32, u32) = (2017, 10, 17);

/// Maps dates to a calendar shared by two consecutive years, each
/// starting on May 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalendarIndex {
    /// First day of Year 2.
    pub year2_start: NaiveDate,
    pub event: NaiveDate,
}

impl Default for CalendarIndex {
    fn default() -> Self {
        let (y, m, d) = EVENT_DATE;
        CalendarIndex {
            year2_start: NaiveDate::from_ymd_opt(2017, 5, 1).expect("valid date"),
            event: NaiveDate::from_ymd_opt(y, m, d).expect("valid date"),
        }
    }
}

impl CalendarIndex {
    pub fn new(year2_start: NaiveDate, event: NaiveDate) -> Result<Self> {
        let c = CalendarIndex { year2_start, event };
        match c.locate(event) {
            Some((1, _)) => Ok(c),
            _ => Err(Error::Config(format!("event {event} is not inside Year 2 starting {year2_start}"))),
        }
    }

    /// `(year2, day_index)`. `None` outside the two years and on Feb 29.
    pub fn locate(&self, date: NaiveDate) -> Option<(u8, i64)> {
        if date.month() == 2 && date.day() == 29 {
            return None;
        }
        let start_md = (self.year2_start.month(), self.year2_start.day());
        let season_year = if (date.month(), date.day()) >= start_md { date.year() } else { date.year() - 1 };
        let year2 = match season_year - self.year2_start.year() {
            0 => 1,
            -1 => 0,
            _ => return None,
        };
        // count on a non-leap reference season so both years share indices
        let (ref0, ref1) = (2017, 2018);
        let reference = if (date.month(), date.day()) >= start_md {
            NaiveDate::from_ymd_opt(ref0, date.month(), date.day())?
        } else {
            NaiveDate::from_ymd_opt(ref1, date.month(), date.day())?
        };
        let origin = NaiveDate::from_ymd_opt(ref0, start_md.0, start_md.1)?;
        Some((year2, (reference - origin).num_days()))
    }

    pub fn event_index(&self) -> i64 {
        self.locate(self.event).map_or(0, |(_, d)| d)
    }
}

/// One observation per prediction. Returns the observations and the
/// number of predictions dropped (outside the calendar, or Feb 29).
pub fn panel_from_predictions(
    preds: &[PredictionRecord],
    series: Series,
    cal: &CalendarIndex,
) -> (Vec<PanelObservation>, usize) {
    let event = cal.event_index();
    let mut dropped = 0;
    let mut leap = 0;
    let mut out = Vec::with_capacity(preds.len());
    for p in preds {
        let Some((year2, day_index)) = cal.locate(p.day) else {
            dropped += 1;
            if p.day.month() == 2 && p.day.day() == 29 {
                leap += 1;
            }
            continue;
        };
        out.push(PanelObservation {
            id: p.id.clone(),
            user: p.user.clone(),
            series,
            day_index,
            year2,
            after: u8::from(year2 == 1 && day_index >= event),
            follow_norms: f64::from(follow_norms(p.predicted, p.label)),
            gendered_language: p.score,
            she_count: f64::from(p.label),
        });
    }
    if leap > 0 {
        log::warn!("dropped {leap} messages dated Feb 29, which has no counterpart in the other year");
    }
    (out, dropped)
}
