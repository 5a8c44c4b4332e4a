use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::dataset::{ApplianceKind, HomeId};
use crate::{Error, Result};

/// One home's minute-resolution power readings on a gapless grid starting at
/// `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinuteTrace {
    pub home_id: HomeId,
    pub start: NaiveDateTime,
    pub aggregate_w: Vec<f64>,
    pub submetered_w: BTreeMap<ApplianceKind, Vec<f64>>,
}

/// Half-open `[start, end)` time range used for HMM training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainWindow {
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
}

impl TrainWindow {
    /// The whole of calendar month `month` in `year`.
    pub fn month(year: i32, month: u32) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("invalid training month {year}-{month}"));
        let start = NaiveDate::from_ymd_opt(year, month, 1).ok_or_else(bad)?;
        let end = if month == 12 {
            NaiveDate::from_ymd_opt(year + 1, 1, 1)
        } else {
            NaiveDate::from_ymd_opt(year, month + 1, 1)
        }
        .ok_or_else(bad)?;
        Ok(TrainWindow {
            start: start.and_hms_opt(0, 0, 0).ok_or_else(bad)?,
            end: end.and_hms_opt(0, 0, 0).ok_or_else(bad)?,
        })
    }
}

/// A run of consecutive minutes that fall in one calendar month.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonthSegment {
    /// Calendar month, 1..=12.
    pub month: u8,
    pub range: Range<usize>,
}

fn first_of_next_month(t: NaiveDateTime) -> NaiveDateTime {
    let (y, m) = if t.month() == 12 {
        (t.year() + 1, 1)
    } else {
        (t.year(), t.month() + 1)
    };
    NaiveDate::from_ymd_opt(y, m, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid calendar date")
}

/// Splits `len` minutes from `start` into calendar-month segments.
pub fn month_segments(start: NaiveDateTime, len: usize) -> Vec<MonthSegment> {
    let mut out = Vec::new();
    let mut cursor = start;
    let mut idx = 0usize;
    while idx < len {
        let boundary = first_of_next_month(cursor);
        let minutes = (boundary - cursor).num_minutes() as usize;
        let end = (idx + minutes).min(len);
        out.push(MonthSegment {
            month: cursor.month() as u8,
            range: idx..end,
        });
        idx = end;
        cursor = boundary;
    }
    out
}

impl MinuteTrace {
    pub fn new(
        home_id: HomeId,
        start: NaiveDateTime,
        aggregate_w: Vec<f64>,
        submetered_w: BTreeMap<ApplianceKind, Vec<f64>>,
    ) -> Result<Self> {
        let trace = MinuteTrace {
            home_id,
            start,
            aggregate_w,
            submetered_w,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        if self.start.second() != 0 || self.start.nanosecond() != 0 {
            return Err(Error::InvalidTrace(format!(
                "{}: start {} is not minute-aligned",
                self.home_id, self.start
            )));
        }
        let check = |name: &str, series: &[f64]| -> Result<()> {
            if series.len() != self.aggregate_w.len() {
                return Err(Error::InvalidTrace(format!(
                    "{}: column {name} has {} minutes, aggregate has {}",
                    self.home_id,
                    series.len(),
                    self.aggregate_w.len()
                )));
            }
            if let Some(i) = series.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
                return Err(Error::InvalidTrace(format!(
                    "{}: column {name} minute {i} is negative or not finite",
                    self.home_id
                )));
            }
            Ok(())
        };
        check("aggregate_w", &self.aggregate_w)?;
        for (kind, series) in &self.submetered_w {
            check(kind.name(), series)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.aggregate_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aggregate_w.is_empty()
    }

    pub fn timestamp(&self, index: usize) -> NaiveDateTime {
        self.start + Duration::minutes(index as i64)
    }

    pub fn end(&self) -> NaiveDateTime {
        self.timestamp(self.len())
    }

    pub fn month_segments(&self) -> Vec<MonthSegment> {
        month_segments(self.start, self.len())
    }

    /// Minute indices of `window` clipped to the trace.
    pub fn window_range(&self, window: &TrainWindow) -> Result<Range<usize>> {
        let offset = |t: NaiveDateTime| -> usize {
            let minutes = (t - self.start).num_minutes();
            minutes.clamp(0, self.len() as i64) as usize
        };
        let range = offset(window.start)..offset(window.end);
        if range.is_empty() {
            return Err(Error::EmptyWindow);
        }
        Ok(range)
    }

    /// Index of the first minute of each calendar day that intersects `range`.
    pub fn day_starts(&self, range: Range<usize>) -> Vec<usize> {
        let mut out = Vec::new();
        if range.is_empty() {
            return out;
        }
        out.push(range.start);
        let t = self.timestamp(range.start);
        let minute_of_day = (t.hour() * 60 + t.minute()) as usize;
        let mut next = range.start + (1440 - minute_of_day);
        while next < range.end {
            out.push(next);
            next += 1440;
        }
        out
    }

    /// Total submetered energy per appliance in watt-minutes.
    pub fn appliance_totals(&self) -> Vec<(ApplianceKind, f64)> {
        self.submetered_w
            .iter()
            .map(|(k, s)| (k.clone(), s.iter().sum::<f64>()))
            .collect()
    }
}

/// Up to `n` appliances with the highest submetered energy, descending; ties
/// resolve by appliance name.
pub fn select_top(trace: &MinuteTrace, n: usize) -> Vec<ApplianceKind> {
    let mut totals = trace.appliance_totals();
    totals.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.name().cmp(b.0.name())));
    totals.into_iter().take(n).map(|(k, _)| k).collect()
}

pub fn select_top5(trace: &MinuteTrace) -> Vec<ApplianceKind> {
    select_top(trace, 5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn at(y: i32, m: u32, d: u32, h: u32, min: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, m, d)
            .unwrap()
            .and_hms_opt(h, min, 0)
            .unwrap()
    }

    #[test]
    fn segments_cover_year() {
        let segs = month_segments(at(2013, 1, 1, 0, 0), 365 * 1440);
        assert_eq!(segs.len(), 12);
        assert_eq!(segs[1].range.len(), 28 * 1440);
        assert_eq!(segs[5].range.len(), 30 * 1440);
        assert_eq!(segs[11].range.end, 365 * 1440);
    }

    #[test]
    fn segments_partial_start() {
        let segs = month_segments(at(2013, 1, 31, 23, 0), 120);
        assert_eq!(
            segs,
            vec![
                MonthSegment { month: 1, range: 0..60 },
                MonthSegment {
                    month: 2,
                    range: 60..120
                }
            ]
        );
    }

    fn trace_with(series: Vec<(ApplianceKind, Vec<f64>)>) -> MinuteTrace {
        let len = series[0].1.len();
        MinuteTrace::new(
            "h".into(),
            at(2013, 8, 1, 0, 0),
            vec![0.0; len],
            series.into_iter().collect(),
        )
        .unwrap()
    }

    #[test]
    fn top5_drops_lowest() {
        use ApplianceKind::*;
        let kinds = [Fridge, Hvac, WashingMachine, DishWasher, Dryer, Lights];
        let energies = [50.0, 900.0, 30.0, 40.0, 200.0, 5.0];
        let trace = trace_with(
            kinds
                .iter()
                .zip(energies)
                .map(|(k, e)| (k.clone(), vec![e; 10]))
                .collect(),
        );
        assert_eq!(
            select_top5(&trace),
            vec![Hvac, Dryer, Fridge, DishWasher, WashingMachine]
        );
    }

    #[test]
    fn top5_with_three_and_ties() {
        use ApplianceKind::*;
        let trace = trace_with(vec![
            (Lights, vec![1.0; 4]),
            (Dryer, vec![1.0; 4]),
            (Fridge, vec![2.0; 4]),
        ]);
        assert_eq!(select_top5(&trace), vec![Fridge, Dryer, Lights]);
    }

    #[test]
    fn window_and_days() {
        let trace = trace_with(vec![(ApplianceKind::Fridge, vec![0.0; 3 * 1440])]);
        let w = TrainWindow {
            start: at(2013, 8, 1, 12, 0),
            end: at(2013, 9, 1, 0, 0),
        };
        let r = trace.window_range(&w).unwrap();
        assert_eq!(r, 720..3 * 1440);
        assert_eq!(trace.day_starts(r), vec![720, 1440, 2880]);
        let outside = TrainWindow::month(2013, 2).unwrap();
        assert_eq!(trace.window_range(&outside), Err(Error::EmptyWindow));
    }

    #[test]
    fn rejects_ragged_columns() {
        let err = MinuteTrace::new(
            "h".into(),
            at(2013, 1, 1, 0, 0),
            vec![0.0; 3],
            BTreeMap::from([(ApplianceKind::Fridge, vec![0.0; 2])]),
        );
        assert!(matches!(err, Err(Error::InvalidTrace(_))));
    }
}
