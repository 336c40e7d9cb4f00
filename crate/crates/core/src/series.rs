//! Consumer time series, cleaning, seasonal slicing and day segmentation.

use std::collections::BTreeSet;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};

use crate::error::{Error, Result};
use crate::mask::samples_per_day;

/// One consumer's imported-energy readings at a fixed interval.
///
/// After [`clean_series`] the values are the concatenation of whole retained
/// days starting at local midnight; days removed by cleaning or seasonal
/// slicing are listed in `omitted_days`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsumerSeries {
    pub consumer_id: String,
    pub start_time: NaiveDateTime,
    pub interval_minutes: u32,
    pub values: Vec<f64>,
    pub label: Option<bool>,
    pub omitted_days: Vec<NaiveDate>,
}

impl ConsumerSeries {
    pub fn new(
        consumer_id: impl Into<String>,
        start_time: NaiveDateTime,
        interval_minutes: u32,
        values: Vec<f64>,
    ) -> Self {
        ConsumerSeries {
            consumer_id: consumer_id.into(),
            start_time,
            interval_minutes,
            values,
            label: None,
            omitted_days: Vec::new(),
        }
    }

    pub fn samples_per_day(&self) -> Result<usize> {
        samples_per_day(self.interval_minutes)
    }

    pub fn starts_at_midnight(&self) -> bool {
        self.start_time.time().num_seconds_from_midnight() == 0
    }

    /// Calendar date of every whole day in the series, skipping omitted days.
    pub fn day_dates(&self) -> Result<Vec<NaiveDate>> {
        let m = self.samples_per_day()?;
        let omitted: BTreeSet<NaiveDate> = self.omitted_days.iter().copied().collect();
        let mut dates = Vec::with_capacity(self.values.len() / m);
        let mut d = self.start_time.date();
        while dates.len() < self.values.len() / m {
            if !omitted.contains(&d) {
                dates.push(d);
            }
            d = d.succ_opt().expect("date in range");
        }
        Ok(dates)
    }
}

/// Rules applied by [`clean_series`].
#[derive(Clone, Debug, PartialEq)]
pub struct CleaningPolicy {
    /// Longest run of missing samples repaired by linear interpolation;
    /// longer runs drop every day they touch.
    pub gap_fill_max_samples: usize,
    /// Trim leading samples so the series starts at local midnight.
    pub align_midnight: bool,
    /// When set, the series must have exactly this interval.
    pub interval_minutes: Option<u32>,
}

impl Default for CleaningPolicy {
    fn default() -> Self {
        CleaningPolicy {
            gap_fill_max_samples: 4,
            align_midnight: true,
            interval_minutes: None,
        }
    }
}

/// Repairs or removes missing readings, clips negative readings to zero and
/// trims the series to whole days.
///
/// Non-finite values count as missing. A missing run with finite neighbours
/// on both sides and at most `gap_fill_max_samples` long is linearly
/// interpolated; any other run drops each day it overlaps.
pub fn clean_series(s: &ConsumerSeries, policy: &CleaningPolicy) -> Result<ConsumerSeries> {
    if let Some(expected) = policy.interval_minutes {
        if expected != s.interval_minutes {
            return Err(Error::Structural(format!(
                "consumer {}: interval is {} minutes, policy requires {expected}",
                s.consumer_id, s.interval_minutes
            )));
        }
    }
    let m = s.samples_per_day()?;
    let mut out = s.clone();
    for v in out.values.iter_mut() {
        if !v.is_finite() {
            *v = f64::NAN;
        }
    }

    if policy.align_midnight && !out.starts_at_midnight() {
        let secs = out.start_time.time().num_seconds_from_midnight() as i64;
        let step = out.interval_minutes as i64 * 60;
        let to_midnight = 86_400 - secs;
        if to_midnight % step != 0 {
            return Err(Error::Structural(format!(
                "consumer {}: start {} is off the {}-minute grid",
                s.consumer_id, s.start_time, s.interval_minutes
            )));
        }
        let skip = ((to_midnight / step) as usize).min(out.values.len());
        out.values.drain(..skip);
        out.start_time += Duration::seconds(to_midnight);
    }

    let whole = out.values.len() / m * m;
    out.values.truncate(whole);

    let bad_days = fill_gaps(&mut out.values, m, policy.gap_fill_max_samples);
    if !bad_days.is_empty() {
        drop_days(&mut out, m, &bad_days)?;
    }

    for v in out.values.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }

    if out.values.len() < 2 * m {
        return Err(Error::InsufficientData(format!(
            "consumer {}: {} samples after cleaning, need at least {}",
            s.consumer_id,
            out.values.len(),
            2 * m
        )));
    }
    Ok(out)
}

/// Interpolates short interior NaN runs in place; returns the day indices
/// touched by runs that could not be repaired.
fn fill_gaps(values: &mut [f64], m: usize, max_gap: usize) -> BTreeSet<usize> {
    let mut bad = BTreeSet::new();
    let n = values.len();
    let mut i = 0;
    while i < n {
        if !values[i].is_nan() {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && values[i].is_nan() {
            i += 1;
        }
        let end = i;
        if start > 0 && end < n && end - start <= max_gap {
            let (lo, hi) = (values[start - 1], values[end]);
            let span = (end - start + 1) as f64;
            for (k, v) in values[start..end].iter_mut().enumerate() {
                let frac = (k + 1) as f64 / span;
                *v = lo + (hi - lo) * frac;
            }
        } else {
            bad.extend(start / m..=(end - 1) / m);
        }
    }
    bad
}

fn drop_days(s: &mut ConsumerSeries, m: usize, bad: &BTreeSet<usize>) -> Result<()> {
    let dates = s.day_dates()?;
    let mut kept = Vec::with_capacity(s.values.len());
    let mut kept_dates = Vec::new();
    for (k, day) in s.values.chunks(m).enumerate() {
        if !bad.contains(&k) {
            kept.extend_from_slice(day);
            kept_dates.push(dates[k]);
        }
    }
    rebase_days(s, kept, &kept_dates);
    Ok(())
}

/// Replaces the values with whole days at `kept_dates`, recomputing the start
/// time and the omitted-day list.
fn rebase_days(s: &mut ConsumerSeries, values: Vec<f64>, kept_dates: &[NaiveDate]) {
    s.values = values;
    match (kept_dates.first(), kept_dates.last()) {
        (Some(&first), Some(&last)) => {
            s.start_time = first.and_hms_opt(0, 0, 0).expect("midnight");
            let kept: BTreeSet<NaiveDate> = kept_dates.iter().copied().collect();
            s.omitted_days = first
                .iter_days()
                .take_while(|d| *d <= last)
                .filter(|d| !kept.contains(d))
                .collect();
        }
        _ => s.omitted_days.clear(),
    }
}

/// Daily sub-patterns of one consumer: `N` rows of `m` samples each.
#[derive(Clone, Debug, PartialEq)]
pub struct DayMatrix {
    pub consumer_id: String,
    m: usize,
    rows: Vec<Vec<f64>>,
    day_index_origin: Option<NaiveDate>,
}

impl DayMatrix {
    pub fn new(consumer_id: impl Into<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if m == 0 {
            return Err(Error::usage("day matrix needs at least one non-empty row"));
        }
        if let Some(k) = rows.iter().position(|r| r.len() != m) {
            return Err(Error::usage(format!(
                "day {k} has {} samples, expected {m}",
                rows[k].len()
            )));
        }
        Ok(DayMatrix {
            consumer_id: consumer_id.into(),
            m,
            rows,
            day_index_origin: None,
        })
    }

    pub fn with_origin(mut self, origin: NaiveDate) -> Self {
        self.day_index_origin = Some(origin);
        self
    }

    pub fn day_index_origin(&self) -> Option<NaiveDate> {
        self.day_index_origin
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_days(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn push_day(&mut self, day: &[f64]) -> Result<()> {
        if day.len() != self.m {
            return Err(Error::usage(format!(
                "new day has {} samples, expected {}",
                day.len(),
                self.m
            )));
        }
        self.rows.push(day.to_vec());
        Ok(())
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.rows.concat()
    }
}

/// Splits a cleaned series into daily rows aligned to local midnight.
pub fn segment_days(s: &ConsumerSeries) -> Result<DayMatrix> {
    let m = s.samples_per_day()?;
    if !s.starts_at_midnight() {
        return Err(Error::Structural(format!(
            "consumer {}: series starts at {}, not midnight; trim it first (align_midnight)",
            s.consumer_id,
            s.start_time.time()
        )));
    }
    if s.values.is_empty() || !s.values.len().is_multiple_of(m) {
        return Err(Error::Structural(format!(
            "consumer {}: {} samples is not a whole number of {m}-sample days",
            s.consumer_id,
            s.values.len()
        )));
    }
    let rows = s.values.chunks(m).map(<[f64]>::to_vec).collect();
    Ok(DayMatrix::new(s.consumer_id.clone(), rows)?.with_origin(s.start_time.date()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Season {
    Summer,
    Winter,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hemisphere {
    North,
    South,
}

impl Season {
    /// Calendar months (1-12) making up the season.
    pub fn months(self, hemisphere: Hemisphere) -> [u32; 3] {
        match (self, hemisphere) {
            (Season::Summer, Hemisphere::North) | (Season::Winter, Hemisphere::South) => [6, 7, 8],
            (Season::Winter, Hemisphere::North) | (Season::Summer, Hemisphere::South) => [12, 1, 2],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Season::Summer => "summer",
            Season::Winter => "winter",
        }
    }
}

/// Keeps only the whole days whose calendar month is in `months`.
pub fn slice_months(s: &ConsumerSeries, months: &[u32]) -> Result<ConsumerSeries> {
    let m = s.samples_per_day()?;
    if !s.starts_at_midnight() || !s.values.len().is_multiple_of(m) {
        return Err(Error::Structural(format!(
            "consumer {}: seasonal slicing needs a cleaned, midnight-aligned series",
            s.consumer_id
        )));
    }
    let dates = s.day_dates()?;
    let mut values = Vec::new();
    let mut kept = Vec::new();
    for (day, date) in s.values.chunks(m).zip(&dates) {
        if months.contains(&date.month()) {
            values.extend_from_slice(day);
            kept.push(*date);
        }
    }
    let mut out = s.clone();
    rebase_days(&mut out, values, &kept);
    Ok(out)
}

pub fn slice_season(s: &ConsumerSeries, season: Season, hemisphere: Hemisphere) -> Result<ConsumerSeries> {
    slice_months(s, &season.months(hemisphere))
}
