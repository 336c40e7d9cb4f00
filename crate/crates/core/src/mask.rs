//! Daytime masks and the weight matrices derived from them.

use chrono::{NaiveTime, Timelike};

use crate::error::{Error, Result};

/// A half-open window `[window_start, window_end)` of sample indices within
/// a day of `m` samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MaskSpec {
    window_start: usize,
    window_end: usize,
    m: usize,
}

impl MaskSpec {
    pub fn new(window_start: usize, window_end: usize, m: usize) -> Result<Self> {
        if window_start >= window_end || window_end > m {
            return Err(Error::usage(format!(
                "invalid mask window [{window_start}, {window_end}) for m = {m}"
            )));
        }
        Ok(MaskSpec {
            window_start,
            window_end,
            m,
        })
    }

    /// Whole-day window; yields an all-ones weight matrix.
    pub fn full(m: usize) -> Result<Self> {
        Self::new(0, m, m)
    }

    /// Window between two wall-clock times at the given sampling interval.
    /// `end` of midnight means end of day.
    pub fn from_clock(start: NaiveTime, end: NaiveTime, interval_minutes: u32) -> Result<Self> {
        let m = samples_per_day(interval_minutes)?;
        let to_index = |t: NaiveTime, end_of_day: bool| -> Result<usize> {
            let minutes = t.hour() * 60 + t.minute();
            if t.second() != 0 || !minutes.is_multiple_of(interval_minutes) {
                return Err(Error::usage(format!(
                    "mask boundary {t} is not on the {interval_minutes}-minute grid"
                )));
            }
            if end_of_day && minutes == 0 {
                Ok(m)
            } else {
                Ok((minutes / interval_minutes) as usize)
            }
        };
        Self::new(to_index(start, false)?, to_index(end, true)?, m)
    }

    /// The 10:00-16:00 window that concentrates on the midday generation peak.
    pub fn calibrated(interval_minutes: u32) -> Result<Self> {
        Self::from_clock(hm(10, 0), hm(16, 0), interval_minutes)
    }

    /// A sunrise-to-sunset window (06:00-19:00) covering the summer daylight
    /// period of the synthetic generator.
    pub fn daylight(interval_minutes: u32) -> Result<Self> {
        Self::from_clock(hm(6, 0), hm(19, 0), interval_minutes)
    }

    pub fn window_start(&self) -> usize {
        self.window_start
    }

    pub fn window_end(&self) -> usize {
        self.window_end
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn contains(&self, t: usize) -> bool {
        (self.window_start..self.window_end).contains(&t)
    }

    pub fn is_full(&self) -> bool {
        self.window_start == 0 && self.window_end == self.m
    }

    /// Binary mask vector: 1 inside the window, 0 outside.
    pub fn vector(&self) -> Vec<f64> {
        (0..self.m)
            .map(|t| if self.contains(t) { 1.0 } else { 0.0 })
            .collect()
    }
}

fn hm(h: u32, m: u32) -> NaiveTime {
    NaiveTime::from_hms_opt(h, m, 0).expect("valid clock time")
}

/// Samples per day at the given interval; the interval must divide a day.
pub fn samples_per_day(interval_minutes: u32) -> Result<usize> {
    if interval_minutes == 0 || 1440 % interval_minutes != 0 {
        return Err(Error::Structural(format!(
            "interval of {interval_minutes} minutes does not divide a day"
        )));
    }
    Ok((1440 / interval_minutes) as usize)
}

/// Symmetric `m x m` matrix of per-cell weights for the refined DTW cost.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix {
    m: usize,
    entries: Vec<f64>,
}

impl WeightMatrix {
    /// Binary weights `W[i][j] = max(w_i, w_j)` from a daytime window.
    pub fn from_mask(mask: &MaskSpec) -> Self {
        Self::from_weights_unchecked(&mask.vector())
    }

    /// General weights `W[i][j] = max(|w_i|, |w_j|)` from a per-sample weight
    /// vector with entries in `[-1, 1]`.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::usage("weight vector is empty"));
        }
        if let Some(bad) = w.iter().find(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(Error::usage(format!("weight {bad} outside [-1, 1]")));
        }
        Ok(Self::from_weights_unchecked(w))
    }

    fn from_weights_unchecked(w: &[f64]) -> Self {
        let m = w.len();
        let mut entries = Vec::with_capacity(m * m);
        for wi in w {
            for wj in w {
                entries.push(wi.abs().max(wj.abs()));
            }
        }
        WeightMatrix { m, entries }
    }

    /// Arbitrary symmetric weights in `[0, 1]`, row-major.
    pub fn from_entries(m: usize, entries: Vec<f64>) -> Result<Self> {
        if m == 0 || entries.len() != m * m {
            return Err(Error::usage(format!(
                "expected {} weight entries, got {}",
                m * m,
                entries.len()
            )));
        }
        if entries.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::usage("weights must lie in [0, 1]"));
        }
        for i in 0..m {
            for j in 0..i {
                if entries[i * m + j] != entries[j * m + i] {
                    return Err(Error::usage(format!("weights not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(WeightMatrix { m, entries })
    }

    pub fn ones(m: usize) -> Self {
        WeightMatrix {
            m,
            entries: vec![1.0; m * m],
        }
    }

    pub fn zeros(m: usize) -> Self {
        WeightMatrix {
            m,
            entries: vec![0.0; m * m],
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.m..(i + 1) * self.m]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// Binary weight matrix for a daytime window.
pub fn build_weight_matrix(mask: &MaskSpec) -> WeightMatrix {
    WeightMatrix::from_mask(mask)
}
