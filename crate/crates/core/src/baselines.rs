//! Intuitive comparison methods: Counting Zeros, the average daily profile
//! and the seasonal load-duration distance.

use crate::error::{Error, Result};
use crate::eval::Confusion;
use crate::motif::{Motif, MotifMethod};
use crate::series::{DayMatrix, Season};

/// Zero-count threshold for one year of half-hourly readings.
pub const YEARLY_ZERO_THRESHOLD: usize = 2000;

/// Number of readings equal to zero, or within `epsilon` of it when given.
pub fn count_zeros(values: &[f64], epsilon: Option<f64>) -> usize {
    match epsilon {
        None => values.iter().filter(|&&v| v == 0.0).count(),
        Some(eps) => values.iter().filter(|v| v.abs() <= eps).count(),
    }
}

/// [`YEARLY_ZERO_THRESHOLD`] scaled to a series of `n_samples` readings.
pub fn scaled_zero_threshold(n_samples: usize, interval_minutes: u32) -> usize {
    let per_year = 365.0 * 1440.0 / interval_minutes as f64;
    (YEARLY_ZERO_THRESHOLD as f64 * n_samples as f64 / per_year).round() as usize
}

/// Positive (PV owner) iff at least `zero_threshold` readings are zero.
pub fn counting_zeros(values: &[f64], zero_threshold: usize, epsilon: Option<f64>) -> bool {
    count_zeros(values, epsilon) >= zero_threshold
}

/// Column-wise mean over all days, summed in day order.
pub fn average_daily_profile(days: &DayMatrix) -> Vec<f64> {
    let n = days.n_days() as f64;
    let mut acc = vec![0.0; days.m()];
    for row in days.rows() {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// The average daily profile wrapped as a motif so it can stand in for one
/// downstream. It is not an observed day; `source_day_index` is 0 and
/// `sp_value` holds the number of days averaged.
pub fn average_profile_motif(days: &DayMatrix) -> Result<Motif> {
    if days.n_days() == 0 {
        return Err(Error::InsufficientData(format!(
            "{}: no days to average",
            days.consumer_id
        )));
    }
    Ok(Motif {
        consumer_id: days.consumer_id.clone(),
        values: average_daily_profile(days),
        source_day_index: 0,
        sp_value: days.n_days() as f64,
        method: MotifMethod::AverageProfile,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadDurationCurve {
    sorted_values: Vec<f64>,
    season: Season,
}

impl LoadDurationCurve {
    pub fn new(values: &[f64], season: Season) -> Self {
        let mut sorted_values = values.to_vec();
        sorted_values.sort_by(|a, b| b.total_cmp(a));
        LoadDurationCurve { sorted_values, season }
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted_values
    }

    pub fn season(&self) -> Season {
        self.season
    }

    /// `q` evenly spaced points along the curve, linearly interpolated.
    pub fn resample(&self, q: usize) -> Result<Vec<f64>> {
        let n = self.sorted_values.len();
        if q == 0 {
            return Err(Error::usage("load-duration resolution q must be positive"));
        }
        if n == 0 {
            return Err(Error::InsufficientData(format!(
                "{} season has no samples",
                self.season.as_str()
            )));
        }
        if n < q {
            return Err(Error::InsufficientData(format!(
                "{} season has {n} samples, fewer than q = {q}",
                self.season.as_str()
            )));
        }
        let v = &self.sorted_values;
        Ok((0..q)
            .map(|k| {
                if q == 1 {
                    return v[0];
                }
                let pos = k as f64 * (n - 1) as f64 / (q - 1) as f64;
                let lo = pos.floor() as usize;
                let hi = (lo + 1).min(n - 1);
                let frac = pos - lo as f64;
                v[lo] + frac * (v[hi] - v[lo])
            })
            .collect())
    }
}

/// Euclidean distance between the resampled summer and winter curves.
pub fn load_duration_distance(summer: &[f64], winter: &[f64], q: usize) -> Result<f64> {
    let s = LoadDurationCurve::new(summer, Season::Summer).resample(q)?;
    let w = LoadDurationCurve::new(winter, Season::Winter).resample(q)?;
    crate::distance::euclidean(&s, &w)
}

/// Positive (electric heating) iff the curve distance reaches `threshold`.
pub fn load_duration_classify(summer: &[f64], winter: &[f64], q: usize, threshold: f64) -> Result<bool> {
    Ok(load_duration_distance(summer, winter, q)? >= threshold)
}

/// Threshold maximising the F-score of `distance >= threshold` on a labelled
/// set. Candidates are the observed distances plus `+inf`; the smallest
/// candidate reaching the best score wins.
pub fn fit_load_duration_threshold(distances: &[f64], labels: &[bool]) -> Result<f64> {
    if distances.len() != labels.len() || distances.is_empty() {
        return Err(Error::usage("need one label per distance and at least one distance"));
    }
    let mut candidates = distances.to_vec();
    candidates.push(f64::INFINITY);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut best = (f64::NEG_INFINITY, f64::INFINITY);
    for &t in &candidates {
        let c = Confusion::from_pairs(distances.iter().zip(labels).map(|(&d, &y)| (d >= t, y)));
        let f = c.f_score();
        if f > best.0 {
            best = (f, t);
        }
    }
    Ok(best.1)
}
