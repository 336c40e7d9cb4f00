//! Matrix-profile baseline: the closest pair of one-step sliding windows
//! under z-normalised Euclidean distance.
//!
//! Windows overlapping by more than the exclusion zone are trivial matches
//! and never paired. [`closest_pair`] walks each diagonal of the pair matrix
//! updating the sliding dot product in O(1) per step; the O(n^2 m)
//! [`closest_pair_brute_force`] compares explicitly z-normalised windows and
//! is the reference it is tested against.

use crate::distance::z_normalize;
use crate::error::{Error, Result};
use crate::series::ConsumerSeries;

use super::{Motif, MotifMethod};

const FLAT_STD: f64 = 1e-12;

/// Closest admissible window pair `(i, j)`, `i < j`, with its distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosestPair {
    pub first: usize,
    pub second: usize,
    pub distance: f64,
}

/// Default trivial-match exclusion zone, `ceil(m / 2)`.
pub fn default_exclusion_zone(m: usize) -> usize {
    m.div_ceil(2)
}

fn check(n: usize, m: usize, zone: usize) -> Result<()> {
    if m == 0 || zone == 0 {
        return Err(Error::usage("window length and exclusion zone must be positive"));
    }
    if n < 2 * m {
        return Err(Error::InsufficientData(format!(
            "series too short: {n} samples, need at least {}",
            2 * m
        )));
    }
    if zone > n - m {
        return Err(Error::usage(format!(
            "exclusion zone {zone} leaves no admissible pair"
        )));
    }
    Ok(())
}

fn better(d2: f64, i: usize, j: usize, best: &Option<(f64, usize, usize)>) -> bool {
    match *best {
        None => true,
        Some((bd, bi, bj)) => d2 < bd || (d2 == bd && (i, j) < (bi, bj)),
    }
}

/// Exhaustive scan over all admissible pairs, `j - i >= zone`.
pub fn closest_pair_brute_force(values: &[f64], m: usize, zone: usize) -> Result<ClosestPair> {
    check(values.len(), m, zone)?;
    let windows: Vec<Vec<f64>> = values.windows(m).map(z_normalize).collect();
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..windows.len() {
        for j in i + zone..windows.len() {
            let d2: f64 = windows[i]
                .iter()
                .zip(&windows[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if better(d2, i, j, &best) {
                best = Some((d2, i, j));
            }
        }
    }
    let (d2, first, second) = best.expect("at least one admissible pair");
    Ok(ClosestPair {
        first,
        second,
        distance: d2.sqrt(),
    })
}

/// Closest pair via sliding dot products along each diagonal.
pub fn closest_pair(values: &[f64], m: usize, zone: usize) -> Result<ClosestPair> {
    check(values.len(), m, zone)?;
    let count = values.len() - m + 1;
    let mf = m as f64;

    let mut mean = Vec::with_capacity(count);
    let mut inv_std = Vec::with_capacity(count);
    for w in values.windows(m) {
        let mu = w.iter().sum::<f64>() / mf;
        let var = w.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / mf;
        let sd = var.sqrt();
        mean.push(mu);
        inv_std.push(if sd < FLAT_STD { 0.0 } else { 1.0 / sd });
    }

    let mut best: Option<(f64, usize, usize)> = None;
    for lag in zone..count {
        let mut qt: f64 = values[..m].iter().zip(&values[lag..lag + m]).map(|(a, b)| a * b).sum();
        for i in 0..count - lag {
            let j = i + lag;
            if i > 0 {
                qt += values[i + m - 1] * values[j + m - 1] - values[i - 1] * values[j - 1];
            }
            let d2 = match (inv_std[i] == 0.0, inv_std[j] == 0.0) {
                (true, true) => 0.0,
                (true, false) | (false, true) => mf,
                (false, false) => {
                    let corr = (qt - mf * mean[i] * mean[j]) * inv_std[i] * inv_std[j] / mf;
                    (2.0 * mf * (1.0 - corr)).max(0.0)
                }
            };
            if better(d2, i, j, &best) {
                best = Some((d2, i, j));
            }
        }
    }
    let (d2, first, second) = best.expect("at least one admissible pair");
    Ok(ClosestPair {
        first,
        second,
        distance: d2.sqrt(),
    })
}

/// Matrix-profile motif with the default exclusion zone.
pub fn matrix_profile_motif(series: &ConsumerSeries, m: usize) -> Result<Motif> {
    matrix_profile_motif_with_zone(series, m, default_exclusion_zone(m))
}

/// The raw window at the first member of the closest pair.
pub fn matrix_profile_motif_with_zone(series: &ConsumerSeries, m: usize, zone: usize) -> Result<Motif> {
    let pair = closest_pair(&series.values, m, zone)?;
    Ok(Motif {
        consumer_id: series.consumer_id.clone(),
        values: series.values[pair.first..pair.first + m].to_vec(),
        source_day_index: pair.first,
        sp_value: pair.distance,
        method: MotifMethod::MatrixProfile,
    })
}
