//! Refined motif discovery over daily sub-patterns.
//!
//! A consumer's days are compared pairwise with the refined DTW distance.
//! Each day then gets a similarity-profile score: the number of *other* days
//! within the threshold `T`, minus its average distance to the other days
//! normalised by the largest off-diagonal distance. The day with the highest
//! score is the motif, ties going to the earliest day.
//!
//! Row sums are accumulated in ascending column order and kept alongside the
//! averages, so appending a day updates every score with `N` new kernel calls
//! and reproduces a full recomputation bit for bit.

mod file;
mod matrix_profile;

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

pub use file::{read_motifs, write_motifs};
pub use matrix_profile::{
    closest_pair, closest_pair_brute_force, default_exclusion_zone, matrix_profile_motif,
    matrix_profile_motif_with_zone, ClosestPair,
};

use crate::distance::r_dtw;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fsutil::write_atomic;
use crate::mask::{MaskSpec, WeightMatrix};
use crate::series::DayMatrix;

/// How the similarity threshold `T` is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Threshold {
    /// A constant `T`; supports incremental updates.
    Fixed(f64),
    /// Median of this consumer's own off-diagonal distances. Experimental:
    /// the threshold moves with every new day, so updates need a full
    /// recomputation.
    DynamicMedian,
}

impl From<f64> for Threshold {
    fn from(t: f64) -> Self {
        Threshold::Fixed(t)
    }
}

/// Symmetric `N x N` table of refined DTW distances between days.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceTable {
    d: Vec<Vec<f64>>,
    threshold: f64,
    mode: Threshold,
    mask: MaskSpec,
    kernel_calls: u64,
}

impl DistanceTable {
    pub fn n_days(&self) -> usize {
        self.d.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i][j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.d[i]
    }

    /// Resolved threshold value `T`.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn threshold_mode(&self) -> Threshold {
        self.mode
    }

    pub fn mask(&self) -> &MaskSpec {
        &self.mask
    }

    /// Number of distance-kernel invocations spent building and updating
    /// this table.
    pub fn kernel_calls(&self) -> u64 {
        self.kernel_calls
    }

    /// Distances above the diagonal, row by row.
    pub fn upper_triangle(&self) -> impl Iterator<Item = f64> + '_ {
        self.d
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row[i + 1..].iter().copied())
    }

    /// Re-resolves the threshold without recomputing distances.
    pub fn with_threshold(mut self, threshold: Threshold) -> Result<Self> {
        self.threshold = resolve_threshold(threshold, self.upper_triangle())?;
        self.mode = threshold;
        Ok(self)
    }

    /// Dumps the table as CSV: header `day,d0,...,d{N-1}`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| {
            write!(w, "day")?;
            for j in 0..self.n_days() {
                write!(w, ",d{j}")?;
            }
            writeln!(w)?;
            for (i, row) in self.d.iter().enumerate() {
                write!(w, "{i}")?;
                for v in row {
                    write!(w, ",{v}")?;
                }
                writeln!(w)?;
            }
            Ok(())
        })
    }
}

fn resolve_threshold(threshold: Threshold, distances: impl Iterator<Item = f64>) -> Result<f64> {
    match threshold {
        Threshold::Fixed(t) if t >= 0.0 && !t.is_nan() => Ok(t),
        Threshold::Fixed(t) => Err(Error::usage(format!("threshold {t} must be non-negative"))),
        Threshold::DynamicMedian => Ok(median(distances.collect()).unwrap_or(0.0)),
    }
}

/// Median of a sample (mean of the two middle values for even sizes).
pub fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let mid = n / 2;
    let (_, &mut hi, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        return Some(hi);
    }
    let lo = values[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(lo + (hi - lo) / 2.0)
}

/// Fixed threshold calibrated once: the median of all off-diagonal distances
/// pooled over the given tables.
pub fn calibrate_threshold<'a>(tables: impl IntoIterator<Item = &'a DistanceTable>) -> Result<f64> {
    let pooled: Vec<f64> = tables.into_iter().flat_map(|t| t.upper_triangle()).collect();
    median(pooled).ok_or_else(|| Error::InsufficientData("no distances to calibrate a threshold".into()))
}

/// Pairwise refined DTW distances between all days.
pub fn distance_table(
    days: &DayMatrix,
    mask: &MaskSpec,
    threshold: impl Into<Threshold>,
    exec: Execution,
) -> Result<DistanceTable> {
    let n = days.n_days();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "consumer {}: {n} day(s), need at least 2",
            days.consumer_id
        )));
    }
    check_mask(days, mask)?;
    let w = WeightMatrix::from_mask(mask);
    let calls = AtomicU64::new(0);
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let dists = exec.try_map(&pairs, |&(i, j)| {
        calls.fetch_add(1, Ordering::Relaxed);
        r_dtw(days.row(i), days.row(j), &w)
    })?;

    let mut d = vec![vec![0.0; n]; n];
    for (&(i, j), v) in pairs.iter().zip(dists) {
        d[i][j] = v;
        d[j][i] = v;
    }
    let table = DistanceTable {
        d,
        threshold: 0.0,
        mode: Threshold::Fixed(0.0),
        mask: *mask,
        kernel_calls: calls.into_inner(),
    };
    table.with_threshold(threshold.into())
}

fn check_mask(days: &DayMatrix, mask: &MaskSpec) -> Result<()> {
    if mask.m() != days.m() {
        return Err(Error::usage(format!(
            "mask is for {}-sample days but days have {} samples",
            mask.m(),
            days.m()
        )));
    }
    Ok(())
}

/// Per-day similarity-profile scores and their components.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityProfile {
    pub sp: Vec<f64>,
    pub c_hat: Vec<usize>,
    pub d_hat: Vec<f64>,
    /// Row sums behind `d_hat`, accumulated in ascending column order.
    pub d_sum: Vec<f64>,
    /// Largest off-diagonal distance.
    pub max_d: f64,
}

impl SimilarityProfile {
    pub fn len(&self) -> usize {
        self.sp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sp.is_empty()
    }

    fn rescore(&mut self) {
        let denom = (self.sp.len() - 1) as f64;
        for i in 0..self.sp.len() {
            self.d_hat[i] = self.d_sum[i] / denom;
            self.sp[i] = score(self.c_hat[i], self.d_hat[i], self.max_d);
        }
    }
}

fn score(c_hat: usize, d_hat: f64, max_d: f64) -> f64 {
    if max_d > 0.0 {
        c_hat as f64 - d_hat / max_d
    } else {
        c_hat as f64
    }
}

/// Similarity profile of a distance table; self-matches are not counted.
pub fn similarity_profile(table: &DistanceTable) -> SimilarityProfile {
    let n = table.n_days();
    let t = table.threshold;
    let mut c_hat = vec![0usize; n];
    let mut d_sum = vec![0.0f64; n];
    let mut max_d = 0.0f64;
    for (i, row) in table.d.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if j == i {
                continue;
            }
            if v <= t {
                c_hat[i] += 1;
            }
            d_sum[i] += v;
            max_d = max_d.max(v);
        }
    }
    let mut profile = SimilarityProfile {
        sp: vec![0.0; n],
        c_hat,
        d_hat: vec![0.0; n],
        d_sum,
        max_d,
    };
    profile.rescore();
    profile
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MotifMethod {
    RefinedMotif,
    MatrixProfile,
    AverageProfile,
}

impl MotifMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            MotifMethod::RefinedMotif => "refined_motif",
            MotifMethod::MatrixProfile => "matrix_profile",
            MotifMethod::AverageProfile => "average_profile",
        }
    }
}

impl fmt::Display for MotifMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MotifMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "refined_motif" | "refined-motif" | "refined" => Ok(MotifMethod::RefinedMotif),
            "matrix_profile" | "matrix-profile" => Ok(MotifMethod::MatrixProfile),
            "average_profile" | "average-profile" | "average" => Ok(MotifMethod::AverageProfile),
            other => Err(Error::usage(format!("unknown motif method `{other}`"))),
        }
    }
}

/// A consumer's representative daily pattern.
///
/// For refined motifs `values` is an observed day copied verbatim,
/// `source_day_index` its row and `sp_value` its score. For matrix-profile
/// motifs `source_day_index` is the window's sample offset into the series
/// and `sp_value` the z-normalised distance to its nearest neighbour. Average
/// profiles use 0 and the number of days averaged.
#[derive(Clone, Debug, PartialEq)]
pub struct Motif {
    pub consumer_id: String,
    pub values: Vec<f64>,
    pub source_day_index: usize,
    pub sp_value: f64,
    pub method: MotifMethod,
}

/// Day with the highest score; ties go to the smallest day index.
pub fn extract_motif(days: &DayMatrix, sp: &SimilarityProfile) -> Result<Motif> {
    if sp.len() != days.n_days() || sp.is_empty() {
        return Err(Error::usage(format!(
            "profile has {} entries for {} days",
            sp.len(),
            days.n_days()
        )));
    }
    let mut best = 0;
    for (i, &v) in sp.sp.iter().enumerate().skip(1) {
        if v > sp.sp[best] {
            best = i;
        }
    }
    Ok(Motif {
        consumer_id: days.consumer_id.clone(),
        values: days.row(best).to_vec(),
        source_day_index: best,
        sp_value: sp.sp[best],
        method: MotifMethod::RefinedMotif,
    })
}

/// Everything needed to keep one consumer's motif current as days arrive.
#[derive(Clone, Debug, PartialEq)]
pub struct MotifState {
    pub days: DayMatrix,
    pub table: DistanceTable,
    pub profile: SimilarityProfile,
    pub motif: Motif,
}

impl MotifState {
    pub fn discover(
        days: DayMatrix,
        mask: &MaskSpec,
        threshold: impl Into<Threshold>,
        exec: Execution,
    ) -> Result<Self> {
        let table = distance_table(&days, mask, threshold, exec)?;
        Self::from_table(days, table)
    }

    pub fn from_table(days: DayMatrix, table: DistanceTable) -> Result<Self> {
        if table.n_days() != days.n_days() {
            return Err(Error::usage("distance table and day matrix disagree on day count"));
        }
        let profile = similarity_profile(&table);
        let motif = extract_motif(&days, &profile)?;
        Ok(MotifState {
            days,
            table,
            profile,
            motif,
        })
    }

    /// Appends one day using `N` new distances. Returns the number of kernel
    /// calls spent.
    pub fn append_day(&mut self, new_day: &[f64]) -> Result<u64> {
        if let Threshold::DynamicMedian = self.table.mode {
            return Err(Error::usage(
                "incremental updates need a fixed threshold; recompute from scratch instead",
            ));
        }
        check_mask(&self.days, &self.table.mask)?;
        let n = self.days.n_days();
        if self.table.n_days() != n || self.profile.len() != n {
            return Err(Error::usage("table, profile and day matrix disagree on day count"));
        }
        if new_day.len() != self.table.mask.m() {
            return Err(Error::usage(format!(
                "new day has {} samples, mask expects {}",
                new_day.len(),
                self.table.mask.m()
            )));
        }

        let w = WeightMatrix::from_mask(&self.table.mask);
        let mut calls = 0u64;
        let mut fresh = Vec::with_capacity(n + 1);
        for i in 0..n {
            calls += 1;
            fresh.push(r_dtw(self.days.row(i), new_day, &w)?);
        }
        fresh.push(0.0);

        let t = self.table.threshold;
        let p = &mut self.profile;
        let (mut c_new, mut s_new) = (0usize, 0.0f64);
        for (i, &v) in fresh[..n].iter().enumerate() {
            self.table.d[i].push(v);
            if v <= t {
                p.c_hat[i] += 1;
                c_new += 1;
            }
            p.d_sum[i] += v;
            s_new += v;
            p.max_d = p.max_d.max(v);
        }
        self.table.d.push(fresh);
        self.table.kernel_calls += calls;
        p.c_hat.push(c_new);
        p.d_sum.push(s_new);
        p.d_hat.push(0.0);
        p.sp.push(0.0);
        p.rescore();

        self.days.push_day(new_day)?;
        self.motif = extract_motif(&self.days, &self.profile)?;
        Ok(calls)
    }
}

/// Functional form of [`MotifState::append_day`].
pub fn update_motif(
    table: DistanceTable,
    days: DayMatrix,
    sp: SimilarityProfile,
    new_day: &[f64],
) -> Result<(DistanceTable, DayMatrix, SimilarityProfile, Motif)> {
    let motif = extract_motif(&days, &sp)?;
    let mut state = MotifState {
        days,
        table,
        profile: sp,
        motif,
    };
    state.append_day(new_day)?;
    Ok((state.table, state.days, state.profile, state.motif))
}

/// Refined motif of one consumer in a single call.
pub fn refined_motif(
    days: &DayMatrix,
    mask: &MaskSpec,
    threshold: impl Into<Threshold>,
    exec: Execution,
) -> Result<Motif> {
    let table = distance_table(days, mask, threshold, exec)?;
    extract_motif(days, &similarity_profile(&table))
}
