//! Classification metrics, score histograms and the per-consumer cohort
//! report.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use crate::classifier::{ClassifierModel, Prediction};
use crate::datagen::GroundTruth;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

/// Confusion counts with the positive class being the PV owner or
/// electric-heating user.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Confusion {
    /// Tallies `(predicted, actual)` pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut c = Confusion::default();
        for (p, y) in pairs {
            match (p, y) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall; 0 when both are 0.
    pub fn f_score(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub confusion: Confusion,
    pub wall_time_classify_ms: f64,
}

impl Metrics {
    pub fn from_confusion(confusion: Confusion, wall_time_classify_ms: f64) -> Self {
        Metrics {
            accuracy: confusion.accuracy(),
            precision: confusion.precision(),
            recall: confusion.recall(),
            f_score: confusion.f_score(),
            confusion,
            wall_time_classify_ms,
        }
    }
}

/// Scores predicted labels against ground truth. Every consumer must be known
/// to `truth`.
pub fn evaluate_labels<'a>(
    labels: impl IntoIterator<Item = (&'a str, bool)>,
    truth: &GroundTruth,
    wall_time_classify_ms: f64,
) -> Result<Metrics> {
    let mut pairs = Vec::new();
    for (id, predicted) in labels {
        let t = truth
            .get(id)
            .ok_or_else(|| Error::Structural(format!("no ground truth for consumer {id}")))?;
        pairs.push((predicted, t.label));
    }
    Ok(Metrics::from_confusion(Confusion::from_pairs(pairs), wall_time_classify_ms))
}

pub fn evaluate(predictions: &[Prediction], truth: &GroundTruth, wall_time_classify_ms: f64) -> Result<Metrics> {
    evaluate_labels(
        predictions.iter().map(|p| (p.consumer_id.as_str(), p.label)),
        truth,
        wall_time_classify_ms,
    )
}

pub const METRICS_HEADER: &str = "method,accuracy,precision,recall,f_score,tp,fp,tn,fn";

/// Writes one metrics row per method. Wall time is left out so reruns with
/// the same seed produce identical files; see [`write_timing`].
pub fn write_metrics(path: &Path, rows: &[(String, Metrics)]) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "{METRICS_HEADER}")?;
        for (method, m) in rows {
            let c = m.confusion;
            writeln!(
                w,
                "{method},{},{},{},{},{},{},{},{}",
                m.accuracy, m.precision, m.recall, m.f_score, c.tp, c.fp, c.tn, c.fn_
            )?;
        }
        Ok(())
    })
}

pub fn write_timing(path: &Path, rows: &[(String, f64)]) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "stage,wall_time_ms")?;
        for (stage, ms) in rows {
            writeln!(w, "{stage},{ms}")?;
        }
        Ok(())
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count_negative: usize,
    pub count_positive: usize,
}

/// Equal-width bins over `[lo, hi]`; values outside are clamped into the
/// end bins.
pub fn histogram(scores: &[(f64, bool)], bins: usize, lo: f64, hi: f64) -> Result<Vec<HistogramBin>> {
    if bins < 1 {
        return Err(Error::usage("histogram needs at least one bin"));
    }
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
        return Err(Error::usage(format!("histogram range [{lo}, {hi}] is empty")));
    }
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|k| HistogramBin {
            lo: lo + k as f64 * width,
            hi: if k + 1 == bins { hi } else { lo + (k + 1) as f64 * width },
            count_negative: 0,
            count_positive: 0,
        })
        .collect();
    for &(s, positive) in scores {
        let k = (((s - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        if positive {
            out[k].count_positive += 1;
        } else {
            out[k].count_negative += 1;
        }
    }
    Ok(out)
}

/// Writes `bin_lo,bin_hi,count_negative,count_positive` over `[lo, hi]`.
/// Empty input gives a header-only file.
pub fn export_histogram_range(path: &Path, scores: &[(f64, bool)], bins: usize, lo: f64, hi: f64) -> Result<()> {
    let rows = histogram(scores, bins, lo, hi)?;
    write_atomic(path, |w| {
        writeln!(w, "bin_lo,bin_hi,count_negative,count_positive")?;
        if scores.is_empty() {
            return Ok(());
        }
        for b in &rows {
            writeln!(w, "{},{},{},{}", b.lo, b.hi, b.count_negative, b.count_positive)?;
        }
        Ok(())
    })
}

/// Histogram of sigmoid scores over `[0, 1]`.
pub fn export_histogram(path: &Path, scores: &[(f64, bool)], bins: usize) -> Result<()> {
    export_histogram_range(path, scores, bins, 0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CohortRow {
    pub consumer_id: String,
    pub label: bool,
    pub predicted: bool,
    pub score: f64,
    pub capacity_or_multiplier: f64,
    /// Total generation over total daytime consumption.
    pub ratio: f64,
}

impl CohortRow {
    pub fn correct(&self) -> bool {
        self.label == self.predicted
    }
}

/// One row per prediction, sorted by generation-to-daytime-consumption ratio
/// descending (ties by consumer id).
pub fn cohort_rows(truth: &GroundTruth, predictions: &[Prediction]) -> Result<Vec<CohortRow>> {
    let mut rows = Vec::with_capacity(predictions.len());
    for p in predictions {
        let t = truth.get(&p.consumer_id).ok_or_else(|| {
            Error::Structural(format!("no generation metadata for consumer {}", p.consumer_id))
        })?;
        let ratio = if t.total_daytime_consumption > 0.0 {
            t.total_generation / t.total_daytime_consumption
        } else {
            0.0
        };
        rows.push(CohortRow {
            consumer_id: p.consumer_id.clone(),
            label: t.label,
            predicted: p.label,
            score: p.score,
            capacity_or_multiplier: t.capacity_or_multiplier,
            ratio,
        });
    }
    rows.sort_by(|a, b| b.ratio.total_cmp(&a.ratio).then_with(|| a.consumer_id.cmp(&b.consumer_id)));
    Ok(rows)
}

pub fn write_cohort(path: &Path, rows: &[CohortRow]) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "consumer_id,label,predicted,correct,score,capacity_or_multiplier,ratio")?;
        for r in rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.consumer_id,
                u8::from(r.label),
                u8::from(r.predicted),
                u8::from(r.correct()),
                r.score,
                r.capacity_or_multiplier,
                r.ratio
            )?;
        }
        Ok(())
    })
}

/// Builds and writes the cohort report.
pub fn cohort_report(path: &Path, truth: &GroundTruth, predictions: &[Prediction]) -> Result<Vec<CohortRow>> {
    let rows = cohort_rows(truth, predictions)?;
    write_cohort(path, &rows)?;
    Ok(rows)
}

/// Fraction of positive consumers whose ratio is strictly below that of each
/// positive consumer, keyed by consumer id. 0 is the lowest ratio.
pub fn positive_ratio_ranks(rows: &[CohortRow]) -> HashMap<String, f64> {
    let mut pos: Vec<&CohortRow> = rows.iter().filter(|r| r.label).collect();
    pos.sort_by(|a, b| a.ratio.total_cmp(&b.ratio));
    let n = pos.len() as f64;
    let mut out = HashMap::new();
    for r in &pos {
        let below = pos.partition_point(|x| x.ratio < r.ratio);
        out.insert(r.consumer_id.clone(), below as f64 / n);
    }
    out
}

/// Writes `t,a1` for plotting the learned weight profile.
pub fn write_weights(path: &Path, model: &ClassifierModel) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "t,a1")?;
        for (t, v) in model.a1.iter().enumerate() {
            writeln!(w, "{t},{v}")?;
        }
        Ok(())
    })
}
