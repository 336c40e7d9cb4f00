//! End-to-end stages: simulate, motif, train, classify, evaluate and
//! baseline.
//!
//! Each stage reads its inputs from files written by earlier stages, so any
//! stage can be rerun on its own. Artifacts of one motif method live in a
//! directory named after it inside the output directory:
//!
//! ```text
//! out/consumers.csv, out/ground_truth.csv
//! out/<method>/motifs.csv, model.txt, predictions.csv, timing.csv,
//!              train_metrics.csv, metrics.csv, histogram.csv, weights.csv,
//!              cohort.csv, resolved_config_<stage>.txt
//! out/baselines/metrics.csv, ld_distances.csv, ld_histogram.csv, resolved_config_baseline.txt
//! ```

mod config;

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{load_config, parse_override, parse_pairs, MaskChoice, RunConfig, SeasonChoice, ThresholdChoice};

use crate::baselines::{
    average_profile_motif, count_zeros, fit_load_duration_threshold, load_duration_distance, scaled_zero_threshold,
};
use crate::classifier::{self, ClassifierModel, Prediction, TrainConfig, TrainReport};
use crate::datagen::{emit_low_ratio_cohort, GroundTruth, Scenario};
use crate::error::{Error, Result};
use crate::eval::{self, CohortRow, Confusion, Metrics};
use crate::exec::{with_workers, Execution};
use crate::fsutil::{read_to_string, write_atomic};
use crate::ingest::{ingest_csv, write_csv, CsvSchema};
use crate::motif::{
    calibrate_threshold, distance_table, extract_motif, matrix_profile_motif, read_motifs, similarity_profile,
    write_motifs, Motif, MotifMethod, Threshold,
};
use crate::series::{clean_series, segment_days, slice_season, ConsumerSeries, Season};

/// Consumer ids assigned to training, chosen by a seeded shuffle of the
/// sorted ids. The training share is `round(fraction * n)`, kept within
/// `1..n` so both splits are non-empty.
pub fn training_split<'a>(ids: impl IntoIterator<Item = &'a str>, fraction: f64, seed: u64) -> HashSet<String> {
    let mut ids: Vec<&str> = ids.into_iter().collect();
    ids.sort_unstable();
    ids.dedup();
    let n = ids.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let k = if n < 2 {
        n
    } else {
        ((fraction * n as f64).round() as usize).clamp(1, n - 1)
    };
    ids[..k].iter().map(|s| s.to_string()).collect()
}

/// Records the configuration a stage ran with as
/// `resolved_config_<stage>.txt`.
fn write_resolved(cfg: &RunConfig, dir: &Path, stage: &str) -> Result<()> {
    let text = cfg.to_text();
    write_atomic(&dir.join(format!("resolved_config_{stage}.txt")), |w| w.write_all(text.as_bytes()))
}

fn execution(cfg: &RunConfig) -> Execution {
    if cfg.workers == Some(1) {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn run_pooled<R: Send>(cfg: &RunConfig, f: impl FnOnce() -> R + Send) -> R {
    with_workers(cfg.workers, f)
}

#[derive(Clone, Debug)]
pub struct SimulateOutput {
    pub n_consumers: usize,
    pub n_positive: usize,
    pub truth: GroundTruth,
}

/// Generates the synthetic population and writes `consumers.csv` and
/// `ground_truth.csv`.
pub fn simulate(cfg: &RunConfig) -> Result<SimulateOutput> {
    let exec = execution(cfg);
    let (series, truth) = run_pooled(cfg, || emit_low_ratio_cohort(&cfg.population, cfg.hard_cases, exec))?;
    write_csv(&cfg.input_path(), &series)?;
    truth.write_csv(&cfg.ground_truth_path())?;
    write_resolved(cfg, &cfg.output_dir, "simulate")?;
    Ok(SimulateOutput {
        n_consumers: series.len(),
        n_positive: truth.iter().filter(|(_, t)| t.label).count(),
        truth,
    })
}

/// Reads and cleans every consumer in the input file.
pub fn load_clean_series(cfg: &RunConfig) -> Result<Vec<ConsumerSeries>> {
    let schema = CsvSchema {
        interval_minutes: Some(cfg.population.interval_minutes),
        ..CsvSchema::default()
    };
    let raw = ingest_csv(&cfg.input_path(), &schema)?;
    if raw.is_empty() {
        return Err(Error::InsufficientData(format!(
            "{} holds no consumers",
            cfg.input_path().display()
        )));
    }
    run_pooled(cfg, || execution(cfg).try_map(&raw, |s| clean_series(s, &cfg.cleaning)))
}

fn season_slice(cfg: &RunConfig, s: &ConsumerSeries) -> Result<ConsumerSeries> {
    match cfg.season {
        SeasonChoice::All => Ok(s.clone()),
        SeasonChoice::Only(season) => seasonal(cfg, s, season),
    }
}

fn seasonal(cfg: &RunConfig, s: &ConsumerSeries, season: Season) -> Result<ConsumerSeries> {
    let sliced = slice_season(s, season, cfg.population.hemisphere)?;
    if sliced.values.is_empty() {
        return Err(Error::InsufficientData(format!(
            "consumer {} has no {} days",
            s.consumer_id,
            season.as_str()
        )));
    }
    Ok(sliced)
}

#[derive(Clone, Debug)]
pub struct MotifOutput {
    pub motifs: Vec<Motif>,
    /// Similarity threshold used by refined motifs.
    pub threshold: Option<f64>,
    pub elapsed_ms: f64,
}

/// Extracts one motif per consumer with the configured method and writes
/// `<method>/motifs.csv`.
pub fn motif(cfg: &RunConfig) -> Result<MotifOutput> {
    let series = load_clean_series(cfg)?;
    let started = Instant::now();
    let exec = execution(cfg);
    let sliced = run_pooled(cfg, || exec.try_map(&series, |s| season_slice(cfg, s)))?;
    let dir = cfg.method_dir();
    let mut resolved = cfg.clone();

    let (motifs, threshold) = match cfg.method {
        MotifMethod::RefinedMotif => {
            let mask = cfg.mask_spec()?;
            let days = exec.try_map(&sliced, segment_days)?;
            let tables = run_pooled(cfg, || {
                exec.try_map(&days, |d| distance_table(d, &mask, 0.0, Execution::Sequential))
            })?;
            let mode = match cfg.threshold {
                ThresholdChoice::Fixed(t) => Threshold::Fixed(t),
                ThresholdChoice::Dynamic => Threshold::DynamicMedian,
                ThresholdChoice::Calibrate => {
                    let train = training_split(
                        series.iter().map(|s| s.consumer_id.as_str()),
                        cfg.split_fraction,
                        cfg.split_seed,
                    );
                    let t = calibrate_threshold(
                        tables
                            .iter()
                            .zip(&days)
                            .filter(|(_, d)| train.contains(&d.consumer_id))
                            .map(|(t, _)| t),
                    )?;
                    resolved.threshold = ThresholdChoice::Fixed(t);
                    Threshold::Fixed(t)
                }
            };
            let mut motifs = Vec::with_capacity(days.len());
            let mut rescored = Vec::with_capacity(days.len());
            for (table, d) in tables.into_iter().zip(&days) {
                let table = table.with_threshold(mode)?;
                motifs.push(extract_motif(d, &similarity_profile(&table))?);
                rescored.push(table);
            }
            if cfg.dump_distance_tables {
                for (table, d) in rescored.iter().zip(&days) {
                    table.write_csv(&dir.join("distance_tables").join(format!("{}.csv", d.consumer_id)))?;
                }
            }
            let t = match mode {
                Threshold::Fixed(t) => Some(t),
                Threshold::DynamicMedian => None,
            };
            (motifs, t)
        }
        MotifMethod::MatrixProfile => {
            let m = cfg.mask_spec()?.m();
            let motifs = run_pooled(cfg, || exec.try_map(&sliced, |s| matrix_profile_motif(s, m)))?;
            (motifs, None)
        }
        MotifMethod::AverageProfile => {
            let motifs = exec.try_map(&sliced, |s| segment_days(s).and_then(|d| average_profile_motif(&d)))?;
            (motifs, None)
        }
    };
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    write_motifs(&dir.join("motifs.csv"), &motifs)?;
    write_resolved(&resolved, &dir, "motif")?;
    Ok(MotifOutput {
        motifs,
        threshold,
        elapsed_ms,
    })
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub model: ClassifierModel,
    pub report: TrainReport,
    pub train_metrics: Metrics,
}

fn labels_for(motifs: &[&Motif], truth: &GroundTruth) -> Result<Vec<bool>> {
    motifs
        .iter()
        .map(|m| {
            truth
                .get(&m.consumer_id)
                .map(|t| t.label)
                .ok_or_else(|| Error::Structural(format!("no ground truth for consumer {}", m.consumer_id)))
        })
        .collect()
}

pub fn train_config(cfg: &RunConfig) -> Result<TrainConfig> {
    let mask = cfg.mask_spec()?;
    Ok(TrainConfig {
        learning_rate: cfg.learning_rate,
        epochs: cfg.epochs,
        init_scale: cfg.init_scale,
        seed: cfg.train_seed,
        init_mask: Some(mask),
        constrain_to_mask: cfg.constrain_weights,
        decision_threshold: cfg.decision_threshold,
    })
}

/// Trains on the training split of `<method>/motifs.csv` and writes
/// `model.txt` and `train_metrics.csv`.
pub fn train(cfg: &RunConfig) -> Result<TrainOutput> {
    let dir = cfg.method_dir();
    let motifs = read_motifs(&dir.join("motifs.csv"))?;
    let truth = GroundTruth::read_csv(&cfg.ground_truth_path())?;
    let split = training_split(
        motifs.iter().map(|m| m.consumer_id.as_str()),
        cfg.split_fraction,
        cfg.split_seed,
    );
    let train: Vec<&Motif> = motifs.iter().filter(|m| split.contains(&m.consumer_id)).collect();
    let labels = labels_for(&train, &truth)?;
    let inputs: Vec<Vec<f64>> = train.iter().map(|m| m.values.clone()).collect();
    let (model, report) = classifier::train(&inputs, &labels, &train_config(cfg)?)?;
    model.save(&dir.join("model.txt"))?;

    let predictions = train
        .iter()
        .map(|m| classifier::predict(&model, &m.consumer_id, &m.values))
        .collect::<Result<Vec<_>>>()?;
    let train_metrics = eval::evaluate(&predictions, &truth, 0.0)?;
    eval::write_metrics(&dir.join("train_metrics.csv"), &[(cfg.method.to_string(), train_metrics.clone())])?;
    write_resolved(cfg, &dir, "train")?;
    Ok(TrainOutput {
        model,
        report,
        train_metrics,
    })
}

/// A prediction tagged with the split its consumer belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitPrediction {
    pub prediction: Prediction,
    pub train: bool,
}

#[derive(Clone, Debug)]
pub struct ClassifyOutput {
    pub predictions: Vec<SplitPrediction>,
    pub elapsed_ms: f64,
}

/// Scores every motif with the trained model and writes `predictions.csv`
/// and `timing.csv`. Only the scoring loop is timed.
pub fn classify(cfg: &RunConfig) -> Result<ClassifyOutput> {
    let dir = cfg.method_dir();
    let model = ClassifierModel::load(&dir.join("model.txt"))?;
    let motifs = read_motifs(&dir.join("motifs.csv"))?;
    let started = Instant::now();
    let scored = motifs
        .iter()
        .map(|m| classifier::predict(&model, &m.consumer_id, &m.values))
        .collect::<Result<Vec<_>>>()?;
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;

    let split = training_split(
        motifs.iter().map(|m| m.consumer_id.as_str()),
        cfg.split_fraction,
        cfg.split_seed,
    );
    let predictions: Vec<SplitPrediction> = scored
        .into_iter()
        .map(|p| SplitPrediction {
            train: split.contains(&p.consumer_id),
            prediction: p,
        })
        .collect();
    write_predictions(&dir.join("predictions.csv"), &predictions)?;
    eval::write_timing(&dir.join("timing.csv"), &[("classify".into(), elapsed_ms)])?;
    write_resolved(cfg, &dir, "classify")?;
    Ok(ClassifyOutput {
        predictions,
        elapsed_ms,
    })
}

const PREDICTIONS_HEADER: &str = "consumer_id,split,score,linear_score,label";

pub fn write_predictions(path: &Path, predictions: &[SplitPrediction]) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "{PREDICTIONS_HEADER}")?;
        for sp in predictions {
            let p = &sp.prediction;
            writeln!(
                w,
                "{},{},{},{},{}",
                p.consumer_id,
                if sp.train { "train" } else { "test" },
                p.score,
                p.linear_score,
                u8::from(p.label)
            )?;
        }
        Ok(())
    })
}

pub fn read_predictions(path: &Path) -> Result<Vec<SplitPrediction>> {
    let text = read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(PREDICTIONS_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{PREDICTIONS_HEADER}`"),
        });
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i as u64 + 2;
        let bad = |what: &str| Error::Parse {
            line: line_no,
            message: format!("bad {what}"),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad("field count"));
        }
        let train = match f[1] {
            "train" => true,
            "test" => false,
            _ => return Err(bad("split")),
        };
        out.push(SplitPrediction {
            prediction: Prediction {
                consumer_id: f[0].to_string(),
                score: f[2].parse().map_err(|_| bad("score"))?,
                linear_score: f[3].parse().map_err(|_| bad("linear_score"))?,
                label: match f[4] {
                    "1" => true,
                    "0" => false,
                    _ => return Err(bad("label")),
                },
            },
            train,
        });
    }
    Ok(out)
}

fn read_classify_ms(path: &Path) -> f64 {
    std::fs::read_to_string(path)
        .ok()
        .and_then(|t| {
            t.lines()
                .find_map(|l| l.strip_prefix("classify,").and_then(|v| v.parse().ok()))
        })
        .unwrap_or(0.0)
}

#[derive(Clone, Debug)]
pub struct EvaluateOutput {
    /// Metrics on the test split.
    pub metrics: Metrics,
    /// Cohort report over all consumers (pv scenario only).
    pub cohort: Option<Vec<CohortRow>>,
}

/// Scores test-split predictions and writes `metrics.csv`, `histogram.csv`,
/// `weights.csv` and, for the pv scenario, `cohort.csv`.
pub fn evaluate(cfg: &RunConfig) -> Result<EvaluateOutput> {
    let dir = cfg.method_dir();
    let predictions = read_predictions(&dir.join("predictions.csv"))?;
    let truth = GroundTruth::read_csv(&cfg.ground_truth_path())?;
    let model = ClassifierModel::load(&dir.join("model.txt"))?;
    let test: Vec<Prediction> = predictions
        .iter()
        .filter(|p| !p.train)
        .map(|p| p.prediction.clone())
        .collect();
    let metrics = eval::evaluate(&test, &truth, read_classify_ms(&dir.join("timing.csv")))?;
    eval::write_metrics(&dir.join("metrics.csv"), &[(cfg.method.to_string(), metrics.clone())])?;

    let scores = test
        .iter()
        .map(|p| {
            let label = truth.get(&p.consumer_id).map(|t| t.label).unwrap_or(false);
            (p.score, label)
        })
        .collect::<Vec<_>>();
    eval::export_histogram(&dir.join("histogram.csv"), &scores, cfg.histogram_bins)?;
    eval::write_weights(&dir.join("weights.csv"), &model)?;

    let cohort = if cfg.scenario() == Scenario::Pv {
        let all: Vec<Prediction> = predictions.into_iter().map(|p| p.prediction).collect();
        Some(eval::cohort_report(&dir.join("cohort.csv"), &truth, &all)?)
    } else {
        None
    };
    write_resolved(cfg, &dir, "evaluate")?;
    Ok(EvaluateOutput { metrics, cohort })
}

/// Runs motif, train, classify and evaluate in sequence.
pub fn run_method(cfg: &RunConfig) -> Result<EvaluateOutput> {
    motif(cfg)?;
    train(cfg)?;
    classify(cfg)?;
    evaluate(cfg)
}

#[derive(Clone, Debug)]
pub struct BaselineOutput {
    pub metrics: Vec<(String, Metrics)>,
    pub load_duration_threshold: Option<f64>,
}

/// Test-split metrics for the all-negative predictor, Counting Zeros and
/// Load Duration (each when enabled), written to `baselines/metrics.csv`.
pub fn baseline(cfg: &RunConfig) -> Result<BaselineOutput> {
    let series = load_clean_series(cfg)?;
    let truth = GroundTruth::read_csv(&cfg.ground_truth_path())?;
    let split = training_split(
        series.iter().map(|s| s.consumer_id.as_str()),
        cfg.split_fraction,
        cfg.split_seed,
    );
    let test_ids: Vec<&str> = series
        .iter()
        .map(|s| s.consumer_id.as_str())
        .filter(|id| !split.contains(*id))
        .collect();
    let dir = cfg.baseline_dir();
    let exec = execution(cfg);
    let mut rows = Vec::new();

    rows.push((
        "all_negative".to_string(),
        eval::evaluate_labels(test_ids.iter().map(|&id| (id, false)), &truth, 0.0)?,
    ));

    if cfg.counting_zeros {
        let started = Instant::now();
        let labels = run_pooled(cfg, || {
            exec.try_map(&series, |s| {
                let sliced = season_slice(cfg, s)?;
                let threshold = scaled_zero_threshold(sliced.values.len(), sliced.interval_minutes);
                Ok::<_, Error>(count_zeros(&sliced.values, cfg.zero_epsilon) >= threshold)
            })
        })?;
        let ms = started.elapsed().as_secs_f64() * 1e3;
        let test = series
            .iter()
            .zip(&labels)
            .filter(|(s, _)| !split.contains(&s.consumer_id))
            .map(|(s, &l)| (s.consumer_id.as_str(), l));
        rows.push(("counting_zeros".to_string(), eval::evaluate_labels(test, &truth, ms)?));
    }

    let mut ld_threshold = None;
    if cfg.load_duration {
        let distances = run_pooled(cfg, || {
            exec.try_map(&series, |s| {
                let summer = seasonal(cfg, s, Season::Summer)?;
                let winter = seasonal(cfg, s, Season::Winter)?;
                load_duration_distance(&summer.values, &winter.values, cfg.ld_q)
            })
        })?;
        let mut train_d = Vec::new();
        let mut train_y = Vec::new();
        for (s, &d) in series.iter().zip(&distances) {
            if split.contains(&s.consumer_id) {
                let t = truth
                    .get(&s.consumer_id)
                    .ok_or_else(|| Error::Structural(format!("no ground truth for consumer {}", s.consumer_id)))?;
                train_d.push(d);
                train_y.push(t.label);
            }
        }
        let threshold = fit_load_duration_threshold(&train_d, &train_y)?;
        ld_threshold = Some(threshold);
        let started = Instant::now();
        let labels: Vec<bool> = distances.iter().map(|&d| d >= threshold).collect();
        let ms = started.elapsed().as_secs_f64() * 1e3;
        let test = series
            .iter()
            .zip(&labels)
            .filter(|(s, _)| !split.contains(&s.consumer_id))
            .map(|(s, &l)| (s.consumer_id.as_str(), l));
        rows.push(("load_duration".to_string(), eval::evaluate_labels(test, &truth, ms)?));

        write_atomic(&dir.join("ld_distances.csv"), |w| {
            writeln!(w, "consumer_id,split,distance,label")?;
            for (s, d) in series.iter().zip(&distances) {
                let label = truth.get(&s.consumer_id).is_some_and(|t| t.label);
                let tag = if split.contains(&s.consumer_id) { "train" } else { "test" };
                writeln!(w, "{},{tag},{d},{}", s.consumer_id, u8::from(label))?;
            }
            Ok(())
        })?;
        let scored: Vec<(f64, bool)> = series
            .iter()
            .zip(&distances)
            .map(|(s, &d)| (d, truth.get(&s.consumer_id).is_some_and(|t| t.label)))
            .collect();
        let hi = distances.iter().copied().fold(0.0, f64::max);
        let hi = if hi > 0.0 { hi } else { 1.0 };
        eval::export_histogram_range(&dir.join("ld_histogram.csv"), &scored, cfg.histogram_bins, 0.0, hi)?;
    }

    eval::write_metrics(&dir.join("metrics.csv"), &rows)?;
    write_resolved(cfg, &dir, "baseline")?;
    Ok(BaselineOutput {
        metrics: rows,
        load_duration_threshold: ld_threshold,
    })
}

/// Confusion of the given predictions restricted to the test split.
pub fn test_confusion(predictions: &[SplitPrediction], truth: &GroundTruth) -> Confusion {
    Confusion::from_pairs(predictions.iter().filter(|p| !p.train).filter_map(|p| {
        truth
            .get(&p.prediction.consumer_id)
            .map(|t| (p.prediction.label, t.label))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_exact_and_seeded() {
        let ids: Vec<String> = (0..600).map(|i| format!("c{i:05}")).collect();
        let a = training_split(ids.iter().map(String::as_str), 0.75, 1);
        assert_eq!(a.len(), 450);
        let b = training_split(ids.iter().rev().map(String::as_str), 0.75, 1);
        assert_eq!(a, b);
        let c = training_split(ids.iter().map(String::as_str), 0.75, 2);
        assert_ne!(a, c);
        assert_eq!(training_split(["a", "b"], 0.99, 0).len(), 1);
        assert_eq!(training_split(["a", "b"], 0.01, 0).len(), 1);
    }

    #[test]
    fn small_pipeline_runs() {
        let dir = tempfile::tempdir().unwrap();
        let pairs = [
            ("output_dir", dir.path().to_str().unwrap()),
            ("n_consumers", "24"),
            ("days", "6"),
            ("epochs", "50"),
        ];
        let cfg = RunConfig::from_pairs(&pairs).unwrap();
        simulate(&cfg).unwrap();
        let out = run_method(&cfg).unwrap();
        assert_eq!(out.metrics.confusion.total(), 6);
        assert_eq!(out.cohort.unwrap().len(), 24);
        let base = baseline(&cfg).unwrap();
        assert_eq!(base.metrics.len(), 2);
        for f in ["motifs.csv", "model.txt", "predictions.csv", "metrics.csv", "histogram.csv", "weights.csv"] {
            assert!(cfg.method_dir().join(f).is_file(), "{f}");
        }
        let resolved = read_to_string(&cfg.method_dir().join("resolved_config_motif.txt")).unwrap();
        assert!(resolved.contains("threshold = "));
        assert!(!resolved.contains("threshold = calibrate"));
    }
}
