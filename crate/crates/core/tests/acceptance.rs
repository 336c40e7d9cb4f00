#![allow(clippy::needless_range_loop)]

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::HashMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use refined_motif::classifier::{self, argsort, loss_and_gradient, ClassifierModel};
use refined_motif::distance::{dtw, euclidean, r_dtw};
use refined_motif::eval::positive_ratio_ranks;
use refined_motif::mask::{MaskSpec, WeightMatrix};
use refined_motif::motif::{distance_table, extract_motif, similarity_profile, DistanceTable, MotifState};
use refined_motif::pipeline::{self, RunConfig};
use refined_motif::series::DayMatrix;
use refined_motif::Execution;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn c1_kernel_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ones = WeightMatrix::ones(48);
    let mut worst = 0.0f64;
    let mut bound_violations = 0;
    for _ in 0..1000 {
        let x = random_vec(&mut rng, 48, 0.0, 3.0);
        let y = random_vec(&mut rng, 48, 0.0, 3.0);
        let d = dtw(&x, &y).unwrap();
        worst = worst.max((r_dtw(&x, &y, &ones).unwrap() - d).abs());
        if d > euclidean(&x, &y).unwrap() {
            bound_violations += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-9 && bound_violations == 0 && secs < 10.0,
        format!("max |r_dtw(ones) - dtw| = {worst:e}, dtw > ED on {bound_violations} pairs, {secs:.2} s"),
    )
}

fn c2_time_shift() -> Outcome {
    let (a, b) = ([0.0, 0.0, 1.0], [0.0, 1.0, 1.0]);
    let d = dtw(&a, &b).unwrap();
    let e = euclidean(&a, &b).unwrap();
    outcome(d == 0.0 && e == 1.0, format!("dtw = {d}, euclidean = {e}"))
}

/// Similarity profile written straight from the definitions: count of other
/// days within T, mean distance to other days summed in ascending order,
/// normalised by the largest off-diagonal distance.
fn oracle_profile(d: &[Vec<f64>], t: f64) -> (Vec<f64>, Vec<usize>, Vec<f64>) {
    let n = d.len();
    let mut max_d = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j && d[i][j] > max_d {
                max_d = d[i][j];
            }
        }
    }
    let mut sp = Vec::new();
    let mut c = Vec::new();
    let mut dh = Vec::new();
    for i in 0..n {
        let mut count = 0;
        let mut sum = 0.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            if d[i][j] <= t {
                count += 1;
            }
            sum += d[i][j];
        }
        let mean = sum / (n - 1) as f64;
        c.push(count);
        dh.push(mean);
        sp.push(if max_d == 0.0 { count as f64 } else { count as f64 - mean / max_d });
    }
    (sp, c, dh)
}

fn table_rows(t: &DistanceTable) -> Vec<Vec<f64>> {
    (0..t.n_days()).map(|i| t.row(i).to_vec()).collect()
}

fn random_days(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for _ in 0..n {
        if !rows.is_empty() && rng.gen_bool(0.15) {
            let k = rng.gen_range(0..rows.len());
            rows.push(rows[k].clone());
        } else {
            rows.push(random_vec(rng, m, 0.0, 2.0));
        }
    }
    rows
}

fn c3_profile_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = 24;
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.gen_range(10..=30);
        let days = DayMatrix::new("x", random_days(&mut rng, n, m)).unwrap();
        let start = rng.gen_range(0..m - 1);
        let mask = MaskSpec::new(start, rng.gen_range(start + 1..=m), m).unwrap();
        let probe = distance_table(&days, &mask, 0.0, Execution::Sequential).unwrap();
        let pooled: Vec<f64> = probe.upper_triangle().collect();
        let t = pooled[rng.gen_range(0..pooled.len())];
        let table = probe.with_threshold(t.into()).unwrap();
        let got = similarity_profile(&table);
        let (sp, c, dh) = oracle_profile(&table_rows(&table), t);
        let same = got.sp.iter().zip(&sp).all(|(a, b)| a.to_bits() == b.to_bits())
            && got.c_hat == c
            && got.d_hat.iter().zip(&dh).all(|(a, b)| a.to_bits() == b.to_bits());
        let mut best = 0;
        for i in 1..n {
            if sp[i] > sp[best] {
                best = i;
            }
        }
        let motif = extract_motif(&days, &got).unwrap();
        if !same || motif.source_day_index != best || motif.values != days.row(best) {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} of 200 instances differ from the oracle"))
}

fn c4_incremental() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let m = 24;
    let mask = MaskSpec::new(6, 18, m).unwrap();
    let mut mismatches = 0;
    let mut wrong_calls = 0;
    let mut appends = 0;
    for _ in 0..20 {
        let rows = random_days(&mut rng, 20, m);
        let t = rng.gen_range(0.5..3.0);
        let start = rng.gen_range(2..6);
        let days = DayMatrix::new("x", rows[..start].to_vec()).unwrap();
        let mut state = MotifState::discover(days, &mask, t, Execution::Sequential).unwrap();
        for (k, day) in rows.iter().enumerate().skip(start) {
            let calls = state.append_day(day).unwrap();
            appends += 1;
            if calls != k as u64 {
                wrong_calls += 1;
            }
            let full_days = DayMatrix::new("x", rows[..=k].to_vec()).unwrap();
            let full = MotifState::discover(full_days, &mask, t, Execution::Sequential).unwrap();
            let bitwise = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits());
            if !bitwise(&state.profile.sp, &full.profile.sp)
                || state.profile.c_hat != full.profile.c_hat
                || state.motif != full.motif
            {
                mismatches += 1;
            }
        }
    }
    outcome(
        mismatches == 0 && wrong_calls == 0,
        format!("{appends} appends: {mismatches} differ from full recompute, {wrong_calls} with kernel calls != N"),
    )
}

fn c5_ordering() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = 48;
    let mut mismatches = 0;
    for _ in 0..100 {
        let model = ClassifierModel {
            a1: random_vec(&mut rng, m, -0.1, 0.1),
            b1: rng.gen_range(-1.0..1.0),
            a2: rng.gen_range(0.05..2.0),
            b2: rng.gen_range(-1.0..1.0),
            decision_threshold: 0.5,
            mask_applied: None,
        };
        let motifs: Vec<Vec<f64>> = (0..100).map(|_| random_vec(&mut rng, m, 0.0, 2.0)).collect();
        let preds: Vec<_> = motifs.iter().map(|x| classifier::predict(&model, "x", x).unwrap()).collect();
        let by_score = argsort(&preds.iter().map(|p| p.score).collect::<Vec<_>>());
        let by_linear = argsort(&preds.iter().map(|p| p.linear_score).collect::<Vec<_>>());
        if by_score != by_linear || classifier::rank_consumers(&model, &motifs).unwrap() != by_score {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} of 100 model/batch pairs order differently"))
}

fn c6_gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let m = rng.gen_range(2..=8);
        let k = rng.gen_range(3..=10);
        let inputs: Vec<Vec<f64>> = (0..k).map(|_| random_vec(&mut rng, m, 0.0, 2.0)).collect();
        let labels: Vec<bool> = (0..k).map(|i| i % 2 == 0).collect();
        let model = ClassifierModel {
            a1: random_vec(&mut rng, m, -1.0, 1.0),
            b1: rng.gen_range(-1.0..1.0),
            a2: rng.gen_range(-2.0..2.0),
            b2: rng.gen_range(-1.0..1.0),
            decision_threshold: 0.5,
            mask_applied: None,
        };
        let (_, g) = loss_and_gradient(&model, &inputs, &labels);
        let analytic: Vec<f64> = g.a1.iter().copied().chain([g.b1, g.a2, g.b2]).collect();
        let h = 1e-6;
        let numeric: Vec<f64> = (0..m + 3)
            .map(|p| {
                let shifted = |delta: f64| {
                    let mut x = model.clone();
                    match p {
                        p if p < m => x.a1[p] += delta,
                        p if p == m => x.b1 += delta,
                        p if p == m + 1 => x.a2 += delta,
                        _ => x.b2 += delta,
                    }
                    loss_and_gradient(&x, &inputs, &labels).0
                };
                (shifted(h) - shifted(-h)) / (2.0 * h)
            })
            .collect();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        let rel = norm(&diff) / norm(&analytic).max(norm(&numeric)).max(1e-12);
        worst = worst.max(rel);
    }
    outcome(worst < 1e-5, format!("worst relative error {worst:.2e}"))
}

fn config(dir: &Path, extra: &[(&str, &str)]) -> RunConfig {
    let mut pairs: Vec<(&str, &str)> = vec![("output_dir", dir.to_str().unwrap())];
    pairs.extend_from_slice(extra);
    RunConfig::from_pairs(&pairs).unwrap()
}

fn metric_of(rows: &[(String, refined_motif::eval::Metrics)], name: &str) -> refined_motif::eval::Metrics {
    rows.iter().find(|(n, _)| n == name).unwrap().1.clone()
}

struct PvRun {
    rm_accuracy: f64,
    rm_f: f64,
    mp_accuracy: f64,
    cz_accuracy: f64,
    classify_ms: f64,
    seconds: f64,
}

fn run_pv(dir: &Path) -> PvRun {
    let started = Instant::now();
    let cfg = config(dir, &[]);
    pipeline::simulate(&cfg).unwrap();
    let rm = pipeline::run_method(&cfg).unwrap();
    let classify_ms = pipeline::classify(&cfg).unwrap().elapsed_ms;
    let mp_cfg = config(dir, &[("method", "matrix_profile")]);
    let mp = pipeline::run_method(&mp_cfg).unwrap();
    let base = pipeline::baseline(&cfg).unwrap();
    PvRun {
        rm_accuracy: rm.metrics.accuracy,
        rm_f: rm.metrics.f_score,
        mp_accuracy: mp.metrics.accuracy,
        cz_accuracy: metric_of(&base.metrics, "counting_zeros").accuracy,
        classify_ms,
        seconds: started.elapsed().as_secs_f64(),
    }
}

fn c7_pv(run: &PvRun) -> Outcome {
    let gap = run.rm_accuracy - run.mp_accuracy;
    outcome(
        run.rm_accuracy >= 0.90
            && run.rm_f >= 0.90
            && (0.75..=1.0).contains(&run.cz_accuracy)
            && gap >= 0.10
            && run.seconds <= 300.0,
        format!(
            "refined motif acc {:.4} F {:.4}; counting zeros acc {:.4}; matrix profile acc {:.4} ({:+.1} pp); {:.1} s",
            run.rm_accuracy,
            run.rm_f,
            run.cz_accuracy,
            run.mp_accuracy,
            -100.0 * gap,
            run.seconds
        ),
    )
}

fn c8_classify_speed(run: &PvRun) -> Outcome {
    outcome(
        run.classify_ms <= 50.0,
        format!("600 motifs classified in {:.3} ms", run.classify_ms),
    )
}

fn c9_update_speed(dir: &Path) -> Outcome {
    let cfg = config(dir, &[]);
    let series = pipeline::load_clean_series(&cfg).unwrap();
    let days = refined_motif::segment_days(&series[0]).unwrap();
    let rows = days.rows().to_vec();
    let base = DayMatrix::new(days.consumer_id.clone(), rows[..89].to_vec()).unwrap();
    let mask = cfg.mask_spec().unwrap();
    let mut state = MotifState::discover(base, &mask, 1.0, Execution::Sequential).unwrap();
    let started = Instant::now();
    let calls = state.append_day(&rows[89]).unwrap();
    let ms = started.elapsed().as_secs_f64() * 1e3;
    outcome(
        ms <= 300.0 && state.days.n_days() == 90,
        format!("update to N=90 took {ms:.3} ms with {calls} kernel calls"),
    )
}

struct HeatingRun {
    rm_f: f64,
    rm_accuracy: f64,
    all_negative_f: f64,
    ld: refined_motif::eval::Metrics,
}

fn run_heating(dir: &Path) -> HeatingRun {
    let cfg = config(dir, &[("scenario", "heating")]);
    pipeline::simulate(&cfg).unwrap();
    let rm = pipeline::run_method(&cfg).unwrap();
    let base = pipeline::baseline(&cfg).unwrap();
    HeatingRun {
        rm_f: rm.metrics.f_score,
        rm_accuracy: rm.metrics.accuracy,
        all_negative_f: metric_of(&base.metrics, "all_negative").f_score,
        ld: metric_of(&base.metrics, "load_duration"),
    }
}

fn c10_heating(run: &HeatingRun) -> Outcome {
    outcome(
        run.rm_f >= 0.70 && run.all_negative_f == 0.0,
        format!(
            "refined motif F {:.4} (acc {:.4}); all-negative F {}; load duration acc {:.4} F {:.4}",
            run.rm_f, run.rm_accuracy, run.all_negative_f, run.ld.accuracy, run.ld.f_score
        ),
    )
}

fn c11_hard_cases(dir: &Path) -> Outcome {
    let cfg = config(dir, &[("hard_cases", "2")]);
    let sim = pipeline::simulate(&cfg).unwrap();
    let out = pipeline::run_method(&cfg).unwrap();
    let rows = out.cohort.expect("pv cohort report");
    let ranks: HashMap<String, f64> = positive_ratio_ranks(&rows);
    let hard: Vec<&str> = sim.truth.iter().filter(|(_, t)| t.hard_case).map(|(id, _)| id).collect();
    let missed: Vec<(String, f64)> = rows
        .iter()
        .filter(|r| r.label && !r.predicted)
        .map(|r| (r.consumer_id.clone(), ranks[&r.consumer_id]))
        .collect();
    let outside = missed.iter().filter(|(_, rank)| *rank >= 0.1).count();
    let hard_detail: Vec<String> = hard
        .iter()
        .map(|id| {
            let r = rows.iter().find(|r| r.consumer_id == *id).unwrap();
            format!("{id} rank {:.3} {}", ranks[*id], if r.correct() { "correct" } else { "missed" })
        })
        .collect();
    let written = cfg.method_dir().join("cohort.csv").is_file();
    outcome(
        outside == 0 && written && hard.len() == 2,
        format!(
            "{} missed PV owners, {outside} outside the bottom decile; hard cases: {}",
            missed.len(),
            hard_detail.join(", ")
        ),
    )
}

fn same_bytes(a: &Path, b: &Path, files: &[&str]) -> Vec<String> {
    files
        .iter()
        .filter(|f| std::fs::read(a.join(f)).unwrap() != std::fs::read(b.join(f)).unwrap())
        .map(|f| f.to_string())
        .collect()
}

fn c12_determinism(pv: [&Path; 2], heating: [&Path; 2]) -> Outcome {
    let pv_files = ["refined_motif/metrics.csv", "matrix_profile/metrics.csv", "baselines/metrics.csv"];
    let heating_files = ["refined_motif/metrics.csv", "baselines/metrics.csv"];
    let mut differing = same_bytes(pv[0], pv[1], &pv_files);
    differing.extend(same_bytes(heating[0], heating[1], &heating_files).into_iter().map(|f| format!("heating {f}")));
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} metrics files identical across reruns", pv_files.len() + heating_files.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |n: u32, name: &'static str, o: Outcome| {
        println!("[{}] criterion {n:>2}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };

    report(1, "distance-kernel oracle equivalence", c1_kernel_oracle());
    report(2, "time-shift tolerance", c2_time_shift());
    report(3, "similarity-profile oracle", c3_profile_oracle());
    report(4, "incremental-update equivalence", c4_incremental());
    report(5, "score/linear ordering invariance", c5_ordering());
    report(6, "gradient correctness", c6_gradient());

    let root = tempfile::tempdir().unwrap();
    let pv_a = root.path().join("pv_a");
    let pv_b = root.path().join("pv_b");
    let heat_a = root.path().join("heating_a");
    let heat_b = root.path().join("heating_b");

    let pv = run_pv(&pv_a);
    report(7, "synthetic PV end-to-end", c7_pv(&pv));
    report(8, "classification speed", c8_classify_speed(&pv));
    report(9, "motif update speed", c9_update_speed(&pv_a));
    let heating = run_heating(&heat_a);
    report(10, "synthetic heating end-to-end", c10_heating(&heating));
    report(11, "hard-case diagnostic", c11_hard_cases(&root.path().join("pv_hard")));
    run_pv(&pv_b);
    run_heating(&heat_b);
    report(12, "determinism", c12_determinism([&pv_a, &pv_b], [&heat_a, &heat_b]));

    let failed = results.iter().filter(|(_, _, o)| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
