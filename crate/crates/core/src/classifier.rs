//! Single-neuron classifier over motifs.
//!
//! A linear unit `u = I . a1 + b1` feeds a scaled sigmoid
//! `score = 1 / (1 + exp(-(a2 * u + b2)))`. Because the sigmoid is increasing,
//! ranking consumers only needs the dot product `I . a1` (negated when
//! `a2 < 0`).

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fsutil::{read_to_string, write_atomic};
use crate::mask::MaskSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierModel {
    pub a1: Vec<f64>,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
    pub decision_threshold: f64,
    /// When set, `a1` is held at zero outside the window.
    pub mask_applied: Option<MaskSpec>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub consumer_id: String,
    pub score: f64,
    pub linear_score: f64,
    pub label: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Magnitude of the mask-shaped initial `a1`.
    pub init_scale: f64,
    pub seed: u64,
    /// Daytime window shaping the initial weights (all ones when absent).
    pub init_mask: Option<MaskSpec>,
    /// Keep `a1` zero outside `init_mask` throughout training.
    pub constrain_to_mask: bool,
    pub decision_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 2000,
            init_scale: 0.01,
            seed: 7,
            init_mask: None,
            constrain_to_mask: false,
            decision_threshold: 0.5,
        }
    }
}

/// Per-epoch training loss; `loss_history[0]` is the loss of the initial
/// parameters and the last entry that of the returned model.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub loss_history: Vec<f64>,
    pub train_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub a1: Vec<f64>,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ClassifierModel {
    pub fn m(&self) -> usize {
        self.a1.len()
    }

    /// `I . a1`.
    pub fn linear_score(&self, motif: &[f64]) -> Result<f64> {
        self.check_len(motif)?;
        Ok(dot(motif, &self.a1))
    }

    fn logit(&self, linear: f64) -> f64 {
        self.a2 * (linear + self.b1) + self.b2
    }

    fn check_len(&self, motif: &[f64]) -> Result<()> {
        if motif.len() != self.a1.len() {
            return Err(Error::usage(format!(
                "motif has {} values, model expects {}",
                motif.len(),
                self.a1.len()
            )));
        }
        Ok(())
    }

    /// Writes `m`, then `a1`, `b1`, `a2`, `b2` and the decision threshold,
    /// one value per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| {
            writeln!(w, "{}", self.a1.len())?;
            for v in &self.a1 {
                writeln!(w, "{v}")?;
            }
            writeln!(w, "{}", self.b1)?;
            writeln!(w, "{}", self.a2)?;
            writeln!(w, "{}", self.b2)?;
            writeln!(w, "{}", self.decision_threshold)
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut next = |what: &str| -> Result<(u64, String)> {
            lines
                .next()
                .map(|(i, l)| (i as u64 + 1, l.trim().to_string()))
                .ok_or_else(|| Error::Parse {
                    line: 0,
                    message: format!("model file ends before {what}"),
                })
        };
        let (line, m) = next("m")?;
        let m: usize = m.parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad dimension `{m}`"),
        })?;
        let mut number = |what: &str| -> Result<f64> {
            let (line, v) = next(what)?;
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Parse {
                    line,
                    message: format!("bad {what} `{v}`"),
                })
        };
        let a1 = (0..m).map(|_| number("a1")).collect::<Result<Vec<_>>>()?;
        Ok(ClassifierModel {
            a1,
            b1: number("b1")?,
            a2: number("a2")?,
            b2: number("b2")?,
            decision_threshold: number("decision_threshold")?,
            mask_applied: None,
        })
    }
}

pub fn predict(model: &ClassifierModel, consumer_id: &str, motif: &[f64]) -> Result<Prediction> {
    let linear_score = model.linear_score(motif)?;
    let score = sigmoid(model.logit(linear_score));
    Ok(Prediction {
        consumer_id: consumer_id.to_string(),
        score,
        linear_score,
        label: score >= model.decision_threshold,
    })
}

/// Stable ascending argsort.
pub fn argsort(keys: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
    idx
}

/// Consumer indices in ascending score order, computed from the linear part
/// alone.
pub fn rank_consumers(model: &ClassifierModel, motifs: &[Vec<f64>]) -> Result<Vec<usize>> {
    if model.a2 == 0.0 {
        return Err(Error::DegenerateModel("a2 = 0 makes every score equal".into()));
    }
    let sign = model.a2.signum();
    let keys = motifs
        .iter()
        .map(|x| model.linear_score(x).map(|l| sign * l))
        .collect::<Result<Vec<_>>>()?;
    Ok(argsort(&keys))
}

/// Mean binary cross-entropy and its gradient.
pub fn loss_and_gradient(model: &ClassifierModel, inputs: &[Vec<f64>], labels: &[bool]) -> (f64, Gradient) {
    let k = inputs.len() as f64;
    let mut g = Gradient {
        a1: vec![0.0; model.a1.len()],
        b1: 0.0,
        a2: 0.0,
        b2: 0.0,
    };
    let mut loss = 0.0;
    for (x, &y) in inputs.iter().zip(labels) {
        let u = dot(x, &model.a1) + model.b1;
        let z = model.a2 * u + model.b2;
        let y = if y { 1.0 } else { 0.0 };
        loss += softplus(z) - y * z;
        let dz = sigmoid(z) - y;
        let du = dz * model.a2;
        for (ga, xi) in g.a1.iter_mut().zip(x) {
            *ga += du * xi;
        }
        g.b1 += du;
        g.a2 += dz * u;
        g.b2 += dz;
    }
    g.a1.iter_mut().for_each(|v| *v /= k);
    g.b1 /= k;
    g.a2 /= k;
    g.b2 /= k;
    (loss / k, g)
}

/// Full-batch gradient descent on binary cross-entropy.
pub fn train(inputs: &[Vec<f64>], labels: &[bool], cfg: &TrainConfig) -> Result<(ClassifierModel, TrainReport)> {
    if inputs.len() != labels.len() {
        return Err(Error::usage(format!(
            "{} motifs but {} labels",
            inputs.len(),
            labels.len()
        )));
    }
    if inputs.len() < 2 {
        return Err(Error::InsufficientData("training needs at least two motifs".into()));
    }
    if labels.iter().all(|&y| y) || labels.iter().all(|&y| !y) {
        return Err(Error::InsufficientData("training labels contain a single class".into()));
    }
    let m = inputs[0].len();
    if m == 0 || inputs.iter().any(|x| x.len() != m) {
        return Err(Error::usage("all motifs must share one non-zero length"));
    }
    let window = match cfg.init_mask {
        Some(mask) if mask.m() != m => {
            return Err(Error::usage(format!(
                "mask is for {}-sample motifs, inputs have {m}",
                mask.m()
            )))
        }
        Some(mask) => mask.vector(),
        None => vec![1.0; m],
    };
    let keep: Vec<f64> = if cfg.constrain_to_mask {
        window.clone()
    } else {
        vec![1.0; m]
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let a1 = window
        .iter()
        .zip(&keep)
        .map(|(w, k)| k * cfg.init_scale * (w + 0.1 * rng.gen_range(-1.0..1.0)))
        .collect();
    let mut model = ClassifierModel {
        a1,
        b1: 0.0,
        a2: 1.0,
        b2: 0.0,
        decision_threshold: cfg.decision_threshold,
        mask_applied: cfg.init_mask.filter(|_| cfg.constrain_to_mask),
    };

    let lr = cfg.learning_rate;
    let mut history = Vec::with_capacity(cfg.epochs + 1);
    for epoch in 0..=cfg.epochs {
        let (loss, g) = loss_and_gradient(&model, inputs, labels);
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        history.push(loss);
        if epoch == cfg.epochs {
            break;
        }
        for ((a, ga), k) in model.a1.iter_mut().zip(&g.a1).zip(&keep) {
            *a -= lr * ga * k;
        }
        model.b1 -= lr * g.b1;
        model.a2 -= lr * g.a2;
        model.b2 -= lr * g.b2;
    }
    if model.a1.iter().chain([&model.b1, &model.a2, &model.b2]).any(|v| !v.is_finite()) {
        return Err(Error::Divergence { epoch: cfg.epochs });
    }

    let correct = inputs
        .iter()
        .zip(labels)
        .filter(|(x, &y)| (sigmoid(model.logit(dot(x, &model.a1))) >= model.decision_threshold) == y)
        .count();
    let report = TrainReport {
        loss_history: history,
        train_accuracy: correct as f64 / inputs.len() as f64,
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_model(m: usize) -> ClassifierModel {
        ClassifierModel {
            a1: vec![0.0; m],
            b1: 0.0,
            a2: 0.0,
            b2: 0.0,
            decision_threshold: 0.5,
            mask_applied: None,
        }
    }

    #[test]
    fn zero_parameters_give_half() {
        let p = predict(&zero_model(3), "c", &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(p.score, 0.5);
        assert!(p.label);
        let mut model = zero_model(3);
        model.a1 = vec![4.0, -2.0, 9.0];
        model.a2 = 3.0;
        assert_eq!(predict(&model, "c", &[0.0; 3]).unwrap().score, 0.5);
        assert!(predict(&model, "c", &[0.0; 2]).is_err());
    }

    #[test]
    fn score_increases_with_linear_score() {
        let mut model = zero_model(2);
        model.a1 = vec![0.5, -1.0];
        model.a2 = 0.7;
        model.b1 = 0.1;
        let xs = [[0.0, 1.0], [1.0, 1.0], [2.0, 0.5], [4.0, 0.0]];
        let preds: Vec<Prediction> = xs.iter().map(|x| predict(&model, "c", x).unwrap()).collect();
        for w in preds.windows(2) {
            assert!(w[0].linear_score < w[1].linear_score);
            assert!(w[0].score < w[1].score);
        }
    }

    #[test]
    fn ranking_uses_sign_of_scale() {
        let motifs = vec![vec![3.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]];
        let mut model = zero_model(2);
        model.a1 = vec![1.0, 0.0];
        model.a2 = 2.0;
        let by_score = |m: &ClassifierModel| {
            let s: Vec<f64> = motifs.iter().map(|x| predict(m, "c", x).unwrap().score).collect();
            argsort(&s)
        };
        assert_eq!(rank_consumers(&model, &motifs).unwrap(), vec![1, 2, 0]);
        assert_eq!(rank_consumers(&model, &motifs).unwrap(), by_score(&model));
        model.a2 = -0.5;
        assert_eq!(rank_consumers(&model, &motifs).unwrap(), vec![0, 2, 1]);
        assert_eq!(rank_consumers(&model, &motifs).unwrap(), by_score(&model));
        assert_eq!(rank_consumers(&model, &motifs[..1]).unwrap(), vec![0]);
        model.a2 = 0.0;
        assert!(matches!(rank_consumers(&model, &motifs), Err(Error::DegenerateModel(_))));
    }

    #[test]
    fn two_sample_loss_decreases() {
        let inputs = vec![vec![0.0, 0.0, 0.1], vec![1.0, 1.2, 0.9]];
        let labels = vec![true, false];
        let cfg = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let (_, report) = train(&inputs, &labels, &cfg).unwrap();
        let h = &report.loss_history;
        assert_eq!(h.len(), 3);
        assert!(h[0] > h[1] && h[1] > h[2], "{h:?}");
    }

    #[test]
    fn training_errors() {
        let inputs = vec![vec![0.0; 2], vec![1.0; 2]];
        assert!(train(&inputs, &[true, true], &TrainConfig::default()).is_err());
        assert!(train(&inputs[..1], &[true], &TrainConfig::default()).is_err());
        let diverging = TrainConfig {
            learning_rate: 1e300,
            ..TrainConfig::default()
        };
        let big = vec![vec![1e3; 2], vec![-1e3; 2]];
        assert!(matches!(train(&big, &[true, false], &diverging), Err(Error::Divergence { .. })));
    }

    #[test]
    fn constrained_weights_stay_in_window() {
        let mask = MaskSpec::new(1, 3, 4).unwrap();
        let inputs = vec![vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 2.0, 2.0, 1.0], vec![0.5, 0.1, 0.0, 0.4]];
        let labels = vec![true, false, true];
        let cfg = TrainConfig {
            epochs: 50,
            init_mask: Some(mask),
            constrain_to_mask: true,
            ..TrainConfig::default()
        };
        let (model, _) = train(&inputs, &labels, &cfg).unwrap();
        assert_eq!(model.a1[0], 0.0);
        assert_eq!(model.a1[3], 0.0);
        assert!(model.a1[1] != 0.0);
        assert_eq!(model.mask_applied, Some(mask));
    }

    #[test]
    fn model_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.txt");
        let model = ClassifierModel {
            a1: vec![0.1, -1.0 / 3.0, 2.5e-9],
            b1: -0.7,
            a2: 1.0 / 7.0,
            b2: 3.0,
            decision_threshold: 0.5,
            mask_applied: None,
        };
        model.save(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 + 4);
        assert_eq!(ClassifierModel::load(&p).unwrap(), model);

        std::fs::write(&p, "2\n0.1\n").unwrap();
        assert!(matches!(ClassifierModel::load(&p), Err(Error::Parse { .. })));
    }
}
