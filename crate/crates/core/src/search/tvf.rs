use std::path::Path;

use rand::{Rng, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::experience::Experience;
use super::features::{FeatureScales, FeatureVector, FEATURE_DIM, FEATURE_SCHEMA};
use super::{ActionView, ValueFunction};
use crate::error::{Error, Result};
use crate::tensor_file::{self, NamedTensor};

const MAGIC: &[u8; 8] = b"CPTVFNN\0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TvfHyper {
    pub hidden: usize,
    pub learning_rate: f64,
    /// A batch at least as large as the training split means full-batch
    /// gradient descent.
    pub batch_size: usize,
    pub epochs: usize,
    /// Fraction of records held out for model selection.
    pub holdout: f64,
    pub seed: u64,
}

impl Default for TvfHyper {
    fn default() -> Self {
        TvfHyper {
            hidden: 32,
            learning_rate: 0.01,
            batch_size: 64,
            epochs: 200,
            holdout: 0.2,
            seed: 1,
        }
    }
}

impl TvfHyper {
    fn check(&self) -> Result<()> {
        if self.hidden == 0 || self.batch_size == 0 {
            return Err(Error::Config("hidden width and batch size must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.holdout) {
            return Err(Error::Config("holdout fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// One-hidden-layer rectifier network over the feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueParams {
    pub hyper: TvfHyper,
    pub scales: FeatureScales,
    /// `FEATURE_DIM x hidden`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    feature_schema: u32,
    hyper: TvfHyper,
    scales: FeatureScales,
}

impl ValueParams {
    pub fn init(hyper: &TvfHyper, scales: FeatureScales, seed: u64) -> Result<Self> {
        hyper.check()?;
        let h = hyper.hidden;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a1 = (6.0 / FEATURE_DIM as f64).sqrt();
        let a2 = (6.0 / h as f64).sqrt() * 0.1;
        Ok(ValueParams {
            hyper: hyper.clone(),
            scales,
            w1: (0..FEATURE_DIM * h).map(|_| rng.gen_range(-a1..a1)).collect(),
            b1: vec![0.01; h],
            w2: (0..h).map(|_| rng.gen_range(-a2..a2)).collect(),
            b2: 0.0,
        })
    }

    fn hidden_pre(&self, x: &FeatureVector, pre: &mut [f64]) {
        let h = self.hyper.hidden;
        pre.copy_from_slice(&self.b1);
        for (i, &xi) in x.iter().enumerate() {
            let row = &self.w1[i * h..(i + 1) * h];
            for (p, &w) in pre.iter_mut().zip(row) {
                *p += xi * w;
            }
        }
    }

    pub fn predict(&self, x: &FeatureVector) -> f64 {
        let mut pre = vec![0.0; self.hyper.hidden];
        self.hidden_pre(x, &mut pre);
        self.b2 + pre.iter().zip(&self.w2).map(|(p, w)| p.max(0.0) * w).sum::<f64>()
    }

    fn is_finite(&self) -> bool {
        self.b2.is_finite() && self.w1.iter().chain(&self.b1).chain(&self.w2).all(|v| v.is_finite())
    }

    fn to_named(&self) -> Vec<NamedTensor> {
        let h = self.hyper.hidden;
        vec![
            NamedTensor::new("w1", vec![FEATURE_DIM, h], self.w1.clone()),
            NamedTensor::new("b1", vec![h], self.b1.clone()),
            NamedTensor::new("w2", vec![h], self.w2.clone()),
            NamedTensor::new("b2", vec![], vec![self.b2]),
        ]
    }

    /// Binary tensor file plus a JSON sidecar (same stem) holding the
    /// hyperparameters, feature scales and feature schema version.
    pub fn save(&self, path: &Path) -> Result<()> {
        tensor_file::write_file(path, MAGIC, &self.to_named())?;
        let sidecar = path.with_extension("json");
        let json = serde_json::to_string_pretty(&Sidecar {
            feature_schema: FEATURE_SCHEMA,
            hyper: self.hyper.clone(),
            scales: self.scales,
        })
        .expect("sidecar serializes");
        std::fs::write(&sidecar, json + "\n").map_err(|e| Error::io(&sidecar, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let sidecar = path.with_extension("json");
        let text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let meta: Sidecar = serde_json::from_str(&text).map_err(|e| Error::format(&sidecar, e.to_string()))?;
        if meta.feature_schema != FEATURE_SCHEMA {
            return Err(Error::format(&sidecar, format!("feature schema {} is not {FEATURE_SCHEMA}", meta.feature_schema)));
        }
        let ts = tensor_file::read_file(path, MAGIC)?;
        let h = meta.hyper.hidden;
        let get = |name: &str, shape: &[usize]| tensor_file::take(&ts, name, shape).map(|t| t.data.clone()).map_err(|r| Error::format(path, r));
        Ok(ValueParams {
            w1: get("w1", &[FEATURE_DIM, h])?,
            b1: get("b1", &[h])?,
            w2: get("w2", &[h])?,
            b2: get("b2", &[])?[0],
            hyper: meta.hyper,
            scales: meta.scales,
        })
    }
}

impl ValueFunction for ValueParams {
    fn value(&self, action: &ActionView<'_>) -> f64 {
        self.predict(action.features)
    }
}

#[derive(Debug, Clone)]
pub struct TvfOutcome {
    pub params: ValueParams,
    /// `(epoch, train MSE, held-out MSE)`; held-out equals train MSE when
    /// nothing is held out.
    pub curve: Vec<(usize, f64, f64)>,
    pub best_epoch: usize,
    /// Indices of the held-out records.
    pub holdout: Vec<usize>,
}

fn mse(p: &ValueParams, exp: &Experience, idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    idx.iter()
        .map(|&i| {
            let r = exp.get(i);
            (p.predict(&r.features) - r.opt).powi(2)
        })
        .sum::<f64>()
        / idx.len() as f64
}

/// Adds the squared-error gradient of one batch (mean over the batch).
fn step(p: &mut ValueParams, exp: &Experience, batch: &[usize], lr: f64) {
    let h = p.hyper.hidden;
    let mut gw1 = vec![0.0; FEATURE_DIM * h];
    let mut gb1 = vec![0.0; h];
    let mut gw2 = vec![0.0; h];
    let mut gb2 = 0.0;
    let mut pre = vec![0.0; h];
    let scale = 2.0 / batch.len() as f64;
    for &i in batch {
        let r = exp.get(i);
        p.hidden_pre(&r.features, &mut pre);
        let y = p.b2 + pre.iter().zip(&p.w2).map(|(a, w)| a.max(0.0) * w).sum::<f64>();
        let dy = scale * (y - r.opt);
        gb2 += dy;
        for j in 0..h {
            if pre[j] > 0.0 {
                gw2[j] += dy * pre[j];
                let dpre = dy * p.w2[j];
                gb1[j] += dpre;
                for (d, &x) in r.features.iter().enumerate() {
                    gw1[d * h + j] += dpre * x;
                }
            }
        }
    }
    for (w, g) in p.w1.iter_mut().zip(&gw1) {
        *w -= lr * g;
    }
    for (w, g) in p.b1.iter_mut().zip(&gb1) {
        *w -= lr * g;
    }
    for (w, g) in p.w2.iter_mut().zip(&gw2) {
        *w -= lr * g;
    }
    p.b2 -= lr * gb2;
}

/// Fits the value network to the recorded action values by minimizing mean
/// squared error. Mini-batches are drawn uniformly with replacement from
/// the training split; the parameters of the epoch with the lowest
/// held-out error are returned.
pub fn train_tvf(exp: &Experience, hyper: &TvfHyper, scales: FeatureScales) -> Result<TvfOutcome> {
    hyper.check()?;
    if exp.len() < hyper.batch_size.clamp(1, 2) {
        return Err(Error::Config(format!("{} experience records are too few", exp.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut idx: Vec<usize> = (0..exp.len()).collect();
    idx.shuffle(&mut rng);
    let n_hold = ((exp.len() as f64) * hyper.holdout).floor() as usize;
    let n_hold = n_hold.min(exp.len() - 1);
    let holdout = idx.split_off(exp.len() - n_hold);
    let train = idx;
    if train.len() < hyper.batch_size.min(train.len()).max(1) {
        return Err(Error::Config("training split is smaller than one batch".into()));
    }

    let mut p = ValueParams::init(hyper, scales, hyper.seed.wrapping_add(1))?;
    p.b2 = train.iter().map(|&i| exp.get(i).opt).sum::<f64>() / train.len() as f64;
    let full = hyper.batch_size >= train.len();
    let steps = if full { 1 } else { train.len().div_ceil(hyper.batch_size) };
    let mut curve = Vec::with_capacity(hyper.epochs);
    let mut best: Option<(f64, usize, ValueParams)> = None;
    let mut batch = Vec::with_capacity(hyper.batch_size);
    for epoch in 1..=hyper.epochs {
        for _ in 0..steps {
            if full {
                step(&mut p, exp, &train, hyper.learning_rate);
            } else {
                batch.clear();
                batch.extend((0..hyper.batch_size).map(|_| train[rng.gen_range(0..train.len())]));
                step(&mut p, exp, &batch, hyper.learning_rate);
            }
        }
        let tr = mse(&p, exp, &train);
        if !tr.is_finite() || !p.is_finite() {
            return Err(Error::TrainingFailure {
                epoch,
                reason: "non-finite value-function loss".into(),
            });
        }
        let ho = if holdout.is_empty() { tr } else { mse(&p, exp, &holdout) };
        curve.push((epoch, tr, ho));
        if best.as_ref().is_none_or(|(b, _, _)| ho < *b) {
            best = Some((ho, epoch, p.clone()));
        }
    }
    let (best_epoch, params) = best.map_or((0, p), |(_, e, q)| (e, q));
    Ok(TvfOutcome {
        params,
        curve,
        best_epoch,
        holdout,
    })
}
