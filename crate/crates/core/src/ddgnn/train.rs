use std::io::Write;

use ndarray::{Array2, Array3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net;
use super::params::{DemandHyper, ModelParams};
use super::Sample;
use crate::error::{Error, Result};
use crate::grid::average_precision;

/// One row of the learning curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// `None` when the validation targets hold no positive entry.
    pub val_ap: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub curve: Vec<EpochStats>,
    pub best_epoch: usize,
}

impl TrainOutcome {
    /// Learning curve as CSV: `epoch,train_loss,val_AP`.
    pub fn write_curve<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::format("<learning curve>", e.to_string());
        wtr.write_record(["epoch", "train_loss", "val_AP"]).map_err(err)?;
        for s in &self.curve {
            let ap = s.val_ap.map(|v| v.to_string()).unwrap_or_default();
            wtr.write_record([s.epoch.to_string(), s.train_loss.to_string(), ap])
                .map_err(err)?;
        }
        wtr.flush().map_err(|e| Error::io("<learning curve>", e))
    }
}

fn mean_loss(p: &ModelParams, data: &[Sample]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    data.iter()
        .map(|s| net::bce_with_logits(&net::forward_cached(&s.history, p).logits, &s.target))
        .sum::<f64>()
        / data.len() as f64
}

/// Average precision of `p` over every (cell, slot) entry of `data`.
pub fn evaluate_ap(p: &ModelParams, data: &[Sample]) -> Result<f64> {
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for s in data {
        let probs = super::predict_tensor(&s.history, p)?;
        scores.extend(probs.iter().copied());
        labels.extend(s.target.iter().map(|&v| u8::from(v > 0.5)));
    }
    average_precision(&scores, &labels)
}

/// AP of predicting each cell's next vector as a copy of its last one.
pub fn persistence_ap(data: &[Sample]) -> Result<f64> {
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for s in data {
        let (m, steps, k) = s.history.dim();
        for i in 0..m {
            for j in 0..k {
                scores.push(s.history[[i, steps - 1, j]]);
                labels.push(u8::from(s.target[[i, j]] > 0.5));
            }
        }
    }
    average_precision(&scores, &labels)
}

fn check_shapes(hyper: &DemandHyper, data: &[Sample]) -> Result<()> {
    let m = data.first().map(|s| s.history.dim().0);
    for s in data {
        let (mm, steps, k) = s.history.dim();
        if Some(mm) != m || steps != hyper.history || k != hyper.k || s.target.dim() != (mm, k) {
            return Err(Error::ModelShape(format!(
                "sample of shape {:?} / {:?} does not fit history {} and k {}",
                s.history.dim(),
                s.target.dim(),
                hyper.history,
                hyper.k
            )));
        }
    }
    Ok(())
}

/// Mini-batch SGD on mean binary cross-entropy. Batches are drawn from a
/// per-epoch shuffle seeded by `hyper.seed`. Returns the parameters of the
/// epoch with the best validation AP, ties going to the lower validation
/// loss. Without validation positives the lowest loss alone decides.
pub fn train_demand(train: &[Sample], val: &[Sample], hyper: &DemandHyper) -> Result<TrainOutcome> {
    hyper.check()?;
    if train.is_empty() {
        return Err(Error::Config("no training samples".into()));
    }
    check_shapes(hyper, train)?;
    check_shapes(hyper, val)?;
    let val_has_pos = val.iter().any(|s| s.target.iter().any(|&v| v > 0.5));

    let mut params = ModelParams::init(hyper, hyper.seed)?;
    // Output bias starts at the log-odds of the training positive rate so
    // early steps do not drive every feature under the final ReLU.
    let total: f64 = train.iter().map(|s| s.target.len() as f64).sum();
    let pos: f64 = train.iter().map(|s| s.target.iter().filter(|&&v| v > 0.5).count() as f64).sum();
    let rate = (pos / total).clamp(1e-3, 1.0 - 1e-3);
    params.out_b.fill((rate / (1.0 - rate)).ln());
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed.wrapping_add(0x9e37_79b9));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut curve = Vec::with_capacity(hyper.epochs);
    let mut best: Option<((f64, f64), usize, ModelParams)> = None;

    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(hyper.batch_size) {
            let (loss, grad) = net::batch_loss_grad(&params, chunk.iter().map(|&i| (&train[i].history, &train[i].target)));
            if !loss.is_finite() {
                return Err(Error::TrainingFailure {
                    epoch,
                    reason: "non-finite mini-batch loss".into(),
                });
            }
            for (w, g) in params.tensors_mut().into_iter().zip(grad.tensors()) {
                for (wv, gv) in w.iter_mut().zip(g.1) {
                    *wv -= hyper.learning_rate * gv;
                }
            }
        }
        if !params.is_finite() {
            return Err(Error::TrainingFailure {
                epoch,
                reason: "non-finite parameters".into(),
            });
        }
        let train_loss = mean_loss(&params, train);
        let val_loss = mean_loss(&params, val);
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::TrainingFailure {
                epoch,
                reason: "non-finite epoch loss".into(),
            });
        }
        let val_ap = if val_has_pos { Some(evaluate_ap(&params, val)?) } else { None };
        log::debug!("epoch {epoch}: train loss {train_loss:.6}, val loss {val_loss:.6}, val AP {val_ap:?}");
        curve.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            val_ap,
        });
        // Higher is better in both components. A saturated AP says nothing
        // about calibration, which the threshold relies on.
        let score = (val_ap.unwrap_or(0.0), -val_loss);
        if best.as_ref().is_none_or(|(b, _, _)| score.0 > b.0 || (score.0 == b.0 && score.1 > b.1)) {
            best = Some((score, epoch, params.clone()));
        }
    }
    let (best_epoch, params) = match best {
        Some((_, e, p)) => (e, p),
        None => (0, params),
    };
    Ok(TrainOutcome {
        params,
        curve,
        best_epoch,
    })
}

/// Result of comparing the analytic gradient with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    /// Largest relative error over all entries.
    pub max_rel_err: f64,
    /// Tensor name and flat index of that entry.
    pub worst: (String, usize),
    pub entries: usize,
}

/// Relative error `|a - n| / max(|a|, |n|, 1e-4)`.
fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-4)
}

/// Checks every parameter entry of the batch loss against central
/// differences with step `eps`.
pub fn finite_difference_check(p: &ModelParams, history: &Array3<f64>, target: &Array2<f64>, eps: f64) -> Result<GradCheck> {
    let (_, steps, k) = history.dim();
    if steps != p.hyper.history || k != p.hyper.k || target.dim() != (history.dim().0, k) {
        return Err(Error::ModelShape("history and target do not fit the model".into()));
    }
    let (_, grad) = net::batch_loss_grad(p, [(history, target)]);
    let loss_at = |q: &ModelParams| net::bce_with_logits(&net::forward_cached(history, q).logits, target);
    let names = p.tensor_names();
    let analytic: Vec<Vec<f64>> = grad.tensors().into_iter().map(|(_, d)| d.to_vec()).collect();
    let mut probe = p.clone();
    let mut out = GradCheck {
        max_rel_err: 0.0,
        worst: (String::new(), 0),
        entries: 0,
    };
    for (t, (name, grads)) in names.iter().zip(&analytic).enumerate() {
        for (idx, &a) in grads.iter().enumerate() {
            let orig = probe.tensors_mut()[t][idx];
            probe.tensors_mut()[t][idx] = orig + eps;
            let up = loss_at(&probe);
            probe.tensors_mut()[t][idx] = orig - eps;
            let down = loss_at(&probe);
            probe.tensors_mut()[t][idx] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let e = rel_err(a, numeric);
            out.entries += 1;
            if e > out.max_rel_err {
                out.max_rel_err = e;
                out.worst = (name.clone(), idx);
            }
        }
    }
    Ok(out)
}
