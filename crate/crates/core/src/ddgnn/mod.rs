//! Dynamic-dependency graph network for per-cell demand forecasting.
//!
//! Each cell's recent occurrence vectors pass through gated dilated causal
//! convolutions; a learned, input-dependent adjacency mixes the resulting
//! cell features by personalized propagation; an affine head with logistic
//! squashing yields the probability that each slot of the next window sees
//! a task. Gradients come from the hand-written reverse pass in `net`.

mod net;
mod ops;
mod params;
mod train;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

pub use ops::{appnp, dilated_causal_conv, gated_temporal, learn_adjacency, normalize_adjacency, AdjacencyMatrix};
pub use params::{DemandHyper, GateLayer, ModelParams};
pub use train::{evaluate_ap, finite_difference_check, persistence_ap, train_demand, EpochStats, GradCheck, TrainOutcome};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, SeriesLayout, TaskSeries};
use crate::model::{Task, TaskId, TaskOrigin};

/// Forecast of the window that follows a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub window_start: f64,
    pub dt: f64,
    /// `probs[cell][slot]`
    pub probs: Vec<Vec<f64>>,
}

/// One training example: `M x P x k` history and the `M x k` next vector.
#[derive(Debug, Clone)]
pub struct Sample {
    pub history: Array3<f64>,
    pub target: Array2<f64>,
}

/// History tensor from the last `history` vectors of every cell.
pub fn history_tensor(series: &TaskSeries, k: usize, history: usize) -> Result<Array3<f64>> {
    let m = series.cell_count();
    if series.layout.k != k {
        return Err(Error::ModelShape(format!("series has k = {}, model expects {k}", series.layout.k)));
    }
    if m == 0 {
        return Err(Error::ModelShape("series has no cells".into()));
    }
    let avail = series.cells[0].len();
    if avail < history || series.cells.iter().any(|c| c.len() != avail) {
        return Err(Error::ModelShape(format!("series has {avail} vectors per cell, model needs {history}")));
    }
    let start = avail - history;
    Ok(Array3::from_shape_fn((m, history, k), |(i, p, j)| series.cells[i][start + p].values[j]))
}

/// Sliding-window samples: history `[n, n + P)` predicts vector `n + P`.
pub fn samples(series: &TaskSeries, history: usize) -> Result<Vec<Sample>> {
    let k = series.layout.k;
    let m = series.cell_count();
    let total = series.cells.first().map_or(0, |c| c.len());
    if total <= history {
        return Ok(Vec::new());
    }
    Ok((0..total - history)
        .map(|n| Sample {
            history: Array3::from_shape_fn((m, history, k), |(i, p, j)| series.cells[i][n + p].values[j]),
            target: Array2::from_shape_fn((m, k), |(i, j)| series.cells[i][n + history].values[j]),
        })
        .collect())
}

/// Slot probabilities `M x k` for a raw history tensor.
pub fn predict_tensor(history: &Array3<f64>, p: &ModelParams) -> Result<Array2<f64>> {
    let (_, steps, k) = history.dim();
    if k != p.hyper.k || steps != p.hyper.history {
        return Err(Error::ModelShape(format!(
            "history is {steps} x {k}, model expects {} x {}",
            p.hyper.history, p.hyper.k
        )));
    }
    Ok(net::forward_cached(history, p).logits.mapv(ops::sigmoid))
}

/// Forecasts the vector that follows the series, whose cells must each hold
/// exactly `history` vectors.
pub fn forward(series: &TaskSeries, p: &ModelParams) -> Result<Prediction> {
    let avail = series.cells.first().map_or(0, |c| c.len());
    if avail != p.hyper.history {
        return Err(Error::ModelShape(format!(
            "series holds {avail} vectors per cell, model expects {}",
            p.hyper.history
        )));
    }
    let hist = history_tensor(series, p.hyper.k, p.hyper.history)?;
    let probs = predict_tensor(&hist, p)?;
    let layout = series.layout;
    Ok(Prediction {
        window_start: layout.window_start(avail),
        dt: layout.dt,
        probs: probs.rows().into_iter().map(|r| r.to_vec()).collect(),
    })
}

/// Turns forecast entries strictly above `threshold` into predicted tasks at
/// the cell centroid, published at the start of their slot and valid for
/// `default_valid` seconds. Ids are `id_base + cell * k + slot`.
pub fn materialize_predictions(pred: &Prediction, threshold: f64, grid: &GridSpec, default_valid: f64, id_base: u64) -> Vec<Task> {
    let mut out = Vec::new();
    for (cell, row) in pred.probs.iter().enumerate() {
        let k = row.len();
        for (j, &prob) in row.iter().enumerate() {
            if prob > threshold {
                let pub_time = pred.window_start + j as f64 * pred.dt;
                out.push(Task {
                    id: TaskId(id_base + (cell * k + j) as u64),
                    loc: grid.centroid(cell),
                    pub_time,
                    exp_time: pub_time + default_valid,
                    origin: TaskOrigin::Predicted,
                });
            }
        }
    }
    out
}

/// Layout whose `p` vectors end right before `window` (used to cut the
/// history preceding a forecast).
pub fn layout_before(base: &SeriesLayout, window: usize, history: usize) -> Option<SeriesLayout> {
    let first = window.checked_sub(history)?;
    Some(SeriesLayout {
        t0: base.window_start(first),
        p: history,
        ..*base
    })
}
