//! Building blocks of the demand network, each a pure function.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::params::{GateLayer, ModelParams};

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `y[j] = sum_i f[i] * x[j - i*d]`, with indices before the start reading
/// as zero. The output has the input's length.
pub fn dilated_causal_conv(x: &[f64], f: &[f64], d: usize) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    conv_accumulate(x, f, d, &mut y);
    y
}

pub(crate) fn conv_accumulate(x: &[f64], f: &[f64], d: usize, y: &mut [f64]) {
    for (j, yj) in y.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (i, &fi) in f.iter().enumerate() {
            let off = i * d;
            if off > j {
                break;
            }
            acc += fi * x[j - off];
        }
        *yj += acc;
    }
}

/// Adjoint of `conv_accumulate`: adds `df` and `dx` given the output
/// gradient `dy`.
pub(crate) fn conv_backward(x: &[f64], f: &[f64], d: usize, dy: &[f64], dx: &mut [f64], df: &mut [f64]) {
    for (j, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        for (i, &fi) in f.iter().enumerate() {
            let off = i * d;
            if off > j {
                break;
            }
            df[i] += g * x[j - off];
            dx[j - off] += g * fi;
        }
    }
}

/// Row-stochastic learned adjacency over the cells.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    pub values: Array2<f64>,
    pub t: f64,
}

/// Intermediate values of the adjacency computation.
#[derive(Debug, Clone)]
pub(crate) struct AdjacencyParts {
    pub m1: Array2<f64>,
    pub m2: Array2<f64>,
    /// `tanh(M1 M2^T + M2 M1^T)`
    pub t: Array2<f64>,
    pub a: Array2<f64>,
}

pub(crate) fn adjacency_parts(cells_now: ArrayView2<f64>, p: &ModelParams) -> AdjacencyParts {
    let m1 = cells_now.dot(&p.embed1_w) + &p.embed1_b;
    let m2 = cells_now.dot(&p.embed2_w) + &p.embed2_b;
    let s = m1.dot(&m2.t()) + m2.dot(&m1.t());
    let t = s.mapv(f64::tanh);
    let a = row_softmax(&t);
    AdjacencyParts { m1, m2, t, a }
}

pub(crate) fn row_softmax(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let mx = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - mx).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Learns the cell-to-cell dependency weights from the latest vector of each
/// cell (`M x k`): two affine embeddings, their symmetrized product squashed
/// by `tanh`, then a row-wise softmax.
pub fn learn_adjacency(cells_now: ArrayView2<f64>, p: &ModelParams, t: f64) -> AdjacencyMatrix {
    AdjacencyMatrix {
        values: adjacency_parts(cells_now, p).a,
        t,
    }
}

/// `D^-1/2 (A + I) D^-1/2` with `D_ii = 1 + sum_j A_ij`.
pub fn normalize_adjacency(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let d: Vec<f64> = a.rows().into_iter().map(|r| (1.0 + r.sum()).sqrt().recip()).collect();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let v = a[[i, j]] + if i == j { 1.0 } else { 0.0 };
        d[i] * v * d[j]
    })
}

/// Personalized-propagation smoothing: `hops` steps of
/// `Z <- alpha Z0 + (1 - alpha) A_hat Z`, the last one followed by ReLU.
pub fn appnp(z0: &Array2<f64>, a_hat: &Array2<f64>, alpha: f64, hops: usize) -> Array2<f64> {
    appnp_iterates(z0, a_hat, alpha, hops).1
}

/// Returns the pre-activation iterates `Z(0)..Z(H-1)`, and the final output.
pub(crate) fn appnp_iterates(z0: &Array2<f64>, a_hat: &Array2<f64>, alpha: f64, hops: usize) -> (Vec<Array2<f64>>, Array2<f64>, Array2<f64>) {
    let mut iters = vec![z0.clone()];
    let mut u = z0.clone();
    for h in 1..=hops {
        u = z0 * alpha + a_hat.dot(&iters[h - 1]) * (1.0 - alpha);
        if h < hops {
            iters.push(u.clone());
        }
    }
    let out = u.mapv(|v| v.max(0.0));
    (iters, out, u)
}

/// Activations of one gated layer over a `channels x steps` input.
#[derive(Debug, Clone)]
pub(crate) struct GateCache {
    pub input: Array2<f64>,
    pub g_tanh: Array2<f64>,
    pub g_sig: Array2<f64>,
}

pub(crate) fn gate_forward(layer: &GateLayer, input: Array2<f64>) -> (GateCache, Array2<f64>) {
    // Rows must be contiguous for the slice-based convolution.
    let input = if input.is_standard_layout() { input } else { input.as_standard_layout().into_owned() };
    let (ch, steps) = input.dim();
    let mut pre_t = Array2::zeros((ch, steps));
    let mut pre_s = Array2::zeros((ch, steps));
    for o in 0..ch {
        let mut row_t = vec![layer.bias_tanh[o]; steps];
        let mut row_s = vec![layer.bias_gate[o]; steps];
        for c in 0..ch {
            let x = input.row(c);
            let x = x.as_slice().unwrap();
            let ft = layer.filt_tanh.slice(ndarray::s![o, c, ..]);
            let fs = layer.filt_gate.slice(ndarray::s![o, c, ..]);
            conv_accumulate(x, ft.as_slice().unwrap(), layer.dilation, &mut row_t);
            conv_accumulate(x, fs.as_slice().unwrap(), layer.dilation, &mut row_s);
        }
        pre_t.row_mut(o).assign(&Array1::from(row_t));
        pre_s.row_mut(o).assign(&Array1::from(row_s));
    }
    let g_tanh = pre_t.mapv(f64::tanh);
    let g_sig = pre_s.mapv(sigmoid);
    let out = &g_tanh * &g_sig;
    (GateCache { input, g_tanh, g_sig }, out)
}

/// Temporal features of one cell from its `P x k` history (rows are
/// vectors, oldest first): the gated layers run over the vector sequence
/// with the `k` slots as channels, and the last step is returned.
pub fn gated_temporal(history: ArrayView2<f64>, p: &ModelParams) -> Array1<f64> {
    let mut x = history.t().to_owned();
    for layer in &p.layers {
        x = gate_forward(layer, x).1;
    }
    x.column(x.ncols() - 1).to_owned()
}
