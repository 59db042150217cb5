//! Full forward pass with cached intermediates and its reverse pass.

use ndarray::{s, Array1, Array2, Array3, Axis};

use super::ops::{self, AdjacencyParts, GateCache};
use super::params::ModelParams;

/// Everything the reverse pass needs from one forward evaluation.
pub(crate) struct Cache {
    cells_now: Array2<f64>,
    gates: Vec<Vec<GateCache>>,
    adj: AdjacencyParts,
    a_hat: Array2<f64>,
    iters: Vec<Array2<f64>>,
    u_last: Array2<f64>,
    z_out: Array2<f64>,
    pub logits: Array2<f64>,
}

/// Runs the network on a `M x P x k` history and returns logits `M x k`.
pub(crate) fn forward_cached(hist: &Array3<f64>, p: &ModelParams) -> Cache {
    let (m, steps, k) = hist.dim();
    let mut z0 = Array2::zeros((m, k));
    let mut gates = Vec::with_capacity(m);
    for i in 0..m {
        let mut x = hist.index_axis(Axis(0), i).t().to_owned();
        let mut per_layer = Vec::with_capacity(p.layers.len());
        for layer in &p.layers {
            let (cache, out) = ops::gate_forward(layer, x);
            per_layer.push(cache);
            x = out;
        }
        z0.row_mut(i).assign(&x.column(steps - 1));
        gates.push(per_layer);
    }
    let cells_now = hist.slice(s![.., steps - 1, ..]).to_owned();
    let adj = ops::adjacency_parts(cells_now.view(), p);
    let a_hat = ops::normalize_adjacency(&adj.a);
    let (iters, z_out, u_last) = ops::appnp_iterates(&z0, &a_hat, p.hyper.alpha, p.hyper.hops);
    let logits = z_out.dot(&p.out_w) + &p.out_b;
    Cache {
        cells_now,
        gates,
        adj,
        a_hat,
        iters,
        u_last,
        z_out,
        logits,
    }
}

/// Mean binary cross-entropy over all entries, from logits.
pub(crate) fn bce_with_logits(logits: &Array2<f64>, target: &Array2<f64>) -> f64 {
    let n = logits.len() as f64;
    logits
        .iter()
        .zip(target.iter())
        .map(|(&l, &y)| l.max(0.0) + (-l.abs()).exp().ln_1p() - y * l)
        .sum::<f64>()
        / n
}

pub(crate) fn bce_grad(logits: &Array2<f64>, target: &Array2<f64>) -> Array2<f64> {
    let n = logits.len() as f64;
    let mut g = logits.mapv(ops::sigmoid);
    g -= target;
    g / n
}

/// Accumulates into `grad` (same layout as the parameters) the gradient of
/// a scalar whose derivative with respect to the logits is `dlogits`.
pub(crate) fn backward(cache: &Cache, p: &ModelParams, dlogits: &Array2<f64>, grad: &mut ModelParams) {
    let alpha = p.hyper.alpha;
    let hops = p.hyper.hops;

    // Output head.
    grad.out_w += &cache.z_out.t().dot(dlogits);
    grad.out_b += &dlogits.sum_axis(Axis(0));
    let dz_out = dlogits.dot(&p.out_w.t());

    // Propagation, unrolled backwards.
    let mut du = &dz_out * &cache.u_last.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
    let mut dz0 = Array2::<f64>::zeros(du.dim());
    let mut da_hat = Array2::<f64>::zeros(cache.a_hat.dim());
    for h in (1..=hops).rev() {
        dz0.scaled_add(alpha, &du);
        da_hat.scaled_add(1.0 - alpha, &du.dot(&cache.iters[h - 1].t()));
        let dprev = cache.a_hat.t().dot(&du) * (1.0 - alpha);
        if h > 1 {
            du = dprev;
        } else {
            dz0 += &dprev;
        }
    }

    // Normalization: A_hat_ij = (A_ij + [i=j]) / sqrt(D_i D_j).
    let a = &cache.adj.a;
    let n = a.nrows();
    let deg: Vec<f64> = a.rows().into_iter().map(|r| 1.0 + r.sum()).collect();
    let mut dd = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let w = da_hat[[i, j]] * cache.a_hat[[i, j]];
            dd[i] -= 0.5 * w / deg[i];
            dd[j] -= 0.5 * w / deg[j];
        }
    }
    let mut da = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            da[[i, j]] = da_hat[[i, j]] / (deg[i] * deg[j]).sqrt() + dd[i];
        }
    }

    // Row softmax, then tanh.
    let mut dt = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let dot: f64 = (0..n).map(|l| da[[i, l]] * a[[i, l]]).sum();
        for j in 0..n {
            dt[[i, j]] = a[[i, j]] * (da[[i, j]] - dot);
        }
    }
    let ds = &dt * &cache.adj.t.mapv(|v| 1.0 - v * v);
    let dsym = &ds + &ds.t();
    let dm1 = dsym.dot(&cache.adj.m2);
    let dm2 = dsym.dot(&cache.adj.m1);
    grad.embed1_w += &cache.cells_now.t().dot(&dm1);
    grad.embed1_b += &dm1.sum_axis(Axis(0));
    grad.embed2_w += &cache.cells_now.t().dot(&dm2);
    grad.embed2_b += &dm2.sum_axis(Axis(0));

    // Gated temporal layers, per cell.
    for (i, per_layer) in cache.gates.iter().enumerate() {
        let steps = per_layer[0].input.ncols();
        let ch = per_layer[0].input.nrows();
        let mut dy = Array2::<f64>::zeros((ch, steps));
        dy.column_mut(steps - 1).assign(&dz0.row(i));
        for (li, gc) in per_layer.iter().enumerate().rev() {
            let layer = &p.layers[li];
            let glayer = &mut grad.layers[li];
            let dpre_t = &dy * &gc.g_sig * &gc.g_tanh.mapv(|v| 1.0 - v * v);
            let dpre_s = &dy * &gc.g_tanh * &gc.g_sig.mapv(|v| v * (1.0 - v));
            glayer.bias_tanh += &dpre_t.sum_axis(Axis(1));
            glayer.bias_gate += &dpre_s.sum_axis(Axis(1));
            let mut dx = Array2::<f64>::zeros((ch, steps));
            for o in 0..ch {
                let gt = dpre_t.row(o);
                let gs = dpre_s.row(o);
                for c in 0..ch {
                    let x = gc.input.row(c);
                    let x = x.as_slice().unwrap();
                    let mut dxc = vec![0.0; steps];
                    {
                        let f = layer.filt_tanh.slice(s![o, c, ..]);
                        let mut df = glayer.filt_tanh.slice_mut(s![o, c, ..]);
                        ops::conv_backward(x, f.as_slice().unwrap(), layer.dilation, gt.as_slice().unwrap(), &mut dxc, df.as_slice_mut().unwrap());
                    }
                    {
                        let f = layer.filt_gate.slice(s![o, c, ..]);
                        let mut df = glayer.filt_gate.slice_mut(s![o, c, ..]);
                        ops::conv_backward(x, f.as_slice().unwrap(), layer.dilation, gs.as_slice().unwrap(), &mut dxc, df.as_slice_mut().unwrap());
                    }
                    let mut row = dx.row_mut(c);
                    row += &Array1::from(dxc);
                }
            }
            dy = dx;
        }
    }
}

/// Loss and gradient averaged over a batch of `(history, target)` pairs,
/// summed in the given order.
pub(crate) fn batch_loss_grad<'a, I>(p: &ModelParams, batch: I) -> (f64, ModelParams)
where
    I: IntoIterator<Item = (&'a Array3<f64>, &'a Array2<f64>)>,
{
    let mut grad = ModelParams::zeros(&p.hyper).expect("hyperparameters were validated");
    let mut loss = 0.0;
    let mut n = 0usize;
    for (hist, target) in batch {
        let cache = forward_cached(hist, p);
        loss += bce_with_logits(&cache.logits, target);
        let dl = bce_grad(&cache.logits, target);
        backward(&cache, p, &dl, &mut grad);
        n += 1;
    }
    if n > 0 {
        let scale = 1.0 / n as f64;
        for t in grad.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= scale);
        }
        loss *= scale;
    }
    (loss, grad)
}
