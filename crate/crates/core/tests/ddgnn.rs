// Oracles index explicitly to mirror the textbook sums.
#![allow(clippy::needless_range_loop)]

use crowdplan::ddgnn::{
    self, appnp, dilated_causal_conv, finite_difference_check, gated_temporal, learn_adjacency, normalize_adjacency, persistence_ap, train_demand,
    DemandHyper, ModelParams, Prediction, Sample,
};
use crowdplan::grid::{build_grid, build_series, BoundingBox, SeriesLayout};
use crowdplan::model::{Location, Task};
use ndarray::{Array2, Array3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn hyper(k: usize, history: usize) -> DemandHyper {
    DemandHyper {
        k,
        history,
        embed_dim: 4,
        ..DemandHyper::default()
    }
}

fn random_binary(rng: &mut ChaCha8Rng, shape: (usize, usize, usize)) -> Array3<f64> {
    Array3::from_shape_fn(shape, |_| f64::from(rng.gen_bool(0.4)))
}

/// Perturbs every parameter so biases are nonzero too.
fn jitter(p: &mut ModelParams, rng: &mut ChaCha8Rng, scale: f64) {
    for t in p.tensors_mut() {
        for v in t {
            *v += rng.gen_range(-scale..scale);
        }
    }
}

// ---- oracles -------------------------------------------------------------

fn conv_oracle(x: &[f64], f: &[f64], d: usize) -> Vec<f64> {
    let mut y = Vec::new();
    for j in 0..x.len() as i64 {
        let mut acc = 0.0;
        for (i, fi) in f.iter().enumerate() {
            let idx = j - (i * d) as i64;
            let xv = if idx >= 0 { x[idx as usize] } else { 0.0 };
            acc += fi * xv;
        }
        y.push(acc);
    }
    y
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn adjacency_oracle(c: &Array2<f64>, p: &ModelParams) -> Array2<f64> {
    let m = c.nrows();
    let e = p.embed1_w.ncols();
    let k = c.ncols();
    let mut m1 = vec![vec![0.0; e]; m];
    let mut m2 = vec![vec![0.0; e]; m];
    for i in 0..m {
        for d in 0..e {
            m1[i][d] = p.embed1_b[d];
            m2[i][d] = p.embed2_b[d];
            for j in 0..k {
                m1[i][d] += c[[i, j]] * p.embed1_w[[j, d]];
                m2[i][d] += c[[i, j]] * p.embed2_w[[j, d]];
            }
        }
    }
    let mut out = Array2::zeros((m, m));
    for i in 0..m {
        let mut row = vec![0.0; m];
        for (j, r) in row.iter_mut().enumerate() {
            let mut s = 0.0;
            for d in 0..e {
                s += m1[i][d] * m2[j][d] + m2[i][d] * m1[j][d];
            }
            *r = s.tanh().exp();
        }
        let total: f64 = row.iter().sum();
        for j in 0..m {
            out[[i, j]] = row[j] / total;
        }
    }
    out
}

fn gated_oracle(hist: &Array2<f64>, p: &ModelParams) -> Vec<f64> {
    // hist: P x k; channels are slots.
    let steps = hist.nrows();
    let k = hist.ncols();
    let mut x: Vec<Vec<f64>> = (0..k).map(|c| (0..steps).map(|t| hist[[t, c]]).collect()).collect();
    for layer in &p.layers {
        let mut next = vec![vec![0.0; steps]; k];
        for o in 0..k {
            let mut a = vec![layer.bias_tanh[o]; steps];
            let mut b = vec![layer.bias_gate[o]; steps];
            for c in 0..k {
                let ft: Vec<f64> = (0..layer.filt_tanh.dim().2).map(|i| layer.filt_tanh[[o, c, i]]).collect();
                let fg: Vec<f64> = (0..layer.filt_gate.dim().2).map(|i| layer.filt_gate[[o, c, i]]).collect();
                let yt = conv_oracle(&x[c], &ft, layer.dilation);
                let yg = conv_oracle(&x[c], &fg, layer.dilation);
                for t in 0..steps {
                    a[t] += yt[t];
                    b[t] += yg[t];
                }
            }
            for t in 0..steps {
                next[o][t] = a[t].tanh() * sig(b[t]);
            }
        }
        x = next;
    }
    x.iter().map(|c| c[steps - 1]).collect()
}

// ---- building blocks -----------------------------------------------------

#[test]
fn conv_examples() {
    let y = dilated_causal_conv(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0, 1.0], 1);
    assert_eq!(y[3], 9.0);
    for d in 1..4 {
        assert_eq!(dilated_causal_conv(&[1.0, -2.0, 3.5], &[1.0, 0.0, 0.0], d), vec![1.0, -2.0, 3.5]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let f = [0.5, -1.0, 2.0];
    let got = dilated_causal_conv(&x, &f, 2);
    for (a, b) in got.iter().zip(conv_oracle(&x, &f, 2)) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn adjacency_examples() {
    let h = hyper(3, 4);
    let zero = ModelParams::zeros(&h).unwrap();
    let c = Array2::from_shape_vec((3, 3), vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0]).unwrap();
    let a = learn_adjacency(c.view(), &zero, 0.0);
    assert!(a.values.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut p = ModelParams::init(&h, 9).unwrap();
    jitter(&mut p, &mut rng, 0.3);
    let got = learn_adjacency(c.view(), &p, 0.0);
    let want = adjacency_oracle(&c, &p);
    for (a, b) in got.values.iter().zip(want.iter()) {
        assert!((a - b).abs() <= 1e-10);
    }

    // Equal embeddings make the pre-softmax matrix symmetric, so the
    // row-stochastic result satisfies the cycle condition
    // a_ij a_jk a_ki = a_ik a_kj a_ji.
    p.embed2_w = p.embed1_w.clone();
    p.embed2_b = p.embed1_b.clone();
    let a = learn_adjacency(c.view(), &p, 0.0).values;
    let (i, j, k) = (0, 1, 2);
    let lhs = a[[i, j]] * a[[j, k]] * a[[k, i]];
    let rhs = a[[i, k]] * a[[k, j]] * a[[j, i]];
    assert!((lhs - rhs).abs() < 1e-12);
}

#[test]
fn normalization_examples() {
    let z = normalize_adjacency(&Array2::zeros((2, 2)));
    assert_eq!(z, Array2::<f64>::eye(2));
    let a = Array2::from_shape_vec((2, 2), vec![0.0, 1.0, 1.0, 0.0]).unwrap();
    let n = normalize_adjacency(&a);
    for v in n.iter() {
        assert!((v - 0.5).abs() < 1e-15);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let raw = Array2::from_shape_fn((5, 5), |_| rng.gen_range(0.0..1.0));
    let sym = &raw + &raw.t();
    let n = normalize_adjacency(&sym);
    for i in 0..5 {
        let di = 1.0 + sym.row(i).sum();
        for j in 0..5 {
            let dj = 1.0 + sym.row(j).sum();
            let want = (sym[[i, j]] + f64::from(u8::from(i == j))) / (di.sqrt() * dj.sqrt());
            assert!((n[[i, j]] - want).abs() <= 1e-12);
            assert!((n[[i, j]] - n[[j, i]]).abs() <= 1e-9);
        }
    }
}

#[test]
fn appnp_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let z0 = Array2::from_shape_fn((4, 3), |_| rng.gen_range(-1.0..1.0));
    let a_hat = Array2::from_shape_fn((4, 4), |_| rng.gen_range(0.0..0.5));
    let relu = z0.mapv(|v: f64| v.max(0.0));
    assert_eq!(appnp(&z0, &a_hat, 1.0, 3), relu);
    let eye = Array2::eye(4);
    for v in (appnp(&z0, &eye, 0.3, 5) - &relu).iter() {
        assert!(v.abs() < 1e-12);
    }
    // Explicit three-step unrolling.
    let alpha = 0.2;
    let z1 = &z0 * alpha + a_hat.dot(&z0) * (1.0 - alpha);
    let z2 = &z0 * alpha + a_hat.dot(&z1) * (1.0 - alpha);
    let z3 = &z0 * alpha + a_hat.dot(&z2) * (1.0 - alpha);
    let got = appnp(&z0, &a_hat, alpha, 3);
    for (a, b) in got.iter().zip(z3.mapv(|v| v.max(0.0)).iter()) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn gated_temporal_examples() {
    let h = hyper(3, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let hist = Array2::from_shape_fn((6, 3), |_| f64::from(rng.gen_bool(0.5)));
    let zero = ModelParams::zeros(&h).unwrap();
    assert!(gated_temporal(hist.view(), &zero).iter().all(|&v| v == 0.0));

    let mut p = ModelParams::init(&h, 4).unwrap();
    jitter(&mut p, &mut rng, 0.2);
    let got = gated_temporal(hist.view(), &p);
    for (a, b) in got.iter().zip(gated_oracle(&hist, &p)) {
        assert!((a - b).abs() <= 1e-10);
        assert!(a.abs() < 1.0);
    }

    // Saturated gate: a single layer reduces to its tanh branch.
    let mut one = ModelParams::init(&DemandHyper { dilations: vec![1], ..h.clone() }, 4).unwrap();
    one.layers[0].bias_gate.fill(20.0);
    one.layers[0].filt_gate.fill(0.0);
    let sat = gated_temporal(hist.view(), &one);
    let mut open = one.clone();
    open.layers[0].bias_gate.fill(f64::INFINITY);
    let tanh_only = gated_temporal(hist.view(), &open);
    for (a, b) in sat.iter().zip(tanh_only.iter()) {
        assert!((a - b).abs() <= 1e-8);
    }
}

// ---- forward / training --------------------------------------------------

fn tiny_series(m_rows: usize, k: usize, p: usize, seed: u64) -> crowdplan::grid::TaskSeries {
    let grid = build_grid(BoundingBox::new(0.0, 0.0, 1.0, 1.0), m_rows, 1).unwrap();
    let layout = SeriesLayout { t0: 0.0, dt: 1.0, k, p };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tasks: Vec<Task> = (0..20)
        .map(|i| {
            let t = rng.gen_range(0.0..(k * p) as f64);
            Task::real(i, Location::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)), t, t + 5.0)
        })
        .collect();
    build_series(&tasks, &grid, layout).unwrap()
}

#[test]
fn forward_contract() {
    let h = hyper(3, 4);
    let series = tiny_series(3, 3, 4, 1);
    let zero = ModelParams::zeros(&h).unwrap();
    let pred = ddgnn::forward(&series, &zero).unwrap();
    assert_eq!(pred.probs.len(), 3);
    assert!(pred.probs.iter().flatten().all(|&v| v == 0.5));
    assert_eq!(pred.window_start, 12.0);

    let p = ModelParams::init(&h, 77).unwrap();
    let a = ddgnn::forward(&series, &p).unwrap();
    let b = ddgnn::forward(&series, &p).unwrap();
    assert_eq!(a, b);
    assert!(a.probs.iter().flatten().all(|&v| (0.0..=1.0).contains(&v)));

    let wrong = tiny_series(3, 3, 5, 1);
    assert!(matches!(ddgnn::forward(&wrong, &p), Err(crowdplan::Error::ModelShape(_))));
    let wrong_k = tiny_series(3, 2, 4, 1);
    assert!(matches!(ddgnn::forward(&wrong_k, &p), Err(crowdplan::Error::ModelShape(_))));
}

#[test]
fn materialize_counts() {
    let grid = build_grid(BoundingBox::new(0.0, 0.0, 2.0, 2.0), 2, 2).unwrap();
    let empty = Prediction {
        window_start: 0.0,
        dt: 5.0,
        probs: vec![vec![0.0; 3]; 4],
    };
    assert!(ddgnn::materialize_predictions(&empty, 0.85, &grid, 40.0, 1000).is_empty());

    let mut one = empty.clone();
    one.probs[2][1] = 0.9;
    let tasks = ddgnn::materialize_predictions(&one, 0.85, &grid, 40.0, 1000);
    assert_eq!(tasks.len(), 1);
    assert_eq!(tasks[0].loc, grid.centroid(2));
    assert_eq!(tasks[0].pub_time, 5.0);
    assert_eq!(tasks[0].exp_time, 45.0);
    assert!(tasks[0].is_predicted());

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rand = Prediction {
        window_start: 100.0,
        dt: 5.0,
        probs: (0..4).map(|_| (0..3).map(|_| rng.gen_range(0.0..1.0)).collect()).collect(),
    };
    let expect = rand.probs.iter().flatten().filter(|&&v| v > 0.85).count();
    assert_eq!(ddgnn::materialize_predictions(&rand, 0.85, &grid, 40.0, 0).len(), expect);
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    for (m, k, p_len) in [(2, 2, 3), (4, 3, 6), (6, 4, 8)] {
        let h = hyper(k, p_len);
        let mut p = ModelParams::init(&h, rng.gen()).unwrap();
        jitter(&mut p, &mut rng, 0.1);
        let hist = random_binary(&mut rng, (m, p_len, k));
        let target = Array2::from_shape_fn((m, k), |_| f64::from(rng.gen_bool(0.5)));
        let check = finite_difference_check(&p, &hist, &target, 1e-4).unwrap();
        assert!(check.max_rel_err <= 1e-4, "M={m} k={k} P={p_len}: {check:?}");
    }
}

#[test]
fn zero_targets_are_fit_quickly() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = DemandHyper {
        epochs: 200,
        batch_size: 8,
        learning_rate: 2.0,
        ..hyper(3, 4)
    };
    let data: Vec<Sample> = (0..16)
        .map(|_| Sample {
            history: Array3::zeros((2, 4, 3)),
            target: Array2::zeros((2, 3)),
        })
        .collect();
    let _ = &mut rng;
    let out = train_demand(&data, &data, &h).unwrap();
    for pair in out.curve.windows(2) {
        assert!(pair[1].train_loss <= pair[0].train_loss);
    }
    assert!(out.curve.last().unwrap().train_loss < 0.01);
}

#[test]
fn training_is_bit_deterministic() {
    let series = tiny_series(2, 3, 30, 4);
    let samples = ddgnn::samples(&series, 4).unwrap();
    let h = DemandHyper { epochs: 3, ..hyper(3, 4) };
    let a = train_demand(&samples, &samples, &h).unwrap();
    let b = train_demand(&samples, &samples, &h).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.curve, b.curve);
}

#[test]
fn parameters_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    let p = ModelParams::init(&hyper(3, 4), 3).unwrap();
    p.save(&path).unwrap();
    assert_eq!(ModelParams::load(&path).unwrap(), p);
    assert!(dir.path().join("m.json").exists());
}

#[test]
fn persistence_on_copy_is_perfect() {
    let s = Sample {
        history: Array3::from_shape_fn((1, 2, 2), |(_, t, j)| f64::from(u8::from(t == 1 && j == 0))),
        target: Array2::from_shape_vec((1, 2), vec![1.0, 0.0]).unwrap(),
    };
    assert_eq!(persistence_ap(&[s]).unwrap(), 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjacency_rows_are_stochastic(seed in any::<u64>(), m in 1usize..8, k in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ModelParams::init(&hyper(k, 3), seed).unwrap();
        jitter(&mut p, &mut rng, 1.0);
        let c = Array2::from_shape_fn((m, k), |_| rng.gen_range(0.0..1.0));
        let a = learn_adjacency(c.view(), &p, 0.0);
        for row in a.values.rows() {
            prop_assert!((row.sum() - 1.0).abs() <= 1e-6);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn normalization_keeps_symmetry(seed in any::<u64>(), m in 1usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = Array2::from_shape_fn((m, m), |_| rng.gen_range(0.0..3.0));
        let sym = &raw + &raw.t();
        let n = normalize_adjacency(&sym);
        for i in 0..m {
            for j in 0..m {
                prop_assert!((n[[i, j]] - n[[j, i]]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn appnp_iterates_stay_bounded(seed in any::<u64>(), m in 1usize..7, hops in 1usize..6, alpha in 0.01f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z0 = Array2::from_shape_fn((m, 3), |_| rng.gen_range(-2.0..2.0));
        let raw = Array2::from_shape_fn((m, m), |_| rng.gen_range(0.0..1.0));
        let a_hat = Array2::from_shape_fn((m, m), |(i, j)| raw[[i, j]] / raw.row(i).sum());
        let bound = z0.iter().fold(0.0f64, |b: f64, v: &f64| b.max(v.abs()));
        let mut z = z0.clone();
        for _ in 0..hops {
            z = &z0 * alpha + a_hat.dot(&z) * (1.0 - alpha);
            prop_assert!(z.iter().all(|v| v.abs() <= bound + 1e-12));
        }
        let out = appnp(&z0, &a_hat, alpha, hops);
        prop_assert!(out.iter().all(|v| *v >= 0.0 && *v <= bound + 1e-12));
    }
}
