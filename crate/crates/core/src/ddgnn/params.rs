use std::path::Path;

use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_file::{self, NamedTensor};

const MAGIC: &[u8; 8] = b"CPDDGNN\0";
const TANH_BIAS_INIT: f64 = 0.5;

/// Architecture and optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemandHyper {
    /// Slots per demand vector.
    pub k: usize,
    /// Vectors of history fed to the model.
    pub history: usize,
    pub embed_dim: usize,
    pub kernel: usize,
    pub dilations: Vec<usize>,
    /// Restart probability of the propagation.
    pub alpha: f64,
    /// Propagation steps.
    pub hops: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for DemandHyper {
    fn default() -> Self {
        DemandHyper {
            k: 12,
            history: 24,
            embed_dim: 16,
            kernel: 3,
            dilations: vec![1, 2],
            alpha: 0.3,
            hops: 3,
            learning_rate: 0.01,
            batch_size: 16,
            epochs: 100,
            seed: 1,
        }
    }
}

impl DemandHyper {
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.k == 0 || self.history == 0 || self.embed_dim == 0 || self.kernel == 0 {
            return bad("k, history, embed_dim and kernel must be positive");
        }
        if self.dilations.is_empty() || self.dilations.contains(&0) {
            return bad("need at least one layer and positive dilations");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        if self.hops == 0 {
            return bad("hops must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) || self.batch_size == 0 {
            return bad("learning rate and batch size must be positive");
        }
        Ok(())
    }
}

/// Filters and biases of one gated dilated-convolution layer. Filters are
/// indexed `[out_channel, in_channel, tap]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateLayer {
    pub dilation: usize,
    pub filt_tanh: Array3<f64>,
    pub bias_tanh: Array1<f64>,
    pub filt_gate: Array3<f64>,
    pub bias_gate: Array1<f64>,
}

/// Trainable parameters plus the fixed settings they were built for.
/// Weights are shared by all cells, so one parameter set serves any grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub hyper: DemandHyper,
    /// Source-embedding map, `k x E`.
    pub embed1_w: Array2<f64>,
    pub embed1_b: Array1<f64>,
    /// Target-embedding map, `k x E`.
    pub embed2_w: Array2<f64>,
    pub embed2_b: Array1<f64>,
    pub layers: Vec<GateLayer>,
    /// Output head, `k x k`.
    pub out_w: Array2<f64>,
    pub out_b: Array1<f64>,
}

impl ModelParams {
    /// All-zero parameters.
    pub fn zeros(hyper: &DemandHyper) -> Result<Self> {
        hyper.check()?;
        let (k, e, kk) = (hyper.k, hyper.embed_dim, hyper.kernel);
        Ok(ModelParams {
            hyper: hyper.clone(),
            embed1_w: Array2::zeros((k, e)),
            embed1_b: Array1::zeros(e),
            embed2_w: Array2::zeros((k, e)),
            embed2_b: Array1::zeros(e),
            layers: hyper
                .dilations
                .iter()
                .map(|&d| GateLayer {
                    dilation: d,
                    filt_tanh: Array3::zeros((k, k, kk)),
                    bias_tanh: Array1::zeros(k),
                    filt_gate: Array3::zeros((k, k, kk)),
                    bias_gate: Array1::zeros(k),
                })
                .collect(),
            out_w: Array2::zeros((k, k)),
            out_b: Array1::zeros(k),
        })
    }

    /// Glorot-uniform weights from a seeded generator; biases are zero except
    /// the tanh-branch biases.
    pub fn init(hyper: &DemandHyper, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(hyper)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (k, e, kk) = (hyper.k as f64, hyper.embed_dim as f64, hyper.kernel as f64);
        let mut fill = |data: &mut [f64], fan_in: f64, fan_out: f64| {
            let a = (6.0 / (fan_in + fan_out)).sqrt();
            for v in data {
                *v = rng.gen_range(-a..a);
            }
        };
        fill(p.embed1_w.as_slice_mut().unwrap(), k, e);
        fill(p.embed2_w.as_slice_mut().unwrap(), k, e);
        for layer in &mut p.layers {
            fill(layer.filt_tanh.as_slice_mut().unwrap(), k * kk, k * kk);
            fill(layer.filt_gate.as_slice_mut().unwrap(), k * kk, k * kk);
        }
        fill(p.out_w.as_slice_mut().unwrap(), k, k);
        // Start the tanh branch positive so features clear the final ReLU.
        for layer in &mut p.layers {
            layer.bias_tanh.fill(TANH_BIAS_INIT);
        }
        Ok(p)
    }

    /// Names of the parameter tensors in a fixed order.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = vec!["embed1_w".into(), "embed1_b".into(), "embed2_w".into(), "embed2_b".into()];
        for i in 0..self.layers.len() {
            for n in ["filt_tanh", "bias_tanh", "filt_gate", "bias_gate"] {
                names.push(format!("layer{i}.{n}"));
            }
        }
        names.push("out_w".into());
        names.push("out_b".into());
        names
    }

    /// Mutable flat views of every tensor, in `tensor_names` order.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![
            self.embed1_w.as_slice_mut().unwrap(),
            self.embed1_b.as_slice_mut().unwrap(),
            self.embed2_w.as_slice_mut().unwrap(),
            self.embed2_b.as_slice_mut().unwrap(),
        ];
        for l in &mut self.layers {
            out.push(l.filt_tanh.as_slice_mut().unwrap());
            out.push(l.bias_tanh.as_slice_mut().unwrap());
            out.push(l.filt_gate.as_slice_mut().unwrap());
            out.push(l.bias_gate.as_slice_mut().unwrap());
        }
        out.push(self.out_w.as_slice_mut().unwrap());
        out.push(self.out_b.as_slice_mut().unwrap());
        out
    }

    pub fn tensors(&self) -> Vec<(Vec<usize>, &[f64])> {
        let mut out: Vec<(Vec<usize>, &[f64])> = vec![
            (self.embed1_w.shape().to_vec(), self.embed1_w.as_slice().unwrap()),
            (self.embed1_b.shape().to_vec(), self.embed1_b.as_slice().unwrap()),
            (self.embed2_w.shape().to_vec(), self.embed2_w.as_slice().unwrap()),
            (self.embed2_b.shape().to_vec(), self.embed2_b.as_slice().unwrap()),
        ];
        for l in &self.layers {
            out.push((l.filt_tanh.shape().to_vec(), l.filt_tanh.as_slice().unwrap()));
            out.push((l.bias_tanh.shape().to_vec(), l.bias_tanh.as_slice().unwrap()));
            out.push((l.filt_gate.shape().to_vec(), l.filt_gate.as_slice().unwrap()));
            out.push((l.bias_gate.shape().to_vec(), l.bias_gate.as_slice().unwrap()));
        }
        out.push((self.out_w.shape().to_vec(), self.out_w.as_slice().unwrap()));
        out.push((self.out_b.shape().to_vec(), self.out_b.as_slice().unwrap()));
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, d)| d.iter().all(|v| v.is_finite()))
    }

    pub fn to_named(&self) -> Vec<NamedTensor> {
        self.tensor_names()
            .into_iter()
            .zip(self.tensors())
            .map(|(name, (shape, data))| NamedTensor::new(name, shape, data.to_vec()))
            .collect()
    }

    /// Writes the binary tensor file at `path` and the hyperparameters as
    /// JSON next to it (same stem, `.json` extension).
    pub fn save(&self, path: &Path) -> Result<()> {
        tensor_file::write_file(path, MAGIC, &self.to_named())?;
        let sidecar = path.with_extension("json");
        let json = serde_json::to_string_pretty(&self.hyper).expect("hyperparameters serialize");
        std::fs::write(&sidecar, json + "\n").map_err(|e| Error::io(&sidecar, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let sidecar = path.with_extension("json");
        let text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let hyper: DemandHyper = serde_json::from_str(&text).map_err(|e| Error::format(&sidecar, e.to_string()))?;
        let tensors = tensor_file::read_file(path, MAGIC)?;
        let mut p = Self::zeros(&hyper)?;
        let names = p.tensor_names();
        let shapes: Vec<Vec<usize>> = p.tensors().into_iter().map(|(s, _)| s).collect();
        for ((name, shape), slot) in names.iter().zip(&shapes).zip(p.tensors_mut()) {
            let t = tensor_file::take(&tensors, name, shape).map_err(|r| Error::format(path, r))?;
            slot.copy_from_slice(&t.data);
        }
        Ok(p)
    }
}
