//! One settings file for every pipeline stage.

use serde::{Deserialize, Serialize};

use super::synth::WorkloadConfig;
use crate::ddgnn::DemandHyper;
use crate::engine::{EngineConfig, Strategy};
use crate::error::{Error, Result};
use crate::search::{Branching, FeatureScales, InstanceSpec, TvfHyper};

/// Planner settings shared by every strategy. Travel speed comes from the
/// workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineSection {
    pub max_len: usize,
    pub branching: Branching,
    pub scales: FeatureScales,
}

impl Default for EngineSection {
    fn default() -> Self {
        let e = EngineConfig::default();
        EngineSection {
            max_len: e.max_len,
            branching: e.branching,
            scales: e.scales,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemandSection {
    pub hyper: DemandHyper,
    /// Windows in the generated training stream.
    pub train_windows: usize,
    /// Leading share of samples used for fitting; the rest selects the epoch.
    pub split: f64,
    /// Probability above which a slot becomes a predicted task.
    pub threshold: f64,
}

impl Default for DemandSection {
    fn default() -> Self {
        DemandSection {
            hyper: DemandHyper {
                history: 4,
                embed_dim: 8,
                learning_rate: 0.5,
                batch_size: 1,
                epochs: 40,
                ..DemandHyper::default()
            },
            train_windows: 240,
            split: 0.8,
            threshold: 0.85,
        }
    }
}

/// Where value-function training examples come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperienceSource {
    /// Small random instances drawn from `instance`.
    Random,
    /// The planning problems a re-planning strategy meets on synthetic
    /// streams.
    Snapshots,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperienceSection {
    pub source: ExperienceSource,
    /// Random instances to solve.
    pub instances: usize,
    pub instance: InstanceSpec,
    /// Streams to record, for `Snapshots`.
    pub streams: usize,
    /// Strategy whose planning problems are recorded.
    pub strategy: Strategy,
    pub branching: Branching,
    pub cap: usize,
}

impl Default for ExperienceSection {
    fn default() -> Self {
        ExperienceSection {
            source: ExperienceSource::Snapshots,
            instances: 200,
            instance: InstanceSpec::default(),
            streams: 3,
            strategy: Strategy::DtaTp,
            branching: Branching::Ordered,
            cap: crate::search::DEFAULT_EXPERIENCE_CAP,
        }
    }
}

/// A workload knob varied across a bench.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    /// One of `tasks`, `workers`, `reach`, `availability`, `valid`.
    pub axis: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchSection {
    /// Streams per setting; seeds run from the experiment seed upward.
    pub runs: usize,
    pub strategies: Vec<Strategy>,
    pub sweep: Option<Sweep>,
}

impl Default for BenchSection {
    fn default() -> Self {
        BenchSection {
            runs: 20,
            strategies: Strategy::ALL.to_vec(),
            sweep: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Master seed. Stage seeds are derived from it.
    pub seed: u64,
    pub workload: WorkloadConfig,
    pub engine: EngineSection,
    pub demand: DemandSection,
    pub tvf: TvfHyper,
    pub experience: ExperienceSection,
    pub bench: BenchSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            workload: WorkloadConfig::default(),
            engine: EngineSection::default(),
            demand: DemandSection::default(),
            tvf: TvfHyper::default(),
            experience: ExperienceSection::default(),
            bench: BenchSection::default(),
        }
    }
}

/// Offsets keeping training streams disjoint from evaluation seeds.
pub const DEMAND_STREAM_OFFSET: u64 = 1_000_000;
pub const EXPERIENCE_STREAM_OFFSET: u64 = 2_000_000;

impl ExperimentConfig {
    pub fn check(&self) -> Result<()> {
        self.workload.check()?;
        self.demand.hyper.check()?;
        if self.demand.hyper.k != self.workload.k {
            return Err(Error::Config(format!(
                "demand model k = {} differs from workload k = {}",
                self.demand.hyper.k, self.workload.k
            )));
        }
        if !(self.demand.split > 0.0 && self.demand.split < 1.0) {
            return Err(Error::Config("demand split must lie in (0, 1)".into()));
        }
        if !(self.demand.threshold > 0.0 && self.demand.threshold < 1.0) {
            return Err(Error::Config("threshold must lie in (0, 1)".into()));
        }
        if self.engine.max_len == 0 {
            return Err(Error::Config("max_len must be at least 1".into()));
        }
        if let Some(s) = &self.bench.sweep {
            if !super::report::AXIS_NAMES.contains(&s.axis.as_str()) {
                return Err(Error::Config(format!("unknown sweep axis {:?}", s.axis)));
            }
        }
        Ok(())
    }

    /// Workload with the master seed applied.
    pub fn seeded_workload(&self) -> WorkloadConfig {
        WorkloadConfig {
            seed: self.seed,
            ..self.workload.clone()
        }
    }

    /// Engine settings for streams drawn from `workload`.
    pub fn engine_config(&self, workload: &WorkloadConfig) -> Result<EngineConfig> {
        Ok(EngineConfig {
            speed: workload.speed_kmh / 3600.0,
            max_len: self.engine.max_len,
            scales: self.engine.scales,
            forecast: Some(workload.forecast_config(self.demand.threshold)?),
            branching: self.engine.branching,
        })
    }

    pub fn demand_hyper(&self) -> DemandHyper {
        DemandHyper {
            seed: self.seed,
            ..self.demand.hyper.clone()
        }
    }

    pub fn tvf_hyper(&self) -> TvfHyper {
        TvfHyper {
            seed: self.seed,
            ..self.tvf.clone()
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// `workload` with one axis set to `value`. Count axes round to the
/// nearest integer; `reach` fixes both ends of the reach range.
pub fn apply_axis(workload: &WorkloadConfig, axis: &str, value: f64) -> Result<WorkloadConfig> {
    let mut w = workload.clone();
    let count = || -> Result<usize> {
        if value.is_finite() && value >= 0.0 {
            Ok(value.round() as usize)
        } else {
            Err(Error::Config(format!("{axis} must be a non-negative count, got {value}")))
        }
    };
    match axis {
        "tasks" => w.tasks = count()?,
        "workers" => w.workers = count()?,
        "reach" => {
            w.reach_min = value;
            w.reach_max = value;
        }
        "availability" => w.availability = value,
        "valid" => w.valid = value,
        _ => return Err(Error::Config(format!("unknown axis {axis:?}"))),
    }
    w.check()?;
    Ok(w)
}
