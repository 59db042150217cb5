//! Stages that turn a config into models and reports.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{apply_axis, ExperienceSource, ExperimentConfig, DEMAND_STREAM_OFFSET, EXPERIENCE_STREAM_OFFSET};
use super::report::{run_experiment, Axes, RunReport};
use super::stream::EventStream;
use super::synth::{synth_workload, WorkloadConfig};
use crate::ddgnn::{persistence_ap, samples, train_demand, ModelParams, Sample, TrainOutcome};
use crate::engine::{run_with_snapshots, Models, Strategy};
use crate::error::{Error, Result};
use crate::grid::{build_series, SeriesLayout};
use crate::search::{collect_experience_with, random_instance, Experience, Instance, ValueFunction};

/// Samples from every task of `stream`, on the workload's grid and slot
/// layout, starting at the workload's first history window. The series
/// ends with the last window holding a task.
pub fn stream_samples(stream: &EventStream, workload: &WorkloadConfig, history: usize) -> Result<Vec<Sample>> {
    let tasks: Vec<_> = stream.tasks().cloned().collect();
    let t0 = workload.t0();
    let last = tasks.iter().map(|s| s.pub_time).fold(f64::NEG_INFINITY, f64::max);
    let windows = if last >= t0 { ((last - t0) / workload.window_len()).floor() as usize + 1 } else { 0 };
    let layout = SeriesLayout {
        t0,
        dt: workload.dt,
        k: workload.k,
        p: windows,
    };
    if windows <= history {
        return Err(Error::Config(format!("stream spans {windows} windows; history {history} needs more")));
    }
    let series = build_series(&tasks, &workload.grid()?, layout)?;
    samples(&series, history)
}

/// Splits samples in time order: the first `frac` share fits, the rest
/// validates.
pub fn chronological_split(all: &[Sample], frac: f64) -> Result<(&[Sample], &[Sample])> {
    let n = ((all.len() as f64) * frac).round() as usize;
    if n == 0 || n >= all.len() {
        return Err(Error::Config(format!("{} samples cannot be split at {frac}", all.len())));
    }
    Ok(all.split_at(n))
}

/// Task-only stream the demand model learns from, disjoint from every
/// evaluation seed.
pub fn demand_stream(cfg: &ExperimentConfig) -> Result<EventStream> {
    let w = cfg.workload.demand_training(cfg.demand.train_windows, cfg.seed.wrapping_add(DEMAND_STREAM_OFFSET));
    synth_workload(&w)
}

/// A fitted demand model with the persistence baseline on the same
/// validation samples.
pub struct DemandFit {
    pub outcome: TrainOutcome,
    /// `None` when the validation targets hold no positive entry.
    pub persistence_ap: Option<f64>,
    pub train_samples: usize,
    pub val_samples: usize,
}

/// Fits the demand model on `stream` (the generated training stream when
/// `None`).
pub fn fit_demand(cfg: &ExperimentConfig, stream: Option<&EventStream>) -> Result<DemandFit> {
    cfg.check()?;
    let generated;
    let stream = match stream {
        Some(s) => s,
        None => {
            generated = demand_stream(cfg)?;
            &generated
        }
    };
    let hyper = cfg.demand_hyper();
    let all = stream_samples(stream, &cfg.workload, hyper.history)?;
    let (train, val) = chronological_split(&all, cfg.demand.split)?;
    log::info!("demand model: {} training and {} validation samples", train.len(), val.len());
    Ok(DemandFit {
        outcome: train_demand(train, val, &hyper)?,
        persistence_ap: persistence_ap(val).ok(),
        train_samples: train.len(),
        val_samples: val.len(),
    })
}

/// Planning problems for value-function training, per the experience
/// section. Snapshots of a prediction-driven strategy need `demand`.
pub fn experience_instances(cfg: &ExperimentConfig, demand: Option<&ModelParams>) -> Result<Vec<Instance>> {
    cfg.check()?;
    let ex = &cfg.experience;
    match ex.source {
        ExperienceSource::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            Ok((0..ex.instances).map(|_| random_instance(&mut rng, &ex.instance)).collect())
        }
        ExperienceSource::Snapshots => {
            if matches!(ex.strategy, Strategy::Greedy | Strategy::Fta | Strategy::Adaptive) {
                return Err(Error::Config(format!("experience snapshots need dta or dta_tp, not {}", ex.strategy)));
            }
            let mut out = Vec::new();
            for i in 0..ex.streams as u64 {
                let w = WorkloadConfig {
                    seed: cfg.seed.wrapping_add(EXPERIENCE_STREAM_OFFSET + i),
                    ..cfg.workload.clone()
                };
                let stream = synth_workload(&w)?;
                let engine = cfg.engine_config(&w)?;
                let models = Models { demand, value: None };
                let (_, snaps) = run_with_snapshots(ex.strategy, &stream, &engine, models)?;
                out.extend(snaps);
            }
            Ok(out)
        }
    }
}

/// Solves every instance exactly and records each explored action.
pub fn gather_experience(cfg: &ExperimentConfig, demand: Option<&ModelParams>) -> Result<(Experience, usize)> {
    let instances = experience_instances(cfg, demand)?;
    let ex = &cfg.experience;
    let out = collect_experience_with(&instances, cfg.engine.max_len, &cfg.engine.scales, ex.cap, ex.branching);
    log::info!("experience: {} instances, {} records, optimum {}", instances.len(), out.0.len(), out.1);
    Ok(out)
}

/// Strategies of the bench section that the given models allow.
fn runnable(cfg: &ExperimentConfig, demand: bool, value: bool) -> Result<Vec<Strategy>> {
    for &s in &cfg.bench.strategies {
        if s == Strategy::DtaTp && !demand {
            return Err(Error::Config("dta_tp needs a demand model".into()));
        }
        if s == Strategy::Adaptive && !value {
            return Err(Error::Config("adaptive needs a value function".into()));
        }
    }
    Ok(cfg.bench.strategies.clone())
}

/// Every strategy on `bench.runs` streams per setting, with seeds counting
/// up from the master seed. Settings are the sweep values, or the base
/// workload when there is no sweep. Reports come back ordered by setting,
/// seed and strategy.
pub fn run_bench(cfg: &ExperimentConfig, demand: Option<&ModelParams>, value: Option<&dyn ValueFunction>) -> Result<Vec<RunReport>> {
    cfg.check()?;
    let strategies = runnable(cfg, demand.is_some(), value.is_some())?;
    let settings: Vec<WorkloadConfig> = match &cfg.bench.sweep {
        Some(sw) => sw.values.iter().map(|&v| apply_axis(&cfg.workload, &sw.axis, v)).collect::<Result<_>>()?,
        None => vec![cfg.workload.clone()],
    };
    let mut reports = Vec::new();
    for base in &settings {
        for i in 0..cfg.bench.runs as u64 {
            let w = WorkloadConfig {
                seed: cfg.seed.wrapping_add(i),
                ..base.clone()
            };
            let stream = synth_workload(&w)?;
            let engine = cfg.engine_config(&w)?;
            let echo = ExperimentConfig {
                seed: w.seed,
                workload: w.clone(),
                ..cfg.clone()
            }
            .to_json();
            for &s in &strategies {
                let models = if s.uses_predictions() { Models { demand, value } } else { Models::default() };
                let mut r = run_experiment(s, &stream, &engine, models, w.seed, echo.clone())?;
                r.axes = Axes::of_workload(&w);
                log::info!("{} seed {}: {} assigned", s, w.seed, r.assigned);
                reports.push(r);
            }
        }
    }
    Ok(reports)
}
