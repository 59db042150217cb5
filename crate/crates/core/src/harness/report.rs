use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::stream::EventStream;
use super::synth::WorkloadConfig;
use crate::engine::{run_strategy, EngineConfig, Models, RunResult, Strategy};
use crate::error::{Error, Result};

/// Workload quantities that reports are aggregated over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axes {
    /// Tasks in the stream.
    pub tasks: f64,
    /// Workers in the stream.
    pub workers: f64,
    /// Mean reachable distance, km.
    pub reach: f64,
    /// Mean `off_time - on_time`, seconds.
    pub availability: f64,
    /// Median `exp_time - pub_time`, seconds.
    pub valid: f64,
}

pub const AXIS_NAMES: [&str; 5] = ["tasks", "workers", "reach", "availability", "valid"];

impl Axes {
    pub fn of_stream(stream: &EventStream) -> Self {
        let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
        let reach: Vec<f64> = stream.workers().map(|w| w.reach).collect();
        let avail: Vec<f64> = stream.workers().map(|w| w.off_time - w.on_time).collect();
        let mut valid: Vec<f64> = stream.tasks().map(|s| s.exp_time - s.pub_time).collect();
        valid.sort_by(f64::total_cmp);
        Axes {
            tasks: stream.tasks().count() as f64,
            workers: reach.len() as f64,
            reach: mean(&reach),
            availability: mean(&avail),
            valid: valid.get(valid.len() / 2).copied().unwrap_or(0.0),
        }
    }

    /// The configured values of a synthetic workload; history tasks are
    /// not counted.
    pub fn of_workload(w: &WorkloadConfig) -> Self {
        Axes {
            tasks: w.tasks as f64,
            workers: w.workers as f64,
            reach: 0.5 * (w.reach_min + w.reach_max),
            availability: w.availability,
            valid: w.valid,
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "tasks" => self.tasks,
            "workers" => self.workers,
            "reach" => self.reach,
            "availability" => self.availability,
            "valid" => self.valid,
            _ => return None,
        })
    }
}

/// Outcome of one strategy on one stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub strategy: Strategy,
    pub seed: u64,
    pub axes: Axes,
    pub assigned: usize,
    pub planning_events: usize,
    pub expansions: u64,
    pub predictions_made: usize,
    pub predicted_dispatches: usize,
    /// Wall time of every planning step, seconds.
    pub planning_secs: Vec<f64>,
    pub total_planning_secs: f64,
    /// Settings the run used.
    pub config: serde_json::Value,
}

impl RunReport {
    pub fn from_result(r: &RunResult, seed: u64, axes: Axes, config: serde_json::Value) -> Self {
        RunReport {
            strategy: r.strategy,
            seed,
            axes,
            assigned: r.assigned,
            planning_events: r.planning_events,
            expansions: r.expansions,
            predictions_made: r.predictions_made,
            predicted_dispatches: r.dispatches.iter().filter(|d| d.predicted).count(),
            total_planning_secs: r.planning_secs.iter().sum(),
            planning_secs: r.planning_secs.clone(),
            config,
        }
    }

    /// The report with wall-clock fields zeroed, for determinism checks.
    pub fn without_wall_times(&self) -> Self {
        RunReport {
            planning_secs: vec![0.0; self.planning_secs.len()],
            total_planning_secs: 0.0,
            ..self.clone()
        }
    }

    pub fn mean_planning_ms(&self) -> f64 {
        if self.planning_secs.is_empty() {
            0.0
        } else {
            1e3 * self.total_planning_secs / self.planning_secs.len() as f64
        }
    }
}

/// Runs one strategy and wraps the result in a report, with axes measured
/// on the stream. Engine errors carry the index of the failing event.
pub fn run_experiment(strategy: Strategy, stream: &EventStream, cfg: &EngineConfig, models: Models<'_>, seed: u64, config: serde_json::Value) -> Result<RunReport> {
    let r = run_strategy(strategy, stream, cfg, models)?;
    Ok(RunReport::from_result(&r, seed, Axes::of_stream(stream), config))
}

pub const SUMMARY_HEADER: [&str; 14] = [
    "strategy",
    "seed",
    "tasks",
    "workers",
    "reach",
    "availability",
    "valid",
    "assigned",
    "planning_events",
    "expansions",
    "predictions_made",
    "predicted_dispatches",
    "total_planning_secs",
    "mean_planning_ms",
];

pub const AGGREGATE_HEADER: [&str; 6] = ["strategy", "value", "runs", "mean_assigned", "mean_expansions", "mean_planning_secs"];

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::format(path, e.to_string())
}

/// Orders reports by strategy, then seed.
pub fn sorted(reports: &[RunReport]) -> Vec<&RunReport> {
    let mut v: Vec<&RunReport> = reports.iter().collect();
    v.sort_by_key(|r| (r.strategy, r.seed));
    v
}

/// Strategy, axis value, runs, then the means of assigned count,
/// expansions and total planning time.
pub type AggregateRow = (Strategy, f64, usize, f64, f64, f64);

/// One row per (strategy, axis value), ordered by both.
pub fn aggregate(reports: &[RunReport], axis: &str) -> Result<Vec<AggregateRow>> {
    if !AXIS_NAMES.contains(&axis) {
        return Err(Error::Config(format!("unknown axis {axis:?}")));
    }
    // f64 keys are grouped by their bit pattern; values come from the
    // same computation so equal settings match exactly.
    // Axis value, runs, and the three sums.
    type Sums = (f64, usize, f64, f64, f64);
    let mut groups: BTreeMap<(Strategy, u64), Sums> = BTreeMap::new();
    for r in reports {
        let v = r.axes.get(axis).expect("known axis");
        let key = (r.strategy, order_key(v));
        let g = groups.entry(key).or_insert((v, 0, 0.0, 0.0, 0.0));
        g.1 += 1;
        g.2 += r.assigned as f64;
        g.3 += r.expansions as f64;
        g.4 += r.total_planning_secs;
    }
    Ok(groups
        .into_iter()
        .map(|((s, _), (v, n, a, e, t))| {
            let n_f = n as f64;
            (s, v, n, a / n_f, e / n_f, t / n_f)
        })
        .collect())
}

/// Monotone map from finite floats to integers, for ordered grouping.
fn order_key(v: f64) -> u64 {
    let b = v.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | 1 << 63
    }
}

/// Writes `summary.csv`, `summary.json` and one `by_<axis>.csv` per axis.
/// Returns the paths written.
pub fn emit_report(reports: &[RunReport], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rows = sorted(reports);
    let mut written = Vec::new();

    let path = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(SUMMARY_HEADER).map_err(csv_err(&path))?;
    for r in &rows {
        let a = r.axes;
        w.write_record([
            r.strategy.to_string(),
            r.seed.to_string(),
            a.tasks.to_string(),
            a.workers.to_string(),
            a.reach.to_string(),
            a.availability.to_string(),
            a.valid.to_string(),
            r.assigned.to_string(),
            r.planning_events.to_string(),
            r.expansions.to_string(),
            r.predictions_made.to_string(),
            r.predicted_dispatches.to_string(),
            r.total_planning_secs.to_string(),
            r.mean_planning_ms().to_string(),
        ])
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    written.push(path);

    let path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&rows).map_err(|e| Error::format(&path, e.to_string()))?;
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    written.push(path);

    for axis in AXIS_NAMES {
        let path = dir.join(format!("by_{axis}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        w.write_record(AGGREGATE_HEADER).map_err(csv_err(&path))?;
        for (s, v, n, a, e, t) in aggregate(reports, axis)? {
            w.write_record([s.to_string(), v.to_string(), n.to_string(), a.to_string(), e.to_string(), t.to_string()])
                .map_err(csv_err(&path))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Reads reports back from a `summary.json`.
pub fn load_reports(path: &Path) -> Result<Vec<RunReport>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}
