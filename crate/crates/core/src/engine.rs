//! Event-driven assignment loop and the planning step it calls.
//!
//! Every arrival, and every moment a busy worker becomes free, is an event.
//! At each event the engine purges expired tasks and offline workers,
//! refreshes the demand forecast when a new window starts, plans over the
//! idle workers and open tasks, and dispatches the first task of every
//! planned sequence. A dispatched worker moves to the task and stays busy
//! until it arrives; nothing dispatched is ever revoked.
//!
//! Strategies differ only in how the plan is made:
//!
//! * `Greedy`: each idle worker without commitments, in id order, commits to
//!   its longest valid sequence over uncommitted tasks.
//! * `Fta`: idle workers without commitments are planned jointly by the
//!   exact tree search; the resulting sequences are frozen until done.
//! * `Dta`: full re-planning at every event with the exact search.
//! * `DtaTp`: `Dta` over real plus predicted tasks.
//! * `Adaptive`: re-planning over real plus predicted tasks with the
//!   value-guided search.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ddgnn::{forward, layout_before, materialize_predictions, ModelParams};
use crate::depgraph::{build_forest, build_wdg};
use crate::error::{Error, Result};
use crate::grid::{build_series, GridSpec, SeriesLayout};
use crate::harness::stream::{Event, EventStream};
use crate::model::{validate_sequence, Assignment, Location, Task, TaskId, TaskSequence, TravelModel, Worker, WorkerId};
use crate::search::{dfsearch_tvf, dfsearch_with, Branching, FeatureScales, Instance, Problem, ValueFunction};
use crate::seqplan::{build_catalog, maximal_valid_sequences, reachable_tasks, SequenceCatalog, DEFAULT_MAX_LEN};

/// Ids at or above this value are reserved for predicted tasks.
pub const PREDICTED_ID_BASE: u64 = 1 << 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Greedy,
    Fta,
    Dta,
    DtaTp,
    Adaptive,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [Strategy::Greedy, Strategy::Fta, Strategy::Dta, Strategy::DtaTp, Strategy::Adaptive];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Greedy => "greedy",
            Strategy::Fta => "fta",
            Strategy::Dta => "dta",
            Strategy::DtaTp => "dta_tp",
            Strategy::Adaptive => "adaptive",
        }
    }

    /// Whether the strategy plans over predicted tasks.
    pub fn uses_predictions(self) -> bool {
        matches!(self, Strategy::DtaTp | Strategy::Adaptive)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.name() == s.to_ascii_lowercase().replace('-', "_"))
            .ok_or_else(|| Error::Config(format!("unknown strategy {s:?}")))
    }
}

/// How forecasts are turned into predicted tasks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastConfig {
    pub grid: GridSpec,
    /// Start of window 0.
    pub t0: f64,
    /// Slot length in seconds; the slot count and history length come from
    /// the demand model.
    pub dt: f64,
    /// Slots with probability strictly above this become predicted tasks.
    pub threshold: f64,
    /// Lifetime of a predicted task from the start of its slot.
    pub valid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Travel speed in km per second.
    pub speed: f64,
    pub max_len: usize,
    pub scales: FeatureScales,
    pub forecast: Option<ForecastConfig>,
    /// Branching rule of the exact planner; both rules find the same
    /// optimum.
    pub branching: Branching,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            speed: TravelModel::from_kmh(40.0).speed,
            max_len: DEFAULT_MAX_LEN,
            scales: FeatureScales::default(),
            forecast: None,
            branching: Branching::Ordered,
        }
    }
}

/// Search used by `tpa`.
#[derive(Clone, Copy)]
pub enum Planner<'a> {
    Exact,
    Value(&'a dyn ValueFunction),
}

/// Planned sequences at one instant; globally task-disjoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningAssignment {
    pub created: f64,
    /// Non-empty sequences, sorted by worker id.
    pub pairs: Vec<(WorkerId, TaskSequence)>,
}

impl PlanningAssignment {
    pub fn task_count(&self) -> usize {
        self.pairs.iter().map(|(_, q)| q.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub plan: PlanningAssignment,
    pub expansions: u64,
}

/// Plans `workers` over `tasks` at `t_now`: sequence catalogs, worker
/// dependency graph, one dependency tree per connected component, and a
/// tree search per tree.
pub fn tpa(workers: &[Worker], tasks: &[Task], t_now: f64, cfg: &EngineConfig, planner: Planner<'_>) -> Result<PlanOutcome> {
    let model = TravelModel::new(cfg.speed)?;
    let full = build_catalog(workers, tasks, t_now, &model, cfg.max_len);
    // Workers that reach nothing cannot take part in any plan.
    let catalog = SequenceCatalog {
        t_now,
        workers: full.workers.into_iter().filter(|c| !c.reachable.is_empty()).collect(),
    };
    let problem = Problem {
        workers,
        tasks,
        catalog: &catalog,
        t_now,
        model,
        scales: cfg.scales,
    };
    let mut pairs = Vec::new();
    let mut expansions = 0;
    for tree in build_forest(&build_wdg(&catalog)) {
        let out = match planner {
            Planner::Exact => dfsearch_with(&tree, &problem, None, cfg.branching),
            Planner::Value(v) => dfsearch_tvf(&tree, &problem, v),
        };
        expansions += out.expansions;
        pairs.extend(out.plan.into_iter().map(|q| (q.worker, q)));
    }
    pairs.sort_by_key(|(w, _)| *w);
    Ok(PlanOutcome {
        plan: PlanningAssignment { created: t_now, pairs },
        expansions,
    })
}

/// One executed move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dispatch {
    pub t: f64,
    pub worker: WorkerId,
    pub task: TaskId,
    pub from: Location,
    pub to: Location,
    pub arrival: f64,
    pub predicted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub strategy: Strategy,
    /// Executed real tasks, one sequence per worker in order of first
    /// dispatch.
    pub assignment: Assignment,
    pub assigned: usize,
    /// Every dispatch, real or predicted, in execution order.
    pub dispatches: Vec<Dispatch>,
    /// Events at which a planner ran over a non-empty problem.
    pub planning_events: usize,
    /// Wall time of each of those planning steps, seconds.
    pub planning_secs: Vec<f64>,
    pub expansions: u64,
    pub predictions_made: usize,
    /// Clock after the last event.
    pub final_clock: f64,
    /// Tasks (real and predicted) still open at shutdown.
    pub residual_tasks: Vec<Task>,
    /// Workers still online at shutdown.
    pub residual_workers: Vec<Worker>,
}

/// Models a run may need.
#[derive(Clone, Copy, Default)]
pub struct Models<'a> {
    pub demand: Option<&'a ModelParams>,
    pub value: Option<&'a dyn ValueFunction>,
}

struct Live {
    worker: Worker,
    busy_until: Option<f64>,
    /// Frozen commitments of `Greedy` and `Fta`.
    queue: VecDeque<TaskId>,
}

#[derive(Clone, Copy)]
struct Slot {
    cell: usize,
    window: usize,
    slot: usize,
}

struct Forecaster<'a> {
    cfg: ForecastConfig,
    params: &'a ModelParams,
    layout: SeriesLayout,
    last_window: Option<usize>,
    history: Vec<Task>,
}

impl Forecaster<'_> {
    fn window_at(&self, t: f64) -> Option<usize> {
        if !(t >= self.layout.t0) {
            return None;
        }
        let mut n = ((t - self.layout.t0) / self.layout.window_len()).floor() as usize;
        while self.layout.window_start(n + 1) <= t {
            n += 1;
        }
        while n > 0 && self.layout.window_start(n) > t {
            n -= 1;
        }
        Some(n)
    }

    fn locate(&self, s: &Task) -> Option<Slot> {
        let cell = self.cfg.grid.cell_of(&s.loc)?;
        let window = self.window_at(s.pub_time)?;
        let start = self.layout.window_start(window);
        let k = self.layout.k;
        let slot = (0..k).rev().find(|&j| start + j as f64 * self.layout.dt <= s.pub_time).unwrap_or(0);
        Some(Slot { cell, window, slot })
    }

    /// Forecast for the window containing `t` when it has not been made
    /// yet and enough history exists.
    fn refresh(&mut self, t: f64) -> Result<Option<Vec<(Task, Slot)>>> {
        let Some(n) = self.window_at(t) else {
            return Ok(None);
        };
        if self.last_window.is_some_and(|w| w >= n) {
            return Ok(None);
        }
        self.last_window = Some(n);
        let p = self.params.hyper.history;
        let Some(hist) = layout_before(&self.layout, n, p) else {
            return Ok(None);
        };
        let (lo, hi) = (hist.t0, self.layout.window_start(n));
        let grid = self.cfg.grid;
        self.history.retain(|s| s.pub_time >= lo);
        let inside: Vec<Task> = self
            .history
            .iter()
            .filter(|s| s.pub_time < hi && grid.cell_of(&s.loc).is_some())
            .cloned()
            .collect();
        let series = build_series(&inside, &grid, hist)?;
        let pred = forward(&series, self.params)?;
        let k = self.layout.k;
        let m = grid.cell_count();
        let base = PREDICTED_ID_BASE + (n * m * k) as u64;
        let tasks = materialize_predictions(&pred, self.cfg.threshold, &grid, self.cfg.valid, base);
        Ok(Some(
            tasks
                .into_iter()
                .map(|s| {
                    let idx = (s.id.0 - base) as usize;
                    let slot = Slot {
                        cell: idx / k,
                        window: n,
                        slot: idx % k,
                    };
                    (s, slot)
                })
                .collect(),
        ))
    }
}

struct Engine<'a> {
    strategy: Strategy,
    cfg: &'a EngineConfig,
    model: TravelModel,
    value: Option<&'a dyn ValueFunction>,
    forecaster: Option<Forecaster<'a>>,
    clock: f64,
    workers: BTreeMap<WorkerId, Live>,
    open: BTreeMap<TaskId, Task>,
    committed: BTreeSet<TaskId>,
    predicted: BTreeMap<TaskId, (Task, Slot)>,
    executed: Vec<(WorkerId, TaskSequence)>,
    executed_idx: HashMap<WorkerId, usize>,
    dispatches: Vec<Dispatch>,
    planning_secs: Vec<f64>,
    expansions: u64,
    predictions_made: usize,
    snapshots: Option<Vec<Instance>>,
}

impl<'a> Engine<'a> {
    fn new(strategy: Strategy, cfg: &'a EngineConfig, models: Models<'a>) -> Result<Self> {
        let model = TravelModel::new(cfg.speed)?;
        if cfg.max_len == 0 {
            return Err(Error::Config("max_len must be at least 1".into()));
        }
        if strategy == Strategy::Adaptive && models.value.is_none() {
            return Err(Error::Config("the adaptive strategy needs a value function".into()));
        }
        let forecaster = if strategy.uses_predictions() {
            match (models.demand, cfg.forecast) {
                (Some(params), Some(fc)) => {
                    if !(fc.dt.is_finite() && fc.dt > 0.0) || !(fc.valid.is_finite() && fc.valid > 0.0) || !fc.t0.is_finite() {
                        return Err(Error::Config("forecast dt, valid and t0 must be finite, dt and valid positive".into()));
                    }
                    Some(Forecaster {
                        cfg: fc,
                        params,
                        layout: SeriesLayout {
                            t0: fc.t0,
                            dt: fc.dt,
                            k: params.hyper.k,
                            p: params.hyper.history,
                        },
                        last_window: None,
                        history: Vec::new(),
                    })
                }
                (None, _) if strategy == Strategy::DtaTp => {
                    return Err(Error::Config("dta_tp needs demand model parameters".into()));
                }
                (Some(_), None) => return Err(Error::Config("a demand model needs a forecast configuration".into())),
                (None, _) => None,
            }
        } else {
            None
        };
        Ok(Engine {
            strategy,
            cfg,
            model,
            value: models.value,
            forecaster,
            clock: f64::NEG_INFINITY,
            workers: BTreeMap::new(),
            open: BTreeMap::new(),
            committed: BTreeSet::new(),
            predicted: BTreeMap::new(),
            executed: Vec::new(),
            executed_idx: HashMap::new(),
            dispatches: Vec::new(),
            planning_secs: Vec::new(),
            expansions: 0,
            predictions_made: 0,
            snapshots: None,
        })
    }

    /// Earliest wake-up, lowest worker id first on ties.
    fn next_wake(&self) -> Option<(f64, WorkerId)> {
        self.workers
            .iter()
            .filter_map(|(id, l)| l.busy_until.map(|t| (t, *id)))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
    }

    fn run(mut self, stream: &EventStream) -> Result<(RunResult, Option<Vec<Instance>>)> {
        stream.check()?;
        let mut next = 0;
        loop {
            let wake = self.next_wake();
            let ev = stream.events.get(next);
            let take_wake = match (wake, ev) {
                (None, None) => break,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (Some((tw, _)), Some(e)) => tw <= e.time(),
            };
            // Wake-ups report the last stream event seen.
            let at = if take_wake { next.saturating_sub(1) } else { next };
            let wrap = |e: Error| Error::Engine {
                event: at,
                source: Box::new(e),
            };
            if take_wake {
                let (t, w) = wake.expect("wake-up present");
                self.clock = self.clock.max(t);
                self.workers.get_mut(&w).expect("busy worker is live").busy_until = None;
                if next < stream.len() {
                    self.refresh_forecast().map_err(wrap)?;
                }
            } else {
                let e = ev.expect("event present");
                self.clock = self.clock.max(e.time());
                self.refresh_forecast().map_err(wrap)?;
                self.admit(e, next).map_err(wrap)?;
                next += 1;
            }
            self.purge();
            self.step().map_err(wrap)?;
        }
        // No more events: drop forecasts and anything past its deadline.
        self.predicted.clear();
        self.purge();
        let assigned = self.executed.iter().map(|(_, q)| q.len()).sum();
        let planning_events = self.planning_secs.len();
        let result = RunResult {
            strategy: self.strategy,
            assignment: Assignment { pairs: self.executed },
            assigned,
            dispatches: self.dispatches,
            planning_events,
            planning_secs: self.planning_secs,
            expansions: self.expansions,
            predictions_made: self.predictions_made,
            final_clock: self.clock,
            residual_tasks: self.open.into_values().collect(),
            residual_workers: self.workers.into_values().map(|l| l.worker).collect(),
        };
        Ok((result, self.snapshots))
    }

    fn refresh_forecast(&mut self) -> Result<()> {
        let Some(f) = self.forecaster.as_mut() else {
            return Ok(());
        };
        if let Some(fresh) = f.refresh(self.clock)? {
            self.predictions_made += fresh.len();
            self.predicted = fresh.into_iter().map(|(s, slot)| (s.id, (s, slot))).collect();
        }
        Ok(())
    }

    fn admit(&mut self, e: &Event, index: usize) -> Result<()> {
        match e {
            Event::Worker(w) => {
                self.workers.insert(
                    w.id,
                    Live {
                        worker: w.clone(),
                        busy_until: None,
                        queue: VecDeque::new(),
                    },
                );
            }
            Event::Task(s) => {
                if s.id.0 >= PREDICTED_ID_BASE {
                    return Err(Error::Ingestion {
                        record: index,
                        reason: format!("task id {} collides with predicted ids", s.id.0),
                    });
                }
                if let Some(f) = self.forecaster.as_mut() {
                    f.history.push(s.clone());
                    if let Some(at) = f.locate(s) {
                        let matched = self
                            .predicted
                            .iter()
                            .filter(|(_, (_, p))| p.cell == at.cell && p.window == at.window)
                            .min_by_key(|(_, (_, p))| (p.slot.abs_diff(at.slot), p.slot))
                            .map(|(id, _)| *id);
                        if let Some(id) = matched {
                            self.predicted.remove(&id);
                        }
                    }
                }
                self.open.insert(s.id, s.clone());
            }
        }
        Ok(())
    }

    fn purge(&mut self) {
        let t = self.clock;
        self.open.retain(|_, s| s.exp_time > t);
        let open = &self.open;
        self.committed.retain(|id| open.contains_key(id));
        let dt = self.forecaster.as_ref().map_or(0.0, |f| f.layout.dt);
        self.predicted.retain(|_, (s, _)| s.exp_time > t && s.pub_time + dt > t);
        self.workers.retain(|_, l| l.busy_until.is_some() || l.worker.off_time > t);
    }

    fn idle(&self) -> impl Iterator<Item = &Live> {
        self.workers.values().filter(|l| l.busy_until.is_none())
    }

    fn step(&mut self) -> Result<()> {
        match self.strategy {
            Strategy::Greedy | Strategy::Fta => {
                self.commit()?;
                self.dispatch_queues();
            }
            Strategy::Dta | Strategy::DtaTp | Strategy::Adaptive => self.replan()?,
        }
        Ok(())
    }

    /// Frozen strategies: plan only idle workers with nothing committed.
    fn commit(&mut self) -> Result<()> {
        let free: Vec<Worker> = self.idle().filter(|l| l.queue.is_empty()).map(|l| l.worker.clone()).collect();
        let tasks: Vec<Task> = self.open.values().filter(|s| !self.committed.contains(&s.id)).cloned().collect();
        if free.is_empty() || tasks.is_empty() {
            return Ok(());
        }
        let t = self.clock;
        let started = Instant::now();
        let plan: Vec<TaskSequence> = if self.strategy == Strategy::Greedy {
            let mut taken = BTreeSet::new();
            let mut plan = Vec::new();
            for w in &free {
                let avail: Vec<Task> = tasks.iter().filter(|s| !taken.contains(&s.id)).cloned().collect();
                let rs_ids = reachable_tasks(w, &avail, t, &self.model);
                let rs: Vec<&Task> = avail.iter().filter(|s| rs_ids.binary_search(&s.id).is_ok()).collect();
                let seqs = maximal_valid_sequences(w, &rs, t, &self.model, self.cfg.max_len);
                // Catalog order puts the smallest ids first among equals.
                let best = seqs.into_iter().fold(None::<TaskSequence>, |b, q| match b {
                    Some(b) if b.len() >= q.len() => Some(b),
                    _ => Some(q),
                });
                if let Some(q) = best.filter(|q| !q.is_empty()) {
                    taken.extend(q.tasks.iter().copied());
                    plan.push(q);
                }
            }
            plan
        } else {
            let out = tpa(&free, &tasks, t, self.cfg, Planner::Exact)?;
            self.expansions += out.expansions;
            out.plan.pairs.into_iter().map(|(_, q)| q).collect()
        };
        self.planning_secs.push(started.elapsed().as_secs_f64());
        for q in plan {
            self.committed.extend(q.tasks.iter().copied());
            self.workers.get_mut(&q.worker).expect("planned worker is live").queue.extend(q.tasks);
        }
        Ok(())
    }

    fn dispatch_queues(&mut self) {
        let ready: Vec<WorkerId> = self.idle().filter(|l| !l.queue.is_empty()).map(|l| l.worker.id).collect();
        for w in ready {
            while let Some(id) = self.workers.get_mut(&w).and_then(|l| l.queue.pop_front()) {
                self.committed.remove(&id);
                let Some(task) = self.open.get(&id).cloned() else {
                    continue;
                };
                if self.try_dispatch(w, &task) {
                    break;
                }
            }
        }
    }

    /// Re-planning strategies: every idle worker, every open task.
    fn replan(&mut self) -> Result<()> {
        let free: Vec<Worker> = self.idle().map(|l| l.worker.clone()).collect();
        let mut tasks: Vec<Task> = self.open.values().cloned().collect();
        tasks.extend(self.predicted.values().map(|(s, _)| s.clone()));
        if free.is_empty() || tasks.is_empty() {
            return Ok(());
        }
        let planner = match (self.strategy, self.value) {
            (Strategy::Adaptive, Some(v)) => Planner::Value(v),
            _ => Planner::Exact,
        };
        if let Some(snaps) = self.snapshots.as_mut() {
            snaps.push(Instance {
                workers: free.clone(),
                tasks: tasks.clone(),
                t_now: self.clock,
                model: self.model,
            });
        }
        let started = Instant::now();
        let out = tpa(&free, &tasks, self.clock, self.cfg, planner)?;
        self.planning_secs.push(started.elapsed().as_secs_f64());
        self.expansions += out.expansions;
        for (w, q) in out.plan.pairs {
            let first = q.tasks[0];
            let task = match self.open.get(&first) {
                Some(s) => s.clone(),
                None => self.predicted[&first].0.clone(),
            };
            self.try_dispatch(w, &task);
        }
        Ok(())
    }

    /// Sends `w` to `task` if that is valid now. Real tasks join the
    /// executed assignment; predicted ones leave the forecast.
    fn try_dispatch(&mut self, w: WorkerId, task: &Task) -> bool {
        let t = self.clock;
        let live = self.workers.get_mut(&w).expect("dispatched worker is live");
        if !validate_sequence(&live.worker, &[task], t, &self.model).is_valid() {
            return false;
        }
        let from = live.worker.loc;
        let arrival = t + self.model.time(&from, &task.loc);
        live.worker.loc = task.loc;
        live.busy_until = Some(arrival);
        let predicted = task.is_predicted();
        if predicted {
            self.predicted.remove(&task.id);
        } else {
            self.open.remove(&task.id);
            let idx = *self.executed_idx.entry(w).or_insert_with(|| {
                self.executed.push((w, TaskSequence::empty(w)));
                self.executed.len() - 1
            });
            let seq = &mut self.executed[idx].1;
            seq.tasks.push(task.id);
            seq.arrival.push(arrival);
        }
        self.dispatches.push(Dispatch {
            t,
            worker: w,
            task: task.id,
            from,
            to: task.loc,
            arrival,
            predicted,
        });
        true
    }
}

/// Runs one strategy over a stream.
pub fn run_strategy(strategy: Strategy, stream: &EventStream, cfg: &EngineConfig, models: Models<'_>) -> Result<RunResult> {
    Ok(Engine::new(strategy, cfg, models)?.run(stream)?.0)
}

/// Runs a re-planning strategy and also returns every planning problem it
/// solved, for value-function training.
pub fn run_with_snapshots(strategy: Strategy, stream: &EventStream, cfg: &EngineConfig, models: Models<'_>) -> Result<(RunResult, Vec<Instance>)> {
    if matches!(strategy, Strategy::Greedy | Strategy::Fta) {
        return Err(Error::Config("snapshots are recorded for re-planning strategies only".into()));
    }
    let mut engine = Engine::new(strategy, cfg, models)?;
    engine.snapshots = Some(Vec::new());
    let (result, snaps) = engine.run(stream)?;
    Ok((result, snaps.unwrap_or_default()))
}

/// The adaptive loop: value-guided re-planning over real and predicted
/// tasks. Without a demand model it plans over real tasks only.
pub fn adaptive_assign(stream: &EventStream, cfg: &EngineConfig, demand: Option<&ModelParams>, value: &dyn ValueFunction) -> Result<RunResult> {
    run_strategy(Strategy::Adaptive, stream, cfg, Models { demand, value: Some(value) })
}

/// Greedy, fixed, dynamic or dynamic-with-prediction baselines.
pub fn baseline_assign(strategy: Strategy, stream: &EventStream, cfg: &EngineConfig, demand: Option<&ModelParams>) -> Result<RunResult> {
    if strategy == Strategy::Adaptive {
        return Err(Error::Config("adaptive is not a baseline".into()));
    }
    run_strategy(strategy, stream, cfg, Models { demand, value: None })
}
