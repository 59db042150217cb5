//! Stream replay invariants under every strategy.

use std::collections::{BTreeMap, BTreeSet};

use crowdplan::ddgnn::{DemandHyper, ModelParams};
use crowdplan::engine::{run_strategy, EngineConfig, Models, RunResult, Strategy, PREDICTED_ID_BASE};
use crowdplan::harness::fixtures::{replan_fixture_config, replan_fixture_stream};
use crowdplan::harness::{synth_workload, Event, EventStream, ExperimentConfig, WorkloadConfig};
use crowdplan::model::{Location, Task, TaskId, Worker, WorkerId};
use crowdplan::search::ValueFunction;

/// Prefers longer sequences; enough to drive the adaptive planner.
struct Longest;

impl ValueFunction for Longest {
    fn value(&self, a: &crowdplan::search::ActionView<'_>) -> f64 {
        a.features.iter().sum()
    }
}

fn small_workload(seed: u64) -> WorkloadConfig {
    WorkloadConfig {
        workers: 12,
        tasks: 120,
        duration: 240.0,
        seed,
        ..WorkloadConfig::default()
    }
}

/// A demand model that forecasts a task in the first slot of every cell
/// and nowhere else.
fn saturated_model(k: usize) -> ModelParams {
    let mut m = ModelParams::zeros(&DemandHyper {
        k,
        history: 4,
        ..DemandHyper::default()
    })
    .unwrap();
    m.out_b.fill(-30.0);
    m.out_b[0] = 30.0;
    m
}

fn models<'a>(s: Strategy, demand: &'a ModelParams, value: &'a dyn ValueFunction) -> Models<'a> {
    if s.uses_predictions() {
        Models {
            demand: Some(demand),
            value: Some(value),
        }
    } else {
        Models::default()
    }
}

/// Checks every dispatch against the stream it came from.
fn check_run(stream: &EventStream, cfg: &EngineConfig, r: &RunResult) {
    let workers: BTreeMap<WorkerId, &Worker> = stream.workers().map(|w| (w.id, w)).collect();
    let tasks: BTreeMap<TaskId, &Task> = stream.tasks().map(|s| (s.id, s)).collect();
    let mut served = BTreeSet::new();
    let mut state: BTreeMap<WorkerId, (Location, f64)> = workers.values().map(|w| (w.id, (w.loc, w.on_time))).collect();
    let mut last_t = f64::NEG_INFINITY;
    for d in &r.dispatches {
        assert!(d.t >= last_t, "dispatches out of time order");
        last_t = d.t;
        let w = workers[&d.worker];
        let (loc, free_at) = state[&d.worker];
        assert_eq!(d.from, loc, "worker {:?} teleported", d.worker);
        assert!(d.t >= free_at, "worker {:?} dispatched while busy", d.worker);
        let arrival = d.t + d.from.distance(&d.to) / cfg.speed;
        assert!((arrival - d.arrival).abs() < 1e-9);
        assert!(d.arrival < w.off_time);
        assert!(d.from.distance(&d.to) < w.reach);
        assert_eq!(d.predicted, d.task.0 >= PREDICTED_ID_BASE);
        if !d.predicted {
            let s = tasks[&d.task];
            assert!(d.t >= s.pub_time && d.arrival < s.exp_time);
            assert_eq!(d.to, s.loc);
            assert!(served.insert(d.task), "task {:?} served twice", d.task);
        }
        state.insert(d.worker, (d.to, d.arrival));
    }
    assert_eq!(r.assigned, served.len());
    assert_eq!(r.assignment.task_count(), served.len());
    assert!(r.assignment.is_task_disjoint());
    let in_assignment: BTreeSet<TaskId> = r.assignment.task_ids().collect();
    assert_eq!(in_assignment, served);
    assert!(in_assignment.iter().all(|id| id.0 < PREDICTED_ID_BASE));
    assert!(r.residual_tasks.iter().all(|s| !s.is_predicted()));
    assert!(r.residual_tasks.iter().all(|s| !served.contains(&s.id)));
}

#[test]
fn every_strategy_keeps_dispatches_valid() {
    let cfg = ExperimentConfig::default();
    for seed in 1..=3 {
        let w = small_workload(seed);
        let stream = synth_workload(&w).unwrap();
        let engine = cfg.engine_config(&w).unwrap();
        let demand = saturated_model(w.k);
        for s in Strategy::ALL {
            let r = run_strategy(s, &stream, &engine, models(s, &demand, &Longest)).unwrap();
            check_run(&stream, &engine, &r);
            assert!(r.assigned > 0, "{s} assigned nothing");
            if s.uses_predictions() {
                assert!(r.predictions_made > 0, "{s} made no predictions");
            }
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let cfg = ExperimentConfig::default();
    let w = small_workload(9);
    let stream = synth_workload(&w).unwrap();
    let engine = cfg.engine_config(&w).unwrap();
    let demand = saturated_model(w.k);
    for s in Strategy::ALL {
        let a = run_strategy(s, &stream, &engine, models(s, &demand, &Longest)).unwrap();
        let b = run_strategy(s, &stream, &engine, models(s, &demand, &Longest)).unwrap();
        assert_eq!(a.dispatches, b.dispatches, "{s}");
        assert_eq!(a.assignment, b.assignment, "{s}");
        assert_eq!(a.expansions, b.expansions, "{s}");
    }
}

#[test]
fn empty_stream_finishes_cleanly() {
    let demand = saturated_model(12);
    let stream = EventStream::default();
    let engine = ExperimentConfig::default().engine_config(&WorkloadConfig::default()).unwrap();
    for s in Strategy::ALL {
        let r = run_strategy(s, &stream, &engine, models(s, &demand, &Longest)).unwrap();
        assert_eq!((r.assigned, r.planning_events, r.dispatches.len()), (0, 0, 0), "{s}");
        assert!(r.residual_tasks.is_empty() && r.residual_workers.is_empty());
    }
}

#[test]
fn one_worker_one_task() {
    let stream = EventStream::new(vec![
        Event::Worker(Worker::new(1, Location::new(0.0, 0.0), 2.0, 0.0, 10.0)),
        Event::Task(Task::real(1, Location::new(1.0, 0.0), 0.5, 3.0)),
    ]);
    let cfg = EngineConfig {
        speed: 1.0,
        ..EngineConfig::default()
    };
    for s in [Strategy::Greedy, Strategy::Fta, Strategy::Dta, Strategy::Adaptive] {
        let m = Models {
            demand: None,
            value: Some(&Longest),
        };
        let r = run_strategy(s, &stream, &cfg, m).unwrap();
        assert_eq!(r.assigned, 1, "{s}");
        assert_eq!(r.dispatches[0].t, 0.5);
        assert_eq!(r.dispatches[0].arrival, 1.5);
        assert_eq!(r.residual_workers.len(), 1);
        check_run(&stream, &cfg, &r);
    }
}

#[test]
fn unreachable_task_stays_open() {
    let stream = EventStream::new(vec![
        Event::Worker(Worker::new(1, Location::new(0.0, 0.0), 2.0, 0.0, 10.0)),
        Event::Task(Task::real(1, Location::new(3.0, 0.0), 0.0, 9.0)),
    ]);
    let cfg = EngineConfig {
        speed: 1.0,
        ..EngineConfig::default()
    };
    for s in [Strategy::Greedy, Strategy::Fta, Strategy::Dta] {
        let r = run_strategy(s, &stream, &cfg, Models::default()).unwrap();
        assert_eq!(r.assigned, 0);
        assert_eq!(r.residual_tasks.len(), 1);
    }
}

#[test]
fn frozen_plans_miss_what_replanning_serves() {
    let stream = replan_fixture_stream();
    let cfg = replan_fixture_config();
    let fta = run_strategy(Strategy::Fta, &stream, &cfg, Models::default()).unwrap();
    let dta = run_strategy(Strategy::Dta, &stream, &cfg, Models::default()).unwrap();
    assert_eq!(fta.assigned, 5);
    assert_eq!(dta.assigned, 8);
    check_run(&stream, &cfg, &fta);
    check_run(&stream, &cfg, &dta);
}

#[test]
fn missing_models_are_config_errors() {
    let stream = replan_fixture_stream();
    let cfg = replan_fixture_config();
    assert!(run_strategy(Strategy::Adaptive, &stream, &cfg, Models::default()).is_err());
    assert!(run_strategy(Strategy::DtaTp, &stream, &cfg, Models::default()).is_err());
    let demand = saturated_model(12);
    let m = Models {
        demand: Some(&demand),
        value: None,
    };
    // A demand model without forecast settings cannot be used.
    assert!(run_strategy(Strategy::DtaTp, &stream, &cfg, m).is_err());
}

#[test]
fn reserved_ids_are_rejected() {
    let stream = EventStream::new(vec![Event::Task(Task::real(PREDICTED_ID_BASE, Location::new(0.0, 0.0), 0.0, 1.0))]);
    assert!(run_strategy(Strategy::Dta, &stream, &replan_fixture_config(), Models::default()).is_err());
}
