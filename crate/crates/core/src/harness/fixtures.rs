//! Small hand-built workloads with known outcomes.

use super::stream::{Event, EventStream};
use crate::engine::EngineConfig;
use crate::model::{Location, Task, Worker};

/// Three workers and nine tasks on three far-apart lanes (abstract units,
/// speed 1, reach 1.2). Tasks that publish while a worker is still on
/// its first plan can only be served by re-planning:
///
/// * lane 1: `w1` starts at 0 at t = 1 with `s1` (0.5) and `s3` (1.0) open;
///   `s5` (0.0) publishes at 1.2 and `s9` (0.3) at 1.9, both short-lived.
/// * lane 2: `w2` starts at 100 with `s2` (100.5) and `s4` (101.0); `s6`
///   (100.0) publishes at 1.2.
/// * lane 3: `w3` starts at 200 at t = 4 with `s7` (200.5) and `s8`
///   (201.5, beyond reach).
///
/// A frozen plan serves 2 + 2 + 1 = 5 tasks; re-planning serves 8.
pub fn replan_fixture_stream() -> EventStream {
    let p = |x: f64| Location::new(x, 0.0);
    let task = |id, x, pub_t, exp| Event::Task(Task::real(id, p(x), pub_t, exp));
    let worker = |id, x, on| Event::Worker(Worker::new(id, p(x), 1.2, on, 100.0));
    // Tasks precede workers at equal times so every worker sees them on
    // arrival.
    EventStream::new(vec![
        task(1, 0.5, 1.0, 10.0),
        task(2, 100.5, 1.0, 10.0),
        task(3, 1.0, 1.0, 10.0),
        task(4, 101.0, 1.0, 10.0),
        worker(1, 0.0, 1.0),
        worker(2, 100.0, 1.0),
        task(5, 0.0, 1.2, 2.3),
        task(6, 100.0, 1.2, 2.3),
        task(9, 0.3, 1.9, 2.5),
        task(7, 200.5, 4.0, 10.0),
        task(8, 201.5, 4.0, 4.9),
        worker(3, 200.0, 4.0),
    ])
}

/// Engine settings matching `replan_fixture_stream`.
pub fn replan_fixture_config() -> EngineConfig {
    EngineConfig {
        speed: 1.0,
        ..EngineConfig::default()
    }
}
