//! Domain entities shared by every stage of the pipeline: tasks, workers,
//! the planar travel model, arrival-time arithmetic and sequence validity.
//!
//! Times are seconds, distances are kilometers. All values here are plain
//! immutable data and every function is pure.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WorkerId(pub u64);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

impl fmt::Display for WorkerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w{}", self.0)
    }
}

/// Planar position in kilometers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub const fn new(x: f64, y: f64) -> Self {
        Location { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Location) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskOrigin {
    Real,
    Predicted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub loc: Location,
    pub pub_time: f64,
    pub exp_time: f64,
    pub origin: TaskOrigin,
}

impl Task {
    pub fn real(id: u64, loc: Location, pub_time: f64, exp_time: f64) -> Self {
        Task {
            id: TaskId(id),
            loc,
            pub_time,
            exp_time,
            origin: TaskOrigin::Real,
        }
    }

    pub fn is_predicted(&self) -> bool {
        self.origin == TaskOrigin::Predicted
    }

    pub fn check(&self) -> Result<()> {
        if !self.loc.is_finite() || !self.pub_time.is_finite() || !self.exp_time.is_finite() {
            return Err(Error::InvalidGeometry(format!("task {} has non-finite fields", self.id)));
        }
        if self.exp_time <= self.pub_time {
            return Err(Error::Config(format!(
                "task {} expires ({}) before it is published ({})",
                self.id, self.exp_time, self.pub_time
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Worker {
    pub id: WorkerId,
    /// Current position; moves with the worker as tasks are executed.
    pub loc: Location,
    /// Reachable distance in km.
    pub reach: f64,
    pub on_time: f64,
    pub off_time: f64,
}

impl Worker {
    pub fn new(id: u64, loc: Location, reach: f64, on_time: f64, off_time: f64) -> Self {
        Worker {
            id: WorkerId(id),
            loc,
            reach,
            on_time,
            off_time,
        }
    }

    /// Time left before the worker goes offline, clamped at zero.
    pub fn availability_window(&self, t_now: f64) -> f64 {
        (self.off_time - t_now).max(0.0)
    }

    pub fn check(&self) -> Result<()> {
        if !self.loc.is_finite() || !self.reach.is_finite() || !self.on_time.is_finite() || !self.off_time.is_finite() {
            return Err(Error::InvalidGeometry(format!("worker {} has non-finite fields", self.id)));
        }
        if self.reach <= 0.0 {
            return Err(Error::Config(format!("worker {} has non-positive reach", self.id)));
        }
        if self.off_time <= self.on_time {
            return Err(Error::Config(format!("worker {} goes offline before coming online", self.id)));
        }
        Ok(())
    }
}

/// Constant-speed straight-line travel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TravelModel {
    /// Kilometers per second.
    pub speed: f64,
}

impl Default for TravelModel {
    fn default() -> Self {
        TravelModel::from_kmh(40.0)
    }
}

impl TravelModel {
    pub fn new(speed: f64) -> Result<Self> {
        if !(speed.is_finite() && speed > 0.0) {
            return Err(Error::Config(format!("travel speed must be positive, got {speed}")));
        }
        Ok(TravelModel { speed })
    }

    pub fn from_kmh(kmh: f64) -> Self {
        TravelModel { speed: kmh / 3600.0 }
    }

    #[inline]
    pub fn distance(&self, a: &Location, b: &Location) -> f64 {
        a.distance(b)
    }

    #[inline]
    pub fn time(&self, a: &Location, b: &Location) -> f64 {
        a.distance(b) / self.speed
    }
}

/// Distance (km) and travel time (s) between two locations.
pub fn travel_metrics(a: &Location, b: &Location, model: &TravelModel) -> Result<(f64, f64)> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidGeometry(format!("non-finite location {a:?} -> {b:?}")));
    }
    let d = model.distance(a, b);
    Ok((d, d / model.speed))
}

/// Arrival time at each task of `seq` when the worker leaves `w.loc` at `t_now`.
pub fn arrival_times(w: &Worker, seq: &[&Task], t_now: f64, model: &TravelModel) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(seq.len());
    let mut here = w.loc;
    let mut t = t_now;
    for s in seq {
        let (_, dt) = travel_metrics(&here, &s.loc, model)?;
        t += dt;
        out.push(t);
        here = s.loc;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViolationKind {
    /// Arrival is not before the task's expiration time.
    Expired,
    /// Arrival is not before the worker's offline time.
    WorkerOffline,
    /// The task lies outside the worker's reachable distance.
    Unreachable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Validity {
    Valid,
    Violation(ViolationKind, TaskId),
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid)
    }
}

/// Checks the three validity constraints task by task in sequence order.
///
/// For each task the deadline is checked first, then the worker's offline
/// time, then the reachable distance from the worker's current position.
/// All comparisons are strict.
pub fn validate_sequence(w: &Worker, seq: &[&Task], t_now: f64, model: &TravelModel) -> Validity {
    let mut here = w.loc;
    let mut t = t_now;
    for s in seq {
        t += model.time(&here, &s.loc);
        here = s.loc;
        // NaN compares false, so non-finite input lands in a violation.
        if !(t < s.exp_time) {
            return Validity::Violation(ViolationKind::Expired, s.id);
        }
        if !(t < w.off_time) {
            return Validity::Violation(ViolationKind::WorkerOffline, s.id);
        }
        if !(model.distance(&w.loc, &s.loc) < w.reach) {
            return Validity::Violation(ViolationKind::Unreachable, s.id);
        }
    }
    Validity::Valid
}

/// An ordered list of tasks for one worker with the arrival time at each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSequence {
    pub worker: WorkerId,
    pub tasks: Vec<TaskId>,
    pub arrival: Vec<f64>,
}

impl TaskSequence {
    pub fn empty(worker: WorkerId) -> Self {
        TaskSequence {
            worker,
            tasks: Vec::new(),
            arrival: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// Arrival time at the last task, if any.
    pub fn completion(&self) -> Option<f64> {
        self.arrival.last().copied()
    }

    /// Arrival times are non-decreasing (zero-length hops are allowed), the
    /// two lists line up, and no task repeats.
    pub fn is_well_formed(&self) -> bool {
        let mut seen = HashSet::new();
        self.tasks.len() == self.arrival.len()
            && self.arrival.windows(2).all(|p| p[0] <= p[1])
            && self.tasks.iter().all(|t| seen.insert(*t))
    }
}

/// Executed or planned (worker, sequence) pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub pairs: Vec<(WorkerId, TaskSequence)>,
}

impl Assignment {
    pub fn task_count(&self) -> usize {
        self.pairs.iter().map(|(_, s)| s.len()).sum()
    }

    pub fn task_ids(&self) -> impl Iterator<Item = TaskId> + '_ {
        self.pairs.iter().flat_map(|(_, s)| s.tasks.iter().copied())
    }

    /// No task appears in two sequences (or twice in one).
    pub fn is_task_disjoint(&self) -> bool {
        let mut seen = HashSet::new();
        self.task_ids().all(|t| seen.insert(t))
    }
}
