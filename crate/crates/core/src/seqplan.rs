//! Reachable task sets and minimal-completion sequence sets per worker.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::model::{Task, TaskId, TaskSequence, TravelModel, Worker, WorkerId};

/// Default cap on sequence length.
pub const DEFAULT_MAX_LEN: usize = 4;

/// Reachable set and sequence set of one worker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerCatalog {
    pub worker: WorkerId,
    /// Sorted by id.
    pub reachable: Vec<TaskId>,
    /// The empty sequence first, then by length, then by task ids.
    pub sequences: Vec<TaskSequence>,
}

/// Per-worker catalogs built at one instant, in worker order of the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceCatalog {
    pub t_now: f64,
    pub workers: Vec<WorkerCatalog>,
}

impl SequenceCatalog {
    pub fn get(&self, w: WorkerId) -> Option<&WorkerCatalog> {
        self.workers.iter().find(|c| c.worker == w)
    }
}

/// Whether `s` satisfies the three reachability constraints for `w`:
/// travel time within both the task's remaining life and the worker's
/// availability window, distance within reach. Bounds are inclusive.
pub fn is_reachable(w: &Worker, s: &Task, t_now: f64, model: &TravelModel) -> bool {
    let c = model.time(&w.loc, &s.loc);
    c <= s.exp_time - t_now && c <= w.off_time - t_now && model.distance(&w.loc, &s.loc) <= w.reach
}

/// Ids of the tasks reachable by `w`, sorted.
pub fn reachable_tasks(w: &Worker, tasks: &[Task], t_now: f64, model: &TravelModel) -> Vec<TaskId> {
    let mut out: Vec<TaskId> = tasks
        .iter()
        .filter(|s| is_reachable(w, s, t_now, model))
        .map(|s| s.id)
        .collect();
    out.sort_unstable();
    out
}

#[derive(Clone)]
struct State {
    arrival: f64,
    order: Vec<usize>,
    times: Vec<f64>,
}

/// For every subset of `rs` of size at most `max_len` that admits a valid
/// ordering, the ordering with the earliest completion (ties: smallest task
/// id sequence), plus the empty sequence.
///
/// Dynamic programming over (subset, last task): only the earliest arrival
/// at the last task matters for extending a valid prefix.
pub fn maximal_valid_sequences(w: &Worker, rs: &[&Task], t_now: f64, model: &TravelModel, max_len: usize) -> Vec<TaskSequence> {
    let mut tasks: Vec<&Task> = rs.to_vec();
    tasks.sort_by_key(|s| s.id);
    tasks.dedup_by_key(|s| s.id);
    let n = tasks.len();
    let ok = |t: f64, s: &Task| t < s.exp_time && t < w.off_time && model.distance(&w.loc, &s.loc) < w.reach;

    let better = |a: &State, b: &State, ids: &dyn Fn(&[usize]) -> Vec<TaskId>| match a.arrival.total_cmp(&b.arrival) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => ids(&a.order) < ids(&b.order),
    };
    let ids = |order: &[usize]| order.iter().map(|&i| tasks[i].id).collect::<Vec<_>>();

    let mut out = vec![TaskSequence::empty(w.id)];
    // Key: sorted subset indices plus last index.
    let mut layer: HashMap<(Vec<usize>, usize), State> = HashMap::new();
    for (i, s) in tasks.iter().enumerate() {
        let t = t_now + model.time(&w.loc, &s.loc);
        if ok(t, s) {
            layer.insert(
                (vec![i], i),
                State {
                    arrival: t,
                    order: vec![i],
                    times: vec![t],
                },
            );
        }
    }
    for len in 1..=max_len.min(n) {
        // Best ordering per subset of this size.
        let mut best: HashMap<&Vec<usize>, &State> = HashMap::new();
        for ((set, _), st) in &layer {
            match best.get(set) {
                Some(cur) if !better(st, cur, &ids) => {}
                _ => {
                    best.insert(set, st);
                }
            }
        }
        let mut seqs: Vec<TaskSequence> = best
            .values()
            .map(|st| TaskSequence {
                worker: w.id,
                tasks: ids(&st.order),
                arrival: st.times.clone(),
            })
            .collect();
        seqs.sort_by(|a, b| a.tasks.cmp(&b.tasks));
        out.extend(seqs);
        if len == max_len.min(n) {
            break;
        }
        let mut next: HashMap<(Vec<usize>, usize), State> = HashMap::new();
        for ((set, last), st) in &layer {
            for (j, s) in tasks.iter().enumerate() {
                if set.binary_search(&j).is_ok() {
                    continue;
                }
                let t = st.arrival + model.time(&tasks[*last].loc, &s.loc);
                if !ok(t, s) {
                    continue;
                }
                let mut nset = set.clone();
                let pos = nset.binary_search(&j).unwrap_err();
                nset.insert(pos, j);
                let mut order = st.order.clone();
                order.push(j);
                let mut times = st.times.clone();
                times.push(t);
                let cand = State {
                    arrival: t,
                    order,
                    times,
                };
                let key = (nset, j);
                match next.get(&key) {
                    Some(cur) if !better(&cand, cur, &ids) => {}
                    _ => {
                        next.insert(key, cand);
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        layer = next;
    }
    out
}

/// Catalogs for every worker against the same task pool.
pub fn build_catalog(workers: &[Worker], tasks: &[Task], t_now: f64, model: &TravelModel, max_len: usize) -> SequenceCatalog {
    let by_id: HashMap<TaskId, &Task> = tasks.iter().map(|s| (s.id, s)).collect();
    let workers = workers
        .iter()
        .map(|w| {
            let reachable = reachable_tasks(w, tasks, t_now, model);
            let rs: Vec<&Task> = reachable.iter().map(|id| by_id[id]).collect();
            let sequences = maximal_valid_sequences(w, &rs, t_now, model, max_len);
            WorkerCatalog {
                worker: w.id,
                reachable,
                sequences,
            }
        })
        .collect();
    SequenceCatalog { t_now, workers }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_sequence, Location};

    fn unit() -> TravelModel {
        TravelModel::new(1.0).unwrap()
    }

    fn w0() -> Worker {
        Worker::new(1, Location::new(0.0, 0.0), 10.0, 0.0, 100.0)
    }

    #[test]
    fn reach_constraint_excludes_far_task() {
        let w = Worker::new(1, Location::new(0.0, 0.0), 1.0, 0.0, 100.0);
        let tasks = [Task::real(1, Location::new(2.0, 0.0), 0.0, 50.0), Task::real(2, Location::new(0.5, 0.0), 0.0, 50.0)];
        assert_eq!(reachable_tasks(&w, &tasks, 0.0, &unit()), vec![TaskId(2)]);
    }

    #[test]
    fn expiring_task_excluded() {
        let tasks = [Task::real(1, Location::new(0.1, 0.0), 0.0, 5.05)];
        assert!(reachable_tasks(&w0(), &tasks, 5.0, &unit()).is_empty());
    }

    #[test]
    fn single_task_catalog() {
        let s1 = Task::real(1, Location::new(1.0, 0.0), 0.0, 10.0);
        let q = maximal_valid_sequences(&w0(), &[&s1], 0.0, &unit(), 4);
        assert_eq!(q.len(), 2);
        assert!(q[0].is_empty());
        assert_eq!(q[1].tasks, vec![TaskId(1)]);
        assert_eq!(q[1].arrival, vec![1.0]);
    }

    #[test]
    fn deadline_forces_order() {
        // s1 must be reached first; going to s2 first takes too long.
        let s1 = Task::real(1, Location::new(1.0, 0.0), 0.0, 1.5);
        let s2 = Task::real(2, Location::new(-1.0, 0.0), 0.0, 10.0);
        let q = maximal_valid_sequences(&w0(), &[&s1, &s2], 0.0, &unit(), 4);
        let pairs: Vec<_> = q.iter().filter(|s| s.len() == 2).collect();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].tasks, vec![TaskId(1), TaskId(2)]);
        assert_eq!(pairs[0].arrival, vec![1.0, 3.0]);
    }

    #[test]
    fn every_member_is_valid_and_sorted() {
        let tasks: Vec<Task> = (0..5)
            .map(|i| Task::real(i, Location::new(i as f64 * 0.7 - 1.5, (i % 2) as f64), 0.0, 4.0 + i as f64))
            .collect();
        let refs: Vec<&Task> = tasks.iter().collect();
        let q = maximal_valid_sequences(&w0(), &refs, 0.0, &unit(), 4);
        for pair in q.windows(2) {
            assert!((pair[0].len(), &pair[0].tasks) < (pair[1].len(), &pair[1].tasks));
        }
        for seq in &q {
            let ts: Vec<&Task> = seq.tasks.iter().map(|id| &tasks[id.0 as usize]).collect();
            assert!(validate_sequence(&w0(), &ts, 0.0, &unit()).is_valid());
            assert!(seq.is_well_formed());
        }
    }
}
