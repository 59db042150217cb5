//! Brute-force oracles shared by the integration tests. None of them calls
//! into the code it checks beyond the plain data types.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use crowdplan::depgraph::Wdg;
use crowdplan::model::{Location, Task, TravelModel, Worker, WorkerId};
use rand::Rng;

/// Arrival times along `seq`, accumulated leg by leg.
pub fn arrivals(w: &Worker, seq: &[&Task], t_now: f64, speed: f64) -> Vec<f64> {
    let mut t = t_now;
    let mut here = w.loc;
    seq.iter()
        .map(|s| {
            t += here.distance(&s.loc) / speed;
            here = s.loc;
            t
        })
        .collect()
}

/// Validity applied constraint by constraint: every deadline, then the
/// offline time, then reach, each strictly.
pub fn valid_by_definition(w: &Worker, seq: &[&Task], t_now: f64, speed: f64) -> bool {
    let at = arrivals(w, seq, t_now, speed);
    let deadlines = seq.iter().zip(&at).all(|(s, &a)| a < s.exp_time);
    let offline = at.iter().all(|&a| a < w.off_time);
    let reach = seq.iter().all(|s| w.loc.distance(&s.loc) < w.reach);
    deadlines && offline && reach
}

/// Every ordering of `items`.
pub fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head.clone());
            out.push(p);
        }
    }
    out
}

/// Earliest completion over all valid orderings of `set`, if any.
pub fn best_completion(w: &Worker, set: &[&Task], t_now: f64, speed: f64) -> Option<f64> {
    permutations(set)
        .into_iter()
        .filter(|p| valid_by_definition(w, p, t_now, speed))
        .map(|p| arrivals(w, &p, t_now, speed).last().copied().unwrap_or(t_now))
        .min_by(f64::total_cmp)
}

/// Every subset of `0..n` with at most `max` elements.
pub fn subsets(n: usize, max: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize <= max)
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect())
        .collect()
}

/// Largest number of tasks any joint assignment can cover: each worker
/// takes one valid ordered sequence of at most `max_len` unused tasks.
/// Plain recursion over workers, memoized on the used-task set only.
pub fn joint_optimum(workers: &[Worker], tasks: &[Task], t_now: f64, speed: f64, max_len: usize) -> usize {
    assert!(tasks.len() <= 16);
    fn sequences(w: &Worker, tasks: &[Task], free: u32, t_now: f64, speed: f64, max_len: usize) -> Vec<u32> {
        // All valid sequences as masks; prefixes of valid sequences are
        // valid, so the walk stops at the first violation.
        let mut out = vec![0u32];
        let mut stack: Vec<(Vec<usize>, u32)> = vec![(Vec::new(), 0)];
        while let Some((seq, mask)) = stack.pop() {
            if seq.len() == max_len {
                continue;
            }
            for i in 0..tasks.len() {
                if free >> i & 1 == 0 || mask >> i & 1 == 1 {
                    continue;
                }
                let mut next = seq.clone();
                next.push(i);
                let refs: Vec<&Task> = next.iter().map(|&j| &tasks[j]).collect();
                if valid_by_definition(w, &refs, t_now, speed) {
                    out.push(mask | 1 << i);
                    stack.push((next, mask | 1 << i));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
    #[allow(clippy::too_many_arguments)]
    fn go(k: usize, used: u32, workers: &[Worker], tasks: &[Task], t_now: f64, speed: f64, max_len: usize, memo: &mut HashMap<(usize, u32), usize>) -> usize {
        if k == workers.len() {
            return 0;
        }
        if let Some(&v) = memo.get(&(k, used)) {
            return v;
        }
        let all = (1u32 << tasks.len()) - 1;
        let best = sequences(&workers[k], tasks, all & !used, t_now, speed, max_len)
            .into_iter()
            .map(|m| m.count_ones() as usize + go(k + 1, used | m, workers, tasks, t_now, speed, max_len, memo))
            .max()
            .unwrap_or(0);
        memo.insert((k, used), best);
        best
    }
    go(0, 0, workers, tasks, t_now, speed, max_len, &mut HashMap::new())
}

/// Whether the graph has an induced cycle of length four or more, by
/// testing every vertex subset.
pub fn has_chordless_cycle(g: &Wdg) -> bool {
    let v: Vec<WorkerId> = g.nodes().collect();
    assert!(v.len() <= 16);
    (0u32..1 << v.len()).filter(|m| m.count_ones() >= 4).any(|m| {
        let sub: Vec<WorkerId> = (0..v.len()).filter(|i| m >> i & 1 == 1).map(|i| v[i]).collect();
        let deg = |a: WorkerId| sub.iter().filter(|&&b| b != a && g.has_edge(a, b)).count();
        if !sub.iter().all(|&a| deg(a) == 2) {
            return false;
        }
        // Degree two everywhere: a disjoint union of cycles. It is a
        // single cycle when connected.
        let mut seen = BTreeSet::from([sub[0]]);
        let mut stack = vec![sub[0]];
        while let Some(a) = stack.pop() {
            for &b in &sub {
                if g.has_edge(a, b) && seen.insert(b) {
                    stack.push(b);
                }
            }
        }
        seen.len() == sub.len()
    })
}

/// Random graph on workers `1..=n` with edge probability `p`.
pub fn random_graph<R: Rng>(rng: &mut R, n: u64, p: f64) -> Wdg {
    let mut g = Wdg::new((1..=n).map(WorkerId));
    for a in 1..=n {
        for b in a + 1..=n {
            if rng.gen_bool(p) {
                g.add_edge(WorkerId(a), WorkerId(b));
            }
        }
    }
    g
}

/// Random worker in a `side` x `side` square.
pub fn random_worker<R: Rng>(rng: &mut R, id: u64, side: f64, reach: f64, off: f64) -> Worker {
    Worker::new(id, Location::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side)), reach, 0.0, off)
}

/// Random task published at 0 in a `side` x `side` square.
pub fn random_task<R: Rng>(rng: &mut R, id: u64, side: f64, min_exp: f64, max_exp: f64) -> Task {
    Task::real(id, Location::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side)), 0.0, rng.gen_range(min_exp..max_exp))
}

pub fn unit_speed() -> TravelModel {
    TravelModel { speed: 1.0 }
}
