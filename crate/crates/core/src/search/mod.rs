//! Tree-structured search for the best joint assignment.
//!
//! `dfsearch` is exhaustive: within a tree node it branches on every
//! remaining worker and every sequence of that worker that fits the
//! remaining tasks; once the node's workers are exhausted it sums the
//! children, which is exact because sibling subtrees share no reachable
//! task. States are memoized on (node, remaining node workers, remaining
//! tasks relevant to the subtree). Every explored action is recorded with
//! its value (the sequence length plus the best value of the state it
//! leads to) for value-function training.
//!
//! `dfsearch_tvf` walks the same tree once, giving each worker in ascending
//! id order the sequence with the highest learned value.

mod experience;
mod features;
mod tvf;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use experience::{collect_experience, collect_experience_with, random_instance, Experience, ExperienceRecord, DEFAULT_EXPERIENCE_CAP, Instance, InstanceSpec};
pub use features::{FeatureScales, FeatureVector, RawFeatures, FEATURE_DIM, FEATURE_SCHEMA};
pub use tvf::{train_tvf, TvfHyper, TvfOutcome, ValueParams};

use crate::depgraph::DependencyTree;
use crate::model::{Task, TaskId, TaskSequence, TravelModel, Worker, WorkerId};
use crate::seqplan::SequenceCatalog;

/// Everything a search over one instant needs.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub workers: &'a [Worker],
    pub tasks: &'a [Task],
    pub catalog: &'a SequenceCatalog,
    pub t_now: f64,
    pub model: TravelModel,
    pub scales: FeatureScales,
}

/// Identifies a (state, action) pair independently of tree layout.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateActionKey {
    /// Remaining workers of the current node, sorted.
    pub workers: Vec<WorkerId>,
    /// Remaining tasks relevant to the current subtree, sorted.
    pub tasks: Vec<TaskId>,
    pub worker: WorkerId,
    pub seq: Vec<TaskId>,
}

/// What a value function sees for one candidate action.
pub struct ActionView<'a> {
    pub features: &'a FeatureVector,
    /// Present only when the value function asks for it.
    pub key: Option<StateActionKey>,
}

/// Estimates how many tasks end up assigned in a subtree after an action.
pub trait ValueFunction {
    fn value(&self, action: &ActionView<'_>) -> f64;

    /// Whether `ActionView::key` must be filled in.
    fn needs_key(&self) -> bool {
        false
    }
}

/// Exact action values recorded by `dfsearch`; unknown actions score
/// negative infinity.
#[derive(Debug, Clone, Default)]
pub struct ExactTable {
    values: HashMap<StateActionKey, f64>,
}

impl ExactTable {
    pub fn from_experience(exp: &Experience) -> Self {
        ExactTable {
            values: exp
                .records()
                .filter_map(|r| r.key.clone().map(|k| (k, r.opt)))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl ValueFunction for ExactTable {
    fn value(&self, action: &ActionView<'_>) -> f64 {
        action
            .key
            .as_ref()
            .and_then(|k| self.values.get(k))
            .copied()
            .unwrap_or(f64::NEG_INFINITY)
    }

    fn needs_key(&self) -> bool {
        true
    }
}

/// Result of searching one tree.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    /// Tasks covered by `plan`.
    pub assigned: usize,
    /// Non-empty sequences only, in decision order.
    pub plan: Vec<TaskSequence>,
    /// States whose successors were generated.
    pub expansions: u64,
}

type Bits = Vec<u64>;

fn bit_set(b: &mut Bits, i: usize) {
    b[i / 64] |= 1 << (i % 64);
}

fn bit_get(b: &Bits, i: usize) -> bool {
    b[i / 64] >> (i % 64) & 1 == 1
}

fn without(b: &Bits, i: usize) -> Bits {
    let mut c = b.clone();
    c[i / 64] &= !(1 << (i % 64));
    c
}

fn first_one(b: &Bits) -> Option<usize> {
    b.iter().enumerate().find(|(_, &w)| w != 0).map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
}

fn is_subset(a: &Bits, b: &Bits) -> bool {
    a.iter().zip(b).all(|(x, y)| x & !y == 0)
}

fn intersects(a: &Bits, b: &Bits) -> bool {
    a.iter().zip(b).any(|(x, y)| x & y != 0)
}

fn and(a: &Bits, b: &Bits) -> Bits {
    a.iter().zip(b).map(|(x, y)| x & y).collect()
}

fn and_not(a: &Bits, b: &Bits) -> Bits {
    a.iter().zip(b).map(|(x, y)| x & !y).collect()
}

fn ones(b: &Bits) -> impl Iterator<Item = usize> + '_ {
    b.iter().enumerate().flat_map(|(w, &word)| (0..64).filter(move |i| word >> i & 1 == 1).map(move |i| w * 64 + i))
}

struct SeqInfo<'a> {
    seq: &'a TaskSequence,
    mask: Bits,
    completion_offset: f64,
    distance: f64,
}

struct WorkerInfo<'a> {
    availability: f64,
    rs: Bits,
    seqs: Vec<SeqInfo<'a>>,
}

/// Per-tree lookup tables shared by both searches.
struct Prepared<'a> {
    tree: &'a DependencyTree,
    task_ids: Vec<TaskId>,
    task_exp: Vec<f64>,
    words: usize,
    info: HashMap<WorkerId, WorkerInfo<'a>>,
    /// Tasks reachable by some worker of the node's subtree.
    subtree_mask: Vec<Bits>,
    /// Workers of the node's direct children.
    child_workers: Vec<Vec<WorkerId>>,
    t_now: f64,
    scales: FeatureScales,
}

impl<'a> Prepared<'a> {
    fn new(tree: &'a DependencyTree, p: &Problem<'a>) -> Self {
        let by_id: HashMap<TaskId, &Task> = p.tasks.iter().map(|s| (s.id, s)).collect();
        let workers_by_id: HashMap<WorkerId, &Worker> = p.workers.iter().map(|w| (w.id, w)).collect();
        let tree_workers = tree.workers();
        let mut task_ids: Vec<TaskId> = tree_workers
            .iter()
            .filter_map(|w| p.catalog.get(*w))
            .flat_map(|c| c.reachable.iter().copied())
            .filter(|id| by_id.contains_key(id))
            .collect();
        task_ids.sort_unstable();
        task_ids.dedup();
        let index: HashMap<TaskId, usize> = task_ids.iter().enumerate().map(|(i, &t)| (t, i)).collect();
        let words = task_ids.len().div_ceil(64).max(1);
        let mask_of = |ids: &[TaskId]| -> Option<Bits> {
            let mut b = vec![0u64; words];
            for id in ids {
                bit_set(&mut b, *index.get(id)?);
            }
            Some(b)
        };
        let mut info = HashMap::new();
        for &wid in &tree_workers {
            let (Some(w), Some(cat)) = (workers_by_id.get(&wid), p.catalog.get(wid)) else {
                continue;
            };
            let rs = mask_of(&cat.reachable).unwrap_or_else(|| vec![0; words]);
            let seqs = cat
                .sequences
                .iter()
                .filter_map(|seq| {
                    let mask = mask_of(&seq.tasks)?;
                    let mut here = w.loc;
                    let mut distance = 0.0;
                    for id in &seq.tasks {
                        let loc = by_id[id].loc;
                        distance += p.model.distance(&here, &loc);
                        here = loc;
                    }
                    Some(SeqInfo {
                        seq,
                        mask,
                        completion_offset: seq.completion().map_or(0.0, |c| c - p.t_now),
                        distance,
                    })
                })
                .collect();
            info.insert(
                wid,
                WorkerInfo {
                    availability: w.availability_window(p.t_now),
                    rs,
                    seqs,
                },
            );
        }
        let n = tree.nodes.len();
        let mut subtree_mask = vec![vec![0u64; words]; n];
        // Children always carry larger ids than their parent.
        for id in (0..n).rev() {
            let mut m = vec![0u64; words];
            for w in &tree.nodes[id].workers {
                if let Some(i) = info.get(w) {
                    m = m.iter().zip(&i.rs).map(|(a, b)| a | b).collect();
                }
            }
            for &c in &tree.nodes[id].children {
                m = m.iter().zip(&subtree_mask[c]).map(|(a, b)| a | b).collect();
            }
            subtree_mask[id] = m;
        }
        let child_workers = tree
            .nodes
            .iter()
            .map(|n| n.children.iter().flat_map(|&c| tree.nodes[c].workers.iter().copied()).collect())
            .collect();
        Prepared {
            tree,
            task_exp: task_ids.iter().map(|id| by_id[id].exp_time).collect(),
            task_ids,
            words,
            info,
            subtree_mask,
            child_workers,
            t_now: p.t_now,
            scales: p.scales,
        }
    }

    fn full_tasks(&self) -> Bits {
        let mut b = vec![0u64; self.words];
        for i in 0..self.task_ids.len() {
            bit_set(&mut b, i);
        }
        b
    }

    fn node_workers(&self, node: usize) -> &[WorkerId] {
        &self.tree.nodes[node].workers
    }

    fn seqs(&self, w: WorkerId) -> &[SeqInfo<'a>] {
        self.info.get(&w).map_or(&[], |i| &i.seqs)
    }

    fn rs(&self, w: WorkerId) -> Option<&Bits> {
        self.info.get(&w).map(|i| &i.rs)
    }

    /// Raw features shared by every action of a state.
    fn state_features(&self, node: usize, wn: &[WorkerId], s: &Bits) -> RawFeatures {
        let mut n = 0usize;
        let (mut sum, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
        for i in ones(s) {
            let slack = self.task_exp[i] - self.t_now;
            n += 1;
            sum += slack;
            lo = lo.min(slack);
            hi = hi.max(slack);
        }
        let slack = if n == 0 { (0.0, 0.0, 0.0) } else { (sum / n as f64, lo, hi) };
        RawFeatures {
            remaining_workers: wn.len() + self.child_workers[node].len(),
            remaining_tasks: n,
            slack,
            availability: 0.0,
            seq_len: 0,
            completion_offset: 0.0,
            travel_distance: 0.0,
            conflicts: 0,
        }
    }

    fn action_features(&self, node: usize, base: &RawFeatures, wn: &[WorkerId], w: WorkerId, q: &SeqInfo) -> FeatureVector {
        let conflicts = wn
            .iter()
            .chain(&self.child_workers[node])
            .filter(|&&o| o != w && self.rs(o).is_some_and(|rs| intersects(rs, &q.mask)))
            .count();
        RawFeatures {
            availability: self.info[&w].availability,
            seq_len: q.seq.len(),
            completion_offset: q.completion_offset,
            travel_distance: q.distance,
            conflicts,
            ..*base
        }
        .scaled(&self.scales)
    }

    fn key(&self, wn: &[WorkerId], s: &Bits, w: WorkerId, q: &SeqInfo) -> StateActionKey {
        StateActionKey {
            workers: wn.to_vec(),
            tasks: ones(s).map(|i| self.task_ids[i]).collect(),
            worker: w,
            seq: q.seq.tasks.clone(),
        }
    }
}

#[derive(Clone, Copy)]
struct Choice {
    worker_idx: usize,
    seq_idx: usize,
}

struct Exact<'p, 'a> {
    prep: &'p Prepared<'a>,
    memo: HashMap<(usize, Bits, Bits), (usize, Option<Choice>)>,
    expansions: u64,
    experience: Option<&'p mut Experience>,
    ordered: bool,
}

impl Exact<'_, '_> {
    /// `wn` is a bitmask over the node's (sorted) worker list.
    fn value(&mut self, node: usize, wn: &Bits, s: &Bits) -> usize {
        let s = and(s, &self.prep.subtree_mask[node]);
        let key = (node, wn.clone(), s);
        if let Some(&(v, _)) = self.memo.get(&key) {
            return v;
        }
        let (_, wn, s) = &key;
        let (wn, s) = (wn.clone(), s.clone());
        self.expansions += 1;
        let prep = self.prep;
        let result = if first_one(&wn).is_none() {
            let children = prep.tree.nodes[node].children.clone();
            let total = children.iter().map(|&c| self.value(c, &full_mask(prep.node_workers(c).len()), &s)).sum();
            (total, None)
        } else {
            let workers = prep.node_workers(node);
            let remaining: Vec<WorkerId> = ones(&wn).map(|i| workers[i]).collect();
            let base = self.experience.is_some().then(|| prep.state_features(node, &remaining, &s));
            let mut best: Option<(usize, Choice)> = None;
            let lowest = first_one(&wn);
            for (wi, &w) in workers.iter().enumerate() {
                if !bit_get(&wn, wi) || (self.ordered && Some(wi) != lowest) {
                    continue;
                }
                for (qi, q) in prep.seqs(w).iter().enumerate() {
                    if !is_subset(&q.mask, &s) {
                        continue;
                    }
                    let v = q.seq.len() + self.value(node, &without(&wn, wi), &and_not(&s, &q.mask));
                    if let (Some(exp), Some(base)) = (self.experience.as_deref_mut(), base.as_ref()) {
                        exp.push(ExperienceRecord {
                            features: prep.action_features(node, base, &remaining, w, q),
                            opt: v as f64,
                            seq_len: q.seq.len() as u32,
                            remaining_tasks: base.remaining_tasks as u32,
                            key: Some(prep.key(&remaining, &s, w, q)),
                        });
                    }
                    if best.is_none_or(|(b, _)| v > b) {
                        best = Some((v, Choice { worker_idx: wi, seq_idx: qi }));
                    }
                }
            }
            match best {
                Some((v, c)) => (v, Some(c)),
                // A worker missing from the catalog has no sequences; drop it.
                None => {
                    let lowest = lowest.expect("nonempty worker set");
                    (self.value(node, &without(&wn, lowest), &s), None)
                }
            }
        };
        self.memo.insert(key, result);
        result.0
    }

    fn reconstruct(&self, node: usize, wn: &Bits, s: &Bits, plan: &mut Vec<TaskSequence>) {
        let s = and(s, &self.prep.subtree_mask[node]);
        let Some(&(_, choice)) = self.memo.get(&(node, wn.clone(), s.clone())) else {
            return;
        };
        let Some(lowest) = first_one(wn) else {
            for &c in &self.prep.tree.nodes[node].children {
                self.reconstruct(c, &full_mask(self.prep.node_workers(c).len()), &s, plan);
            }
            return;
        };
        match choice {
            Some(c) => {
                let w = self.prep.node_workers(node)[c.worker_idx];
                let q = &self.prep.seqs(w)[c.seq_idx];
                if !q.seq.is_empty() {
                    plan.push(q.seq.clone());
                }
                self.reconstruct(node, &without(wn, c.worker_idx), &and_not(&s, &q.mask), plan);
            }
            None => self.reconstruct(node, &without(wn, lowest), &s, plan),
        }
    }
}

fn full_mask(n: usize) -> Bits {
    let mut b = vec![0u64; n.div_ceil(64).max(1)];
    for i in 0..n {
        bit_set(&mut b, i);
    }
    b
}

/// Which workers of a node an exact search branches on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branching {
    /// Every remaining worker, as in the textbook search.
    #[default]
    AllWorkers,
    /// Only the lowest-id remaining worker. Same optimum, since every joint
    /// assignment can be listed in id order, but the state space grows
    /// linearly rather than exponentially in the node's worker count.
    Ordered,
}

/// Exact search over one tree, branching on every remaining worker. When
/// `experience` is given, every explored (state, action) pair is appended
/// with its exact value.
pub fn dfsearch(tree: &DependencyTree, problem: &Problem<'_>, experience: Option<&mut Experience>) -> SearchOutcome {
    dfsearch_with(tree, problem, experience, Branching::AllWorkers)
}

/// `dfsearch` with a choice of branching rule.
pub fn dfsearch_with(tree: &DependencyTree, problem: &Problem<'_>, experience: Option<&mut Experience>, branching: Branching) -> SearchOutcome {
    if tree.nodes.is_empty() {
        return SearchOutcome {
            assigned: 0,
            plan: Vec::new(),
            expansions: 0,
        };
    }
    let prep = Prepared::new(tree, problem);
    let mut ex = Exact {
        prep: &prep,
        memo: HashMap::new(),
        expansions: 0,
        experience,
        ordered: branching == Branching::Ordered,
    };
    let root_wn = full_mask(prep.node_workers(0).len());
    let s = prep.full_tasks();
    let assigned = ex.value(0, &root_wn, &s);
    let mut plan = Vec::new();
    ex.reconstruct(0, &root_wn, &s, &mut plan);
    SearchOutcome {
        assigned,
        plan,
        expansions: ex.expansions,
    }
}

/// Single greedy pass guided by `v`: each worker, in ascending id order,
/// takes the fitting sequence of highest value; equal values go to the
/// smaller task id sequence. Never backtracks.
pub fn dfsearch_tvf(tree: &DependencyTree, problem: &Problem<'_>, v: &dyn ValueFunction) -> SearchOutcome {
    let mut out = SearchOutcome {
        assigned: 0,
        plan: Vec::new(),
        expansions: 0,
    };
    if tree.nodes.is_empty() {
        return out;
    }
    let prep = Prepared::new(tree, problem);
    let mut s = prep.full_tasks();
    greedy(&prep, 0, &mut s, v, &mut out);
    out.assigned = out.plan.iter().map(|q| q.len()).sum();
    out
}

fn greedy(prep: &Prepared<'_>, node: usize, s_all: &mut Bits, v: &dyn ValueFunction, out: &mut SearchOutcome) {
    let workers = prep.node_workers(node).to_vec();
    for (i, &w) in workers.iter().enumerate() {
        out.expansions += 1;
        let s = and(s_all, &prep.subtree_mask[node]);
        let remaining = &workers[i..];
        let base = prep.state_features(node, remaining, &s);
        let mut best: Option<(f64, &SeqInfo)> = None;
        for q in prep.seqs(w) {
            if !is_subset(&q.mask, &s) {
                continue;
            }
            let feats = prep.action_features(node, &base, remaining, w, q);
            let view = ActionView {
                features: &feats,
                key: v.needs_key().then(|| prep.key(remaining, &s, w, q)),
            };
            let score = v.value(&view);
            let better = match best {
                None => true,
                Some((b, bq)) => score > b || (score == b && q.seq.tasks < bq.seq.tasks),
            };
            if better {
                best = Some((score, q));
            }
        }
        if let Some((_, q)) = best {
            if !q.seq.is_empty() {
                out.plan.push(q.seq.clone());
                *s_all = and_not(s_all, &q.mask);
            }
        }
    }
    out.expansions += 1;
    for &c in &prep.tree.nodes[node].children {
        greedy(prep, c, s_all, v, out);
    }
}
