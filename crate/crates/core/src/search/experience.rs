use std::collections::VecDeque;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::{FeatureScales, FeatureVector, FEATURE_DIM, FEATURE_SCHEMA};
use super::{dfsearch_with, Branching, Problem, StateActionKey};
use crate::depgraph::{build_forest, build_wdg};
use crate::error::{Error, Result};
use crate::model::{Location, Task, TravelModel, Worker};
use crate::seqplan::build_catalog;

const MAGIC: &[u8; 8] = b"CPEXPR\0\0";
const FILE_VERSION: u32 = 1;

/// One explored action and the number of tasks assigned from its state on
/// when the action is taken and the rest is played optimally.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperienceRecord {
    pub features: FeatureVector,
    pub opt: f64,
    pub seq_len: u32,
    pub remaining_tasks: u32,
    /// Exact identity of the pair; kept in memory only.
    pub key: Option<StateActionKey>,
}

/// Bounded replay memory; the oldest records are dropped first.
#[derive(Debug, Clone)]
pub struct Experience {
    records: VecDeque<ExperienceRecord>,
    cap: usize,
}

pub const DEFAULT_EXPERIENCE_CAP: usize = 1_000_000;

impl Default for Experience {
    fn default() -> Self {
        Experience::new(DEFAULT_EXPERIENCE_CAP)
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    feature_schema: u32,
    feature_dim: usize,
    count: usize,
}

impl Experience {
    pub fn new(cap: usize) -> Self {
        Experience {
            records: VecDeque::new(),
            cap: cap.max(1),
        }
    }

    pub fn push(&mut self, r: ExperienceRecord) {
        if self.records.len() == self.cap {
            self.records.pop_front();
        }
        self.records.push_back(r);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &ExperienceRecord> {
        self.records.iter()
    }

    pub fn get(&self, i: usize) -> &ExperienceRecord {
        &self.records[i]
    }

    /// Magic, `u32` header length, JSON header, then per record the
    /// features, `opt`, sequence length and remaining-task count as `f64`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&Header {
            version: FILE_VERSION,
            feature_schema: FEATURE_SCHEMA,
            feature_dim: FEATURE_DIM,
            count: self.records.len(),
        })
        .expect("header serializes");
        let mut out = Vec::with_capacity(12 + header.len() + self.records.len() * (FEATURE_DIM + 3) * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for r in &self.records {
            for v in r.features.iter().chain([r.opt, r.seq_len as f64, r.remaining_tasks as f64].iter()) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> std::result::Result<Self, String> {
        if buf.len() < 12 || &buf[..8] != MAGIC {
            return Err("not an experience file".into());
        }
        let hlen = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
        let hbytes = buf.get(12..12 + hlen).ok_or("truncated header")?;
        let h: Header = serde_json::from_slice(hbytes).map_err(|e| e.to_string())?;
        if h.version != FILE_VERSION || h.feature_schema != FEATURE_SCHEMA || h.feature_dim != FEATURE_DIM {
            return Err(format!(
                "incompatible experience file (version {}, schema {}, dim {})",
                h.version, h.feature_schema, h.feature_dim
            ));
        }
        let body = &buf[12 + hlen..];
        let stride = (FEATURE_DIM + 3) * 8;
        if body.len() != h.count * stride {
            return Err(format!("expected {} records, found {} bytes", h.count, body.len()));
        }
        let mut exp = Experience::new(DEFAULT_EXPERIENCE_CAP.max(h.count));
        for chunk in body.chunks_exact(stride) {
            let vals: Vec<f64> = chunk.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
            let mut features = [0.0; FEATURE_DIM];
            features.copy_from_slice(&vals[..FEATURE_DIM]);
            exp.push(ExperienceRecord {
                features,
                opt: vals[FEATURE_DIM],
                seq_len: vals[FEATURE_DIM + 1] as u32,
                remaining_tasks: vals[FEATURE_DIM + 2] as u32,
                key: None,
            });
        }
        Ok(exp)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Experience::from_bytes(&buf).map_err(|r| Error::format(path, r))
    }
}

/// A self-contained search instance at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub workers: Vec<Worker>,
    pub tasks: Vec<Task>,
    pub t_now: f64,
    pub model: TravelModel,
}

/// Ranges for random instances. Locations are uniform in a square of side
/// `area`; tasks expire uniformly within `[min_valid, max_valid]` of `t_now`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstanceSpec {
    pub max_workers: usize,
    pub max_tasks: usize,
    pub area: f64,
    pub reach: f64,
    pub speed: f64,
    pub min_valid: f64,
    pub max_valid: f64,
    pub availability: f64,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        InstanceSpec {
            max_workers: 4,
            max_tasks: 6,
            area: 3.0,
            reach: 2.0,
            speed: 1.0,
            min_valid: 1.0,
            max_valid: 6.0,
            availability: 8.0,
        }
    }
}

/// Draws an instance with 1..=max_workers workers and 0..=max_tasks tasks.
pub fn random_instance<R: Rng>(rng: &mut R, spec: &InstanceSpec) -> Instance {
    let nw = rng.gen_range(1..=spec.max_workers.max(1));
    let ns = rng.gen_range(0..=spec.max_tasks);
    let loc = |rng: &mut R| Location::new(rng.gen_range(0.0..spec.area), rng.gen_range(0.0..spec.area));
    let workers = (0..nw)
        .map(|i| Worker::new(i as u64 + 1, loc(rng), spec.reach, 0.0, rng.gen_range(spec.availability * 0.5..=spec.availability)))
        .collect();
    let tasks = (0..ns)
        .map(|i| Task::real(i as u64 + 1, loc(rng), 0.0, rng.gen_range(spec.min_valid..=spec.max_valid)))
        .collect();
    Instance {
        workers,
        tasks,
        t_now: 0.0,
        model: TravelModel { speed: spec.speed },
    }
}

/// Runs the exact search over every instance and keeps every explored
/// action. Returns the experience and the summed optimum.
pub fn collect_experience(instances: &[Instance], max_len: usize, scales: &FeatureScales, cap: usize) -> (Experience, usize) {
    collect_experience_with(instances, max_len, scales, cap, Branching::AllWorkers)
}

/// `collect_experience` with a choice of branching rule. `Ordered` visits
/// exactly the states a value-guided pass meets, in far fewer steps.
pub fn collect_experience_with(instances: &[Instance], max_len: usize, scales: &FeatureScales, cap: usize, branching: Branching) -> (Experience, usize) {
    let mut exp = Experience::new(cap);
    let mut total = 0;
    for inst in instances {
        let cat = build_catalog(&inst.workers, &inst.tasks, inst.t_now, &inst.model, max_len);
        let problem = Problem {
            workers: &inst.workers,
            tasks: &inst.tasks,
            catalog: &cat,
            t_now: inst.t_now,
            model: inst.model,
            scales: *scales,
        };
        for tree in build_forest(&build_wdg(&cat)) {
            total += dfsearch_with(&tree, &problem, Some(&mut exp), branching).assigned;
        }
    }
    (exp, total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_buffer_drops_oldest() {
        let mut e = Experience::new(2);
        for i in 0..3 {
            e.push(ExperienceRecord {
                features: [i as f64; FEATURE_DIM],
                opt: i as f64,
                seq_len: 0,
                remaining_tasks: 0,
                key: None,
            });
        }
        assert_eq!(e.len(), 2);
        assert_eq!(e.get(0).opt, 1.0);
    }

    #[test]
    fn bytes_round_trip() {
        let mut e = Experience::new(10);
        e.push(ExperienceRecord {
            features: [0.25; FEATURE_DIM],
            opt: 3.0,
            seq_len: 2,
            remaining_tasks: 5,
            key: None,
        });
        let back = Experience::from_bytes(&e.to_bytes()).unwrap();
        assert_eq!(back.get(0), e.get(0));
        let mut bad = e.to_bytes();
        bad.pop();
        assert!(Experience::from_bytes(&bad).is_err());
    }
}
