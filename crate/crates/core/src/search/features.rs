use serde::{Deserialize, Serialize};

/// Length of the state/action encoding.
pub const FEATURE_DIM: usize = 11;

/// Version tag of the encoding; stored with experience files and value
/// parameters so incompatible files are rejected.
pub const FEATURE_SCHEMA: u32 = 1;

pub type FeatureVector = [f64; FEATURE_DIM];

/// Reference magnitudes that bring each feature near unit scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureScales {
    pub workers: f64,
    pub tasks: f64,
    /// Seconds, for slack and completion offsets.
    pub time: f64,
    /// Seconds, for the availability window.
    pub availability: f64,
    /// Kilometers.
    pub distance: f64,
    pub max_len: f64,
}

impl Default for FeatureScales {
    fn default() -> Self {
        FeatureScales {
            workers: 10.0,
            tasks: 20.0,
            time: 60.0,
            availability: 3600.0,
            distance: 1.0,
            max_len: 4.0,
        }
    }
}

/// Raw quantities of one (state, action) pair before scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawFeatures {
    pub remaining_workers: usize,
    pub remaining_tasks: usize,
    /// Mean, min and max of `exp_time - t_now` over the remaining tasks
    /// (all zero when there are none).
    pub slack: (f64, f64, f64),
    pub availability: f64,
    pub seq_len: usize,
    /// `completion - t_now`, zero for the empty sequence.
    pub completion_offset: f64,
    /// Kilometers from the worker through every task of the sequence.
    pub travel_distance: f64,
    /// Other remaining workers whose reachable set meets the sequence.
    pub conflicts: usize,
}

impl RawFeatures {
    pub fn scaled(&self, s: &FeatureScales) -> FeatureVector {
        let cover = if self.remaining_tasks == 0 {
            0.0
        } else {
            self.seq_len as f64 / self.remaining_tasks as f64
        };
        [
            self.remaining_workers as f64 / s.workers,
            self.remaining_tasks as f64 / s.tasks,
            self.slack.0 / s.time,
            self.slack.1 / s.time,
            self.slack.2 / s.time,
            self.availability / s.availability,
            self.seq_len as f64 / s.max_len,
            self.completion_offset / s.time,
            self.travel_distance / s.distance,
            cover,
            self.conflicts as f64 / s.workers,
        ]
    }
}
