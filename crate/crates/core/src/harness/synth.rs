use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stream::{Event, EventStream};
use crate::engine::ForecastConfig;
use crate::error::{Error, Result};
use crate::grid::{build_grid, BoundingBox, GridSpec, SeriesLayout};
use crate::model::{Location, Task, Worker, WorkerId};

/// Activation of a hotspot that copies another one with a delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HotspotLink {
    /// Index of an earlier hotspot in the list.
    pub leader: usize,
    /// Delay in windows.
    pub lag: usize,
}

/// Fixed on/off schedule: active in window `w` iff
/// `(w + phase) % (on + off) < on`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cycle {
    pub on: usize,
    pub off: usize,
    pub phase: usize,
}

/// A grid cell that periodically emits tasks near its centroid.
///
/// A hotspot is either active or idle for a whole window. Leaders follow
/// their `cycle` when one is given and otherwise switch by a two-state
/// Markov chain; followers are active exactly when their
/// leader was active `lag` windows earlier. In an active window each listed
/// slot receives `burst` independent draws, each a task with probability
/// `rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hotspot {
    pub cell: usize,
    pub slots: Vec<usize>,
    pub rate: f64,
    pub burst: usize,
    pub follows: Option<HotspotLink>,
    pub cycle: Option<Cycle>,
    /// Idle-to-active switching probability per window (leaders only).
    pub p_on: f64,
    /// Active-to-idle switching probability per window (leaders only).
    pub p_off: f64,
    /// Half-width in km of the square around the centroid where tasks land.
    pub spread: f64,
}

impl Default for Hotspot {
    fn default() -> Self {
        Hotspot {
            cell: 0,
            slots: vec![0, 6],
            rate: 1.0,
            burst: 1,
            follows: None,
            cycle: None,
            p_on: 0.3,
            p_off: 0.3,
            spread: 0.1,
        }
    }
}

/// Parameters of a synthetic stream. Times in seconds, distances in km.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadConfig {
    pub workers: usize,
    /// Tasks published during `[t_start, t_start + duration)`.
    pub tasks: usize,
    pub bbox: BoundingBox,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub t_start: f64,
    pub duration: f64,
    /// Windows of task-only history before `t_start`; their tasks expire
    /// by `t_start` at the latest.
    pub history_windows: usize,
    /// Slot length.
    pub dt: f64,
    /// Slots per window.
    pub k: usize,
    pub reach_min: f64,
    pub reach_max: f64,
    /// `off_time - on_time` of every worker.
    pub availability: f64,
    /// `exp_time - pub_time` of every task.
    pub valid: f64,
    pub speed_kmh: f64,
    pub hotspots: Vec<Hotspot>,
    pub seed: u64,
}

impl Default for WorkloadConfig {
    /// 50 workers and 500 tasks over ten minutes on a 4 x 4 km grid. Eight
    /// cells burst with three tasks every other slot, one window in four,
    /// at staggered phases; the rest of the tasks are uniform background.
    fn default() -> Self {
        let burst = |cell, phase| Hotspot {
            cell,
            slots: vec![0, 2, 4, 6, 8, 10],
            burst: 3,
            cycle: Some(Cycle { on: 1, off: 3, phase }),
            ..Hotspot::default()
        };
        let cells = [(0, 0), (5, 1), (10, 2), (15, 3), (3, 2), (12, 0), (6, 3), (9, 1)];
        WorkloadConfig {
            workers: 50,
            tasks: 500,
            bbox: BoundingBox::new(0.0, 0.0, 4.0, 4.0),
            grid_rows: 4,
            grid_cols: 4,
            t_start: 0.0,
            duration: 600.0,
            history_windows: 4,
            dt: 5.0,
            k: 12,
            reach_min: 1.0,
            reach_max: 1.0,
            availability: 3600.0,
            valid: 40.0,
            speed_kmh: 40.0,
            hotspots: cells.iter().map(|&(c, p)| burst(c, p)).collect(),
            seed: 1,
        }
    }
}

impl WorkloadConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let grid = self.grid()?;
        if !(self.duration > 0.0 && self.dt > 0.0 && self.valid > 0.0 && self.availability > 0.0 && self.speed_kmh > 0.0) {
            return bad("duration, dt, valid, availability and speed must be positive".into());
        }
        if !self.t_start.is_finite() || !self.duration.is_finite() {
            return bad("time range must be finite".into());
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(self.reach_min > 0.0 && self.reach_max >= self.reach_min && self.reach_max.is_finite()) {
            return bad("reach range must satisfy 0 < reach_min <= reach_max".into());
        }
        for (i, h) in self.hotspots.iter().enumerate() {
            if h.cell >= grid.cell_count() {
                return bad(format!("hotspot {i} names cell {} of {}", h.cell, grid.cell_count()));
            }
            if h.slots.iter().any(|&j| j >= self.k) {
                return bad(format!("hotspot {i} lists a slot beyond k = {}", self.k));
            }
            let probs = [h.rate, h.p_on, h.p_off];
            if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || !(h.spread >= 0.0) {
                return bad(format!("hotspot {i} has an out-of-range probability or spread"));
            }
            if h.cycle.is_some_and(|c| c.on + c.off == 0) {
                return bad(format!("hotspot {i} has an empty cycle"));
            }
            if h.follows.is_some_and(|l| l.leader >= i) {
                return bad(format!("hotspot {i} must follow an earlier hotspot"));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        build_grid(self.bbox, self.grid_rows, self.grid_cols)
    }

    pub fn window_len(&self) -> f64 {
        self.k as f64 * self.dt
    }

    /// Start of the first history window.
    pub fn t0(&self) -> f64 {
        self.t_start - self.history_windows as f64 * self.window_len()
    }

    /// Total windows, history included.
    pub fn window_count(&self) -> usize {
        self.history_windows + (self.duration / self.window_len()).ceil() as usize
    }

    /// Layout covering every window of the stream with `p` vectors.
    pub fn layout(&self) -> SeriesLayout {
        SeriesLayout {
            t0: self.t0(),
            dt: self.dt,
            k: self.k,
            p: self.window_count(),
        }
    }

    /// Task-only stream settings for fitting a demand model: the same
    /// hotspots and task density over `windows` windows, without history.
    pub fn demand_training(&self, windows: usize, seed: u64) -> WorkloadConfig {
        let duration = windows as f64 * self.window_len();
        WorkloadConfig {
            workers: 0,
            tasks: (self.tasks as f64 * duration / self.duration).round() as usize,
            t_start: self.t_start,
            duration,
            history_windows: 0,
            seed,
            ..self.clone()
        }
    }

    pub fn forecast_config(&self, threshold: f64) -> Result<ForecastConfig> {
        Ok(ForecastConfig {
            grid: self.grid()?,
            t0: self.t0(),
            dt: self.dt,
            threshold,
            valid: self.valid,
        })
    }
}

/// Active flags per hotspot and window.
pub fn hotspot_activity(cfg: &WorkloadConfig, rng: &mut impl Rng) -> Vec<Vec<bool>> {
    let n = cfg.window_count();
    let mut act: Vec<Vec<bool>> = Vec::with_capacity(cfg.hotspots.len());
    for h in &cfg.hotspots {
        let row = match (h.follows, h.cycle) {
            (Some(l), _) => (0..n).map(|w| w >= l.lag && act[l.leader][w - l.lag]).collect(),
            (None, Some(c)) => (0..n).map(|w| (w + c.phase) % (c.on + c.off) < c.on).collect(),
            (None, None) => {
                let stationary = if h.p_on + h.p_off > 0.0 { h.p_on / (h.p_on + h.p_off) } else { 0.0 };
                let mut on = rng.gen_bool(stationary);
                (0..n)
                    .map(|w| {
                        if w > 0 {
                            on = if on { !rng.gen_bool(h.p_off) } else { rng.gen_bool(h.p_on) };
                        }
                        on
                    })
                    .collect()
            }
        };
        act.push(row);
    }
    act
}

/// Generates a stream: hotspot tasks following the activity schedule,
/// uniform background tasks making up the rest of `tasks`, and workers
/// arriving uniformly over the time range at uniform locations.
pub fn synth_workload(cfg: &WorkloadConfig) -> Result<EventStream> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let grid = cfg.grid()?;
    let layout = cfg.layout();
    let t_end = cfg.t_start + cfg.duration;
    let act = hotspot_activity(cfg, &mut rng);

    // (pub_time, location); ids are assigned after sorting.
    let mut hot_hist = Vec::new();
    let mut hot_main = Vec::new();
    for (h, spot) in cfg.hotspots.iter().enumerate() {
        let cell_w = cfg.bbox.width() / cfg.grid_cols as f64;
        let cell_h = cfg.bbox.height() / cfg.grid_rows as f64;
        let half_x = spot.spread.min(cell_w / 2.0);
        let half_y = spot.spread.min(cell_h / 2.0);
        let c = grid.centroid(spot.cell);
        for (w, &on) in act[h].iter().enumerate() {
            for &j in spot.slots.iter().flat_map(|j| std::iter::repeat_n(j, spot.burst)) {
                if !(on && rng.gen_bool(spot.rate)) {
                    continue;
                }
                let (lo, hi) = layout.slot_bounds(w, j);
                let t = rng.gen_range(lo..hi);
                let loc = Location::new(
                    c.x + if half_x > 0.0 { rng.gen_range(-half_x..half_x) } else { 0.0 },
                    c.y + if half_y > 0.0 { rng.gen_range(-half_y..half_y) } else { 0.0 },
                );
                if t < cfg.t_start {
                    hot_hist.push((t, loc));
                } else if t < t_end {
                    hot_main.push((t, loc));
                }
            }
        }
    }
    if hot_main.len() > cfg.tasks {
        let keep = sample(&mut rng, hot_main.len(), cfg.tasks).into_vec();
        let mut keep_sorted = keep;
        keep_sorted.sort_unstable();
        hot_main = keep_sorted.into_iter().map(|i| hot_main[i]).collect();
    }
    let background = cfg.tasks - hot_main.len();
    let history_span = cfg.t_start - cfg.t0();
    let background_hist = (background as f64 * history_span / cfg.duration).round() as usize;
    let uniform_loc = |rng: &mut ChaCha8Rng| Location::new(rng.gen_range(cfg.bbox.min_x..cfg.bbox.max_x), rng.gen_range(cfg.bbox.min_y..cfg.bbox.max_y));
    let mut all: Vec<(f64, Location)> = hot_hist;
    for _ in 0..background_hist {
        let t = rng.gen_range(cfg.t0()..cfg.t_start);
        all.push((t, uniform_loc(&mut rng)));
    }
    all.extend(hot_main);
    for _ in 0..background {
        let t = rng.gen_range(cfg.t_start..t_end);
        all.push((t, uniform_loc(&mut rng)));
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut events: Vec<Event> = all
        .into_iter()
        .enumerate()
        .map(|(i, (t, loc))| {
            let exp = if t < cfg.t_start { (t + cfg.valid).min(cfg.t_start) } else { t + cfg.valid };
            Event::Task(Task::real(i as u64 + 1, loc, t, exp))
        })
        .collect();
    let mut workers: Vec<(f64, Location, f64)> = (0..cfg.workers)
        .map(|_| {
            let on = rng.gen_range(cfg.t_start..t_end);
            let loc = uniform_loc(&mut rng);
            let reach = if cfg.reach_max > cfg.reach_min { rng.gen_range(cfg.reach_min..=cfg.reach_max) } else { cfg.reach_min };
            (on, loc, reach)
        })
        .collect();
    workers.sort_by(|a, b| a.0.total_cmp(&b.0));
    events.extend(workers.into_iter().enumerate().map(|(i, (on, loc, reach))| {
        Event::Worker(Worker {
            id: WorkerId(i as u64 + 1),
            loc,
            reach,
            on_time: on,
            off_time: on + cfg.availability,
        })
    }));
    Ok(EventStream::new(events))
}

/// Task-only stream on a 1 x 2 grid: the leader cell is active one window
/// in three and the follower copies it a window later. Used to check that
/// the demand model picks up a cross-cell lag.
pub fn lag_coupled_config(seed: u64) -> WorkloadConfig {
    WorkloadConfig {
        workers: 0,
        // Exactly the hotspot output: 40 active windows per cell, three
        // slots each. No background.
        tasks: 240,
        bbox: BoundingBox::new(0.0, 0.0, 2.0, 1.0),
        grid_rows: 1,
        grid_cols: 2,
        t_start: 0.0,
        duration: 120.0 * 12.0 * 5.0,
        history_windows: 0,
        hotspots: vec![
            Hotspot {
                cell: 0,
                slots: vec![0, 4, 8],
                cycle: Some(Cycle { on: 1, off: 2, phase: 0 }),
                ..Hotspot::default()
            },
            Hotspot {
                cell: 1,
                slots: vec![0, 4, 8],
                follows: Some(HotspotLink { leader: 0, lag: 1 }),
                ..Hotspot::default()
            },
        ],
        seed,
        ..WorkloadConfig::default()
    }
}
