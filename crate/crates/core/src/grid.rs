//! Uniform spatial grid, per-cell binary task-occurrence series and the
//! average-precision metric used to score demand forecasts.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Location, Task};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BoundingBox {
    pub const fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        BoundingBox {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn contains(&self, loc: &Location) -> bool {
        loc.x >= self.min_x && loc.x <= self.max_x && loc.y >= self.min_y && loc.y <= self.max_y
    }
}

/// A `rows x cols` partition of a bounding box. Cells are numbered
/// row-major starting from the lower-left corner, so cell `0` is the
/// bottom-left cell and cell `rows * cols - 1` the top-right one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub bbox: BoundingBox,
    pub rows: usize,
    pub cols: usize,
}

pub fn build_grid(bbox: BoundingBox, rows: usize, cols: usize) -> Result<GridSpec> {
    let finite = [bbox.min_x, bbox.min_y, bbox.max_x, bbox.max_y].iter().all(|v| v.is_finite());
    if !finite || bbox.max_x <= bbox.min_x || bbox.max_y <= bbox.min_y {
        return Err(Error::Config(format!("degenerate bounding box {bbox:?}")));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::Config("grid needs at least one row and one column".into()));
    }
    Ok(GridSpec { bbox, rows, cols })
}

impl GridSpec {
    pub fn cell_count(&self) -> usize {
        self.rows * self.cols
    }

    fn cell_w(&self) -> f64 {
        self.bbox.width() / self.cols as f64
    }

    fn cell_h(&self) -> f64 {
        self.bbox.height() / self.rows as f64
    }

    /// Cell holding `loc`, or `None` outside the bounding box.
    ///
    /// Interior boundary points go to the cell whose lower/left edge they
    /// lie on; the top and right edges of the box fold into the last row
    /// and column.
    pub fn cell_of(&self, loc: &Location) -> Option<usize> {
        if !self.bbox.contains(loc) {
            return None;
        }
        let col = (((loc.x - self.bbox.min_x) / self.cell_w()).floor() as usize).min(self.cols - 1);
        let row = (((loc.y - self.bbox.min_y) / self.cell_h()).floor() as usize).min(self.rows - 1);
        Some(row * self.cols + col)
    }

    pub fn centroid(&self, cell: usize) -> Location {
        let row = cell / self.cols;
        let col = cell % self.cols;
        Location::new(
            self.bbox.min_x + (col as f64 + 0.5) * self.cell_w(),
            self.bbox.min_y + (row as f64 + 0.5) * self.cell_h(),
        )
    }
}

/// Occurrence vector of one cell over `k` consecutive slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandVector {
    pub t_start: f64,
    pub values: Vec<f64>,
}

/// Time layout shared by series, forecasts and the engine's forecaster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesLayout {
    /// Start of the first window.
    pub t0: f64,
    /// Slot length in seconds.
    pub dt: f64,
    /// Slots per vector.
    pub k: usize,
    /// Vectors per cell.
    pub p: usize,
}

impl SeriesLayout {
    pub fn window_len(&self) -> f64 {
        self.k as f64 * self.dt
    }

    /// Left edge of vector `window`.
    pub fn window_start(&self, window: usize) -> f64 {
        self.t0 + (window * self.k) as f64 * self.dt
    }

    /// `[lo, hi)` bounds of slot `j` (0-based) of vector `window`.
    pub fn slot_bounds(&self, window: usize, j: usize) -> (f64, f64) {
        let t = self.window_start(window);
        (t + j as f64 * self.dt, t + (j + 1) as f64 * self.dt)
    }

    /// `(window, slot)` whose bounds contain `time`, if within `p` windows.
    pub fn locate(&self, time: f64) -> Option<(usize, usize)> {
        if !time.is_finite() || time < self.t0 {
            return None;
        }
        let total = self.p * self.k;
        let guess = ((time - self.t0) / self.dt).floor();
        if guess < 0.0 || guess > (total + 1) as f64 {
            return None;
        }
        let guess = guess as usize;
        // The floor guess can be off by one next to a slot edge; settle it
        // against the exact bound expressions.
        for slot in guess.saturating_sub(1)..=guess + 1 {
            if slot >= total {
                break;
            }
            let (lo, hi) = self.slot_bounds(slot / self.k, slot % self.k);
            if lo <= time && time < hi {
                return Some((slot / self.k, slot % self.k));
            }
        }
        None
    }

    fn check(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) || !self.t0.is_finite() {
            return Err(Error::Config(format!("bad series layout {self:?}")));
        }
        if self.k == 0 || self.p == 0 {
            return Err(Error::Config("k and P must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-cell binary occurrence series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSeries {
    pub layout: SeriesLayout,
    /// `cells[i][p]` is vector `p` of cell `i`.
    pub cells: Vec<Vec<DemandVector>>,
    /// Tasks that fell outside the time range or the grid.
    pub ignored: usize,
}

impl TaskSeries {
    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Number of 1-entries across all cells and slots.
    pub fn occupied(&self) -> usize {
        self.cells
            .iter()
            .flatten()
            .flat_map(|v| v.values.iter())
            .filter(|&&v| v == 1.0)
            .count()
    }

    /// Writes one row per (cell, vector) in cell-major order: `t_start`
    /// followed by the `k` slot values.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["t_start".to_string()];
        header.extend((1..=self.layout.k).map(|j| format!("c{j}")));
        wtr.write_record(&header).map_err(csv_err)?;
        for cell in &self.cells {
            for v in cell {
                let mut row = vec![v.t_start.to_string()];
                row.extend(v.values.iter().map(|x| x.to_string()));
                wtr.write_record(&row).map_err(csv_err)?;
            }
        }
        wtr.flush().map_err(|e| Error::io("<series csv>", e))?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::format("<series csv>", e.to_string())
}

/// Builds the occurrence series: slot `j` of vector `p` in cell `i` is 1 iff
/// some task published in cell `i` falls inside that slot's `[lo, hi)`.
pub fn build_series(tasks: &[Task], grid: &GridSpec, layout: SeriesLayout) -> Result<TaskSeries> {
    layout.check()?;
    let mut cells: Vec<Vec<DemandVector>> = (0..grid.cell_count())
        .map(|_| {
            (0..layout.p)
                .map(|p| DemandVector {
                    t_start: layout.window_start(p),
                    values: vec![0.0; layout.k],
                })
                .collect()
        })
        .collect();
    let mut ignored = 0;
    for s in tasks {
        match (grid.cell_of(&s.loc), layout.locate(s.pub_time)) {
            (Some(cell), Some((p, j))) => cells[cell][p].values[j] = 1.0,
            _ => ignored += 1,
        }
    }
    if ignored > 0 {
        log::warn!("{ignored} task(s) outside the series range were ignored");
    }
    Ok(TaskSeries { layout, cells, ignored })
}

/// Number of threshold steps in the precision/recall sweep (0.00..=1.00).
pub const AP_THRESHOLD_STEPS: usize = 100;

/// Area under the precision/recall curve over the thresholds
/// `0, 0.01, ..., 1.00`.
///
/// A score counts as positive at threshold `tau` when `score >= tau`.
/// Thresholds with no predicted positives have no defined precision and are
/// skipped. Precision is replaced by its running maximum toward higher
/// recall (the usual monotone envelope) and the curve, closed at recall 0,
/// is integrated with the trapezoid rule.
pub fn average_precision(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Config(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&l| l != 0).count();
    if positives == 0 {
        return Err(Error::UndefinedMetric("average precision needs at least one positive label".into()));
    }
    // (recall, precision) points, one per threshold with defined precision.
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(AP_THRESHOLD_STEPS + 1);
    for step in 0..=AP_THRESHOLD_STEPS {
        let tau = step as f64 / AP_THRESHOLD_STEPS as f64;
        let (mut tp, mut fp) = (0usize, 0usize);
        for (&s, &l) in scores.iter().zip(labels) {
            if s >= tau {
                if l != 0 {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        if tp + fp == 0 {
            continue;
        }
        points.push((tp as f64 / positives as f64, tp as f64 / (tp + fp) as f64));
    }
    if points.is_empty() {
        return Ok(0.0);
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    // Envelope: precision at recall r is the best precision at recall >= r.
    let mut best = 0.0f64;
    for pt in points.iter_mut().rev() {
        best = best.max(pt.1);
        pt.1 = best;
    }
    let mut area = 0.0;
    let mut prev = (0.0, points[0].1);
    for &(r, p) in &points {
        area += (r - prev.0) * (p + prev.1) / 2.0;
        prev = (r, p);
    }
    Ok(area.clamp(0.0, 1.0))
}
