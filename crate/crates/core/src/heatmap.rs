//! Interaction density grids over the normalized question canvas.

use serde::{Deserialize, Serialize};

use crate::event::{RawEvent, Session};
use crate::{Error, Result};

pub const DEFAULT_RESOLUTION: usize = 64;
pub const DEFAULT_SIGMA: f64 = 1.5;

/// Row-major grid; cell `(i, j)` covers `x in [i/W, (i+1)/W)`,
/// `y in [j/H, (j+1)/H)` and lives at index `j * W + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatGrid {
    pub width: usize,
    pub height: usize,
    /// Smoothing bandwidth in cells; 0 means unsmoothed.
    pub sigma: f64,
    pub total_mass: f64,
    pub cells: Vec<f64>,
}

impl HeatGrid {
    pub fn zeros(width: usize, height: usize) -> Result<HeatGrid> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("grid dimensions must be positive"));
        }
        Ok(HeatGrid {
            width,
            height,
            sigma: 0.0,
            total_mass: 0.0,
            cells: vec![0.0; width * height],
        })
    }

    /// Cell containing a normalized point; the right/bottom edge folds into
    /// the last column/row.
    pub fn cell_of(&self, x: f64, y: f64) -> (usize, usize) {
        cell_of(self.width, self.height, x, y)
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cells[self.index(i, j)]
    }

    /// Normalized coordinates of a cell's center.
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            (i as f64 + 0.5) / self.width as f64,
            (j as f64 + 0.5) / self.height as f64,
        )
    }

    pub fn max(&self) -> f64 {
        self.cells.iter().copied().fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.cells.iter().sum()
    }

    fn add(&mut self, x: f64, y: f64, w: f64) {
        let (i, j) = self.cell_of(x, y);
        let idx = self.index(i, j);
        self.cells[idx] += w;
        self.total_mass += w;
    }

    /// Binary portable graymap (P5) of the max-normalized grid.
    pub fn to_pgm(&self) -> Vec<u8> {
        let norm = normalize_grid(self);
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(
            norm.cells
                .iter()
                .map(|&v| (255.0 * v).round().clamp(0.0, 255.0) as u8),
        );
        out
    }
}

pub(crate) fn cell_of(width: usize, height: usize, x: f64, y: f64) -> (usize, usize) {
    let fold = |v: f64, n: usize| ((v * n as f64).floor().max(0.0) as usize).min(n - 1);
    (fold(x, width), fold(y, height))
}

/// Counts positional events per cell. Non-positional events are ignored.
pub fn accumulate_grid<'a, I>(events: I, width: usize, height: usize) -> Result<HeatGrid>
where
    I: IntoIterator<Item = &'a RawEvent>,
{
    let mut grid = HeatGrid::zeros(width, height)?;
    for (x, y) in events.into_iter().filter_map(RawEvent::position) {
        grid.add(x, y, 1.0);
    }
    Ok(grid)
}

/// Dwell-weighted variant: each positional sample is weighted by the time
/// until the session's next event, rescaled per session so that the
/// weights average 1. Total mass still equals the positional count.
/// Sessions whose positional samples all have zero dwell fall back to
/// unit weights.
pub fn accumulate_grid_dwell<'a, I>(sessions: I, width: usize, height: usize) -> Result<HeatGrid>
where
    I: IntoIterator<Item = &'a Session>,
{
    let mut grid = HeatGrid::zeros(width, height)?;
    for s in sessions {
        let samples: Vec<((f64, f64), f64)> = s
            .events
            .iter()
            .enumerate()
            .filter_map(|(k, e)| {
                let pos = e.position()?;
                let next = s.events.get(k + 1).map_or(e.t_ms, |n| n.t_ms);
                Some((pos, (next - e.t_ms) as f64))
            })
            .collect();
        if samples.is_empty() {
            continue;
        }
        let total: f64 = samples.iter().map(|(_, d)| d).sum();
        let n = samples.len() as f64;
        for ((x, y), dwell) in samples {
            let w = if total > 0.0 { dwell * n / total } else { 1.0 };
            grid.add(x, y, w);
        }
    }
    Ok(grid)
}

/// Per-source normalized 1-D Gaussian weights, truncated at `radius`.
/// `weights[src]` lists `(target, weight)` pairs summing to 1.
fn scatter_weights(n: usize, sigma: f64, radius: usize) -> Vec<Vec<(usize, f64)>> {
    let kernel: Vec<f64> = (0..=radius)
        .map(|d| (-(d as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    (0..n)
        .map(|src| {
            let lo = src.saturating_sub(radius);
            let hi = (src + radius).min(n - 1);
            let norm: f64 = (lo..=hi).map(|t| kernel[t.abs_diff(src)]).sum();
            (lo..=hi)
                .map(|t| (t, kernel[t.abs_diff(src)] / norm))
                .collect()
        })
        .collect()
}

/// Gaussian smoothing with a `ceil(3 sigma)` square window.
///
/// Each source cell spreads its mass over the in-grid part of its window
/// with weights renormalized to sum to one, so mass is conserved exactly at
/// the borders. The kernel is separable and the in-grid window is a
/// rectangle, so rows and columns are processed independently.
pub fn smooth_grid(grid: &HeatGrid, sigma: f64) -> Result<HeatGrid> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(grid.clone());
    }
    let radius = (3.0 * sigma).ceil() as usize;
    let (w, h) = (grid.width, grid.height);
    let wx = scatter_weights(w, sigma, radius);
    let wy = scatter_weights(h, sigma, radius);

    let mut rows = vec![0.0; w * h];
    for j in 0..h {
        for i in 0..w {
            let v = grid.cells[j * w + i];
            if v == 0.0 {
                continue;
            }
            for &(t, k) in &wx[i] {
                rows[j * w + t] += v * k;
            }
        }
    }
    let mut cells = vec![0.0; w * h];
    for j in 0..h {
        for i in 0..w {
            let v = rows[j * w + i];
            if v == 0.0 {
                continue;
            }
            for &(t, k) in &wy[j] {
                cells[t * w + i] += v * k;
            }
        }
    }
    let total_mass = cells.iter().sum();
    Ok(HeatGrid {
        width: w,
        height: h,
        sigma,
        total_mass,
        cells,
    })
}

/// Scales cells so the maximum is 1. An all-zero grid is returned as is.
pub fn normalize_grid(grid: &HeatGrid) -> HeatGrid {
    let max = grid.max();
    let mut out = grid.clone();
    if max > 0.0 {
        for c in &mut out.cells {
            *c /= max;
        }
        out.total_mass = out.cells.iter().sum();
    }
    out
}
