//! Regions of interest: dense-interaction areas extracted from a smoothed
//! heat grid, and the assignment of events to them.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::event::{EventType, Session};
use crate::heatmap::{cell_of, HeatGrid};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiParams {
    /// Threshold as a fraction of the grid maximum, in (0, 1].
    pub tau: f64,
    /// Agglomerative merge distance in normalized units (the "ROI size").
    pub merge_radius: f64,
    pub min_events: usize,
    pub time_bins: usize,
}

impl Default for RoiParams {
    fn default() -> Self {
        RoiParams {
            tau: 0.25,
            merge_radius: 0.05,
            min_events: 5,
            time_bins: 5,
        }
    }
}

impl RoiParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::invalid(format!("tau must be in (0,1], got {}", self.tau)));
        }
        if !(self.merge_radius >= 0.0) {
            return Err(Error::invalid(format!(
                "merge radius must be >= 0, got {}",
                self.merge_radius
            )));
        }
        if self.time_bins == 0 {
            return Err(Error::invalid("time_bins must be >= 1"));
        }
        Ok(())
    }
}

/// A positional event reduced to what ROI assignment needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedPoint {
    pub x: f64,
    pub y: f64,
    pub t_norm: f64,
    pub event_type: EventType,
}

/// Positional events of the given sessions with their normalized times.
pub fn timed_points<'a, I>(sessions: I) -> Vec<TimedPoint>
where
    I: IntoIterator<Item = &'a Session>,
{
    sessions
        .into_iter()
        .flat_map(|s| {
            s.positional().map(|(e, t)| {
                let (x, y) = e.position().expect("positional");
                TimedPoint {
                    x,
                    y,
                    t_norm: t,
                    event_type: e.event_type,
                }
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub roi_id: usize,
    /// Row-major grid cell indices.
    #[serde(skip_serializing, default)]
    pub cells: Vec<usize>,
    pub centroid: [f64; 2],
    /// `[x_min, y_min, x_max, y_max]`
    pub bbox: [f64; 4],
    pub event_count: usize,
    pub type_counts: BTreeMap<EventType, usize>,
    pub time_hist: Vec<usize>,
}

/// ROIs of one grid plus the cell -> ROI lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiSet {
    pub width: usize,
    pub height: usize,
    pub rois: Vec<Roi>,
    /// Positional events that fell in no ROI.
    pub unassigned: usize,
    owner: Vec<Option<usize>>,
}

impl RoiSet {
    fn empty(width: usize, height: usize, unassigned: usize) -> RoiSet {
        RoiSet {
            width,
            height,
            rois: Vec::new(),
            unassigned,
            owner: vec![None; width * height],
        }
    }

    /// ROI id containing a normalized point.
    pub fn locate(&self, x: f64, y: f64) -> Option<usize> {
        let (i, j) = cell_of(self.width, self.height, x, y);
        self.owner[j * self.width + i]
    }

    pub fn len(&self) -> usize {
        self.rois.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rois.is_empty()
    }

    /// Builds ROIs from explicit cell regions (e.g. fixed answer widgets)
    /// instead of density thresholding. Centroids are unweighted.
    pub fn from_regions(
        width: usize,
        height: usize,
        regions: Vec<Vec<(usize, usize)>>,
        events: &[TimedPoint],
        time_bins: usize,
    ) -> Result<RoiSet> {
        if width == 0 || height == 0 || time_bins == 0 {
            return Err(Error::invalid("grid dimensions and time_bins must be positive"));
        }
        let mut seen = vec![false; width * height];
        let mut clusters = Vec::with_capacity(regions.len());
        for (key, region) in regions.into_iter().enumerate() {
            if region.is_empty() {
                return Err(Error::invalid("ROI region must not be empty"));
            }
            let mut c = Cluster::new(key);
            for (i, j) in region {
                if i >= width || j >= height {
                    return Err(Error::invalid(format!("cell ({i},{j}) outside grid")));
                }
                let idx = j * width + i;
                if std::mem::replace(&mut seen[idx], true) {
                    return Err(Error::invalid(format!("cell ({i},{j}) in two regions")));
                }
                c.push(idx, width, height, 1.0);
            }
            clusters.push(c);
        }
        Ok(finalize(width, height, clusters, events, time_bins))
    }
}

#[derive(Debug, Clone)]
struct Cluster {
    /// Smallest original component id merged into this cluster.
    key: usize,
    cells: Vec<usize>,
    mass: f64,
    mx: f64,
    my: f64,
}

impl Cluster {
    fn new(key: usize) -> Cluster {
        Cluster {
            key,
            cells: Vec::new(),
            mass: 0.0,
            mx: 0.0,
            my: 0.0,
        }
    }

    fn push(&mut self, idx: usize, width: usize, height: usize, weight: f64) {
        let (cx, cy) = center(idx, width, height);
        self.cells.push(idx);
        self.mass += weight;
        self.mx += weight * cx;
        self.my += weight * cy;
    }

    fn centroid(&self) -> (f64, f64) {
        (self.mx / self.mass, self.my / self.mass)
    }

    fn absorb(&mut self, other: Cluster) {
        self.key = self.key.min(other.key);
        self.cells.extend(other.cells);
        self.mass += other.mass;
        self.mx += other.mx;
        self.my += other.my;
    }

    fn distance(&self, other: &Cluster) -> f64 {
        let (ax, ay) = self.centroid();
        let (bx, by) = other.centroid();
        (ax - bx).hypot(ay - by)
    }
}

fn center(idx: usize, width: usize, height: usize) -> (f64, f64) {
    let (i, j) = (idx % width, idx / width);
    (
        (i as f64 + 0.5) / width as f64,
        (j as f64 + 0.5) / height as f64,
    )
}

/// Thresholds the grid and labels 8-connected components of the kept cells.
/// Components are numbered in row-major order of their first cell; the
/// returned vectors hold cell indices.
pub fn threshold_components(grid: &HeatGrid, tau: f64) -> Vec<Vec<usize>> {
    let max = grid.max();
    if max <= 0.0 {
        return Vec::new();
    }
    let cut = tau * max;
    let (w, h) = (grid.width, grid.height);
    let keep: Vec<bool> = grid.cells.iter().map(|&v| v > 0.0 && v >= cut).collect();
    let mut label = vec![usize::MAX; w * h];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !keep[start] || label[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut cells = Vec::new();
        label[start] = id;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            cells.push(idx);
            let (i, j) = ((idx % w) as isize, (idx / w) as isize);
            for dj in -1..=1 {
                for di in -1..=1 {
                    let (ni, nj) = (i + di, j + dj);
                    if ni < 0 || nj < 0 || ni >= w as isize || nj >= h as isize {
                        continue;
                    }
                    let n = nj as usize * w + ni as usize;
                    if keep[n] && label[n] == usize::MAX {
                        label[n] = id;
                        queue.push_back(n);
                    }
                }
            }
        }
        cells.sort_unstable();
        components.push(cells);
    }
    components
}

/// Repeatedly merges the closest pair of clusters (centroid distance) while
/// that distance is within `radius`. Ties go to the pair with the smaller
/// (lower key, higher key).
fn merge_clusters(mut clusters: Vec<Option<Cluster>>, radius: f64) -> Vec<Cluster> {
    let n = clusters.len();
    // nearest[i] = best (distance, pair key) partner of i
    let best_partner = |clusters: &[Option<Cluster>], i: usize| -> Option<(f64, (usize, usize), usize)> {
        let a = clusters[i].as_ref()?;
        let mut best: Option<(f64, (usize, usize), usize)> = None;
        for (j, b) in clusters.iter().enumerate() {
            let Some(b) = b else { continue };
            if j == i {
                continue;
            }
            let cand = (a.distance(b), (a.key.min(b.key), a.key.max(b.key)), j);
            if best.is_none_or(|cur| (cand.0, cand.1) < (cur.0, cur.1)) {
                best = Some(cand);
            }
        }
        best
    };
    let mut nearest: Vec<Option<(f64, (usize, usize), usize)>> =
        (0..n).map(|i| best_partner(&clusters, i)).collect();

    loop {
        let pick = nearest
            .iter()
            .enumerate()
            .filter_map(|(i, nn)| nn.map(|(d, key, j)| (d, key, i, j)))
            .min_by(|a, b| (a.0, a.1).partial_cmp(&(b.0, b.1)).expect("finite distances"));
        let Some((d, _, i, j)) = pick else { break };
        if d > radius {
            break;
        }
        let (keep, gone) = (i.min(j), i.max(j));
        let absorbed = clusters[gone].take().expect("live cluster");
        clusters[keep].as_mut().expect("live cluster").absorb(absorbed);
        nearest[gone] = None;

        for k in 0..n {
            if clusters[k].is_none() {
                continue;
            }
            if k == keep {
                nearest[k] = best_partner(&clusters, k);
                continue;
            }
            match nearest[k] {
                Some((_, _, p)) if p == keep || p == gone => {
                    nearest[k] = best_partner(&clusters, k);
                }
                Some(cur) => {
                    let a = clusters[k].as_ref().expect("live");
                    let b = clusters[keep].as_ref().expect("live");
                    let cand = (a.distance(b), (a.key.min(b.key), a.key.max(b.key)), keep);
                    if (cand.0, cand.1) < (cur.0, cur.1) {
                        nearest[k] = Some(cand);
                    }
                }
                None => nearest[k] = best_partner(&clusters, k),
            }
        }
    }
    clusters.into_iter().flatten().collect()
}

fn finalize(
    width: usize,
    height: usize,
    clusters: Vec<Cluster>,
    events: &[TimedPoint],
    time_bins: usize,
) -> RoiSet {
    let mut owner = vec![None; width * height];
    for (c, cl) in clusters.iter().enumerate() {
        for &idx in &cl.cells {
            owner[idx] = Some(c);
        }
    }
    let mut counts = vec![0usize; clusters.len()];
    let mut types = vec![BTreeMap::new(); clusters.len()];
    let mut hists = vec![vec![0usize; time_bins]; clusters.len()];
    let mut unassigned = 0;
    for ev in events {
        let (i, j) = cell_of(width, height, ev.x, ev.y);
        match owner[j * width + i] {
            Some(c) => {
                counts[c] += 1;
                *types[c].entry(ev.event_type).or_insert(0) += 1;
                let bin = ((ev.t_norm * time_bins as f64).floor().max(0.0) as usize).min(time_bins - 1);
                hists[c][bin] += 1;
            }
            None => unassigned += 1,
        }
    }

    let mut rois: Vec<(usize, Roi)> = clusters
        .into_iter()
        .enumerate()
        .map(|(c, cl)| {
            let (cx, cy) = cl.centroid();
            let mut bbox = [f64::INFINITY, f64::INFINITY, 0.0f64, 0.0f64];
            for &idx in &cl.cells {
                let (i, j) = (idx % width, idx / width);
                bbox[0] = bbox[0].min(i as f64 / width as f64);
                bbox[1] = bbox[1].min(j as f64 / height as f64);
                bbox[2] = bbox[2].max((i + 1) as f64 / width as f64);
                bbox[3] = bbox[3].max((j + 1) as f64 / height as f64);
            }
            let mut cells = cl.cells;
            cells.sort_unstable();
            (
                cl.key,
                Roi {
                    roi_id: 0,
                    cells,
                    centroid: [cx, cy],
                    bbox,
                    event_count: counts[c],
                    type_counts: std::mem::take(&mut types[c]),
                    time_hist: std::mem::take(&mut hists[c]),
                },
            )
        })
        .collect();

    rois.sort_by(|(ka, a), (kb, b)| {
        b.event_count
            .cmp(&a.event_count)
            .then(a.centroid[0].total_cmp(&b.centroid[0]))
            .then(a.centroid[1].total_cmp(&b.centroid[1]))
            .then(ka.cmp(kb))
    });
    let mut owner = vec![None; width * height];
    let rois: Vec<Roi> = rois
        .into_iter()
        .enumerate()
        .map(|(id, (_, mut roi))| {
            roi.roi_id = id;
            for &idx in &roi.cells {
                owner[idx] = Some(id);
            }
            roi
        })
        .collect();
    RoiSet {
        width,
        height,
        rois,
        unassigned,
        owner,
    }
}

/// Extracts ROIs from a smoothed grid and assigns `events` to them.
///
/// Steps: threshold at `tau * max`, label 8-connected components, drop
/// components holding fewer than `min_events` events, merge closest
/// centroids (density-weighted) while within `merge_radius`, then assign
/// events and build per-ROI histograms. ROI ids follow descending event
/// count, ties by centroid x then y.
///
/// The event filter runs before merging so that a larger merge radius can
/// never raise the ROI count.
pub fn extract_rois(grid: &HeatGrid, events: &[TimedPoint], params: &RoiParams) -> Result<RoiSet> {
    params.validate()?;
    let (w, h) = (grid.width, grid.height);
    let components = threshold_components(grid, params.tau);
    if components.is_empty() {
        return Ok(RoiSet::empty(w, h, events.len()));
    }

    let mut comp_of = vec![usize::MAX; w * h];
    for (c, cells) in components.iter().enumerate() {
        for &idx in cells {
            comp_of[idx] = c;
        }
    }
    let mut counts = vec![0usize; components.len()];
    for ev in events {
        let (i, j) = cell_of(w, h, ev.x, ev.y);
        let c = comp_of[j * w + i];
        if c != usize::MAX {
            counts[c] += 1;
        }
    }

    let clusters: Vec<Option<Cluster>> = components
        .into_iter()
        .enumerate()
        .filter(|(c, _)| counts[*c] >= params.min_events)
        .map(|(c, cells)| {
            let mut cl = Cluster::new(c);
            for idx in cells {
                cl.push(idx, w, h, grid.cells[idx]);
            }
            Some(cl)
        })
        .collect();
    let merged = merge_clusters(clusters, params.merge_radius);
    Ok(finalize(w, h, merged, events, params.time_bins))
}

/// ROI count for each merge radius in `radii`.
pub fn roi_count_curve(
    grid: &HeatGrid,
    events: &[TimedPoint],
    tau: f64,
    min_events: usize,
    radii: &[f64],
) -> Result<Vec<(f64, usize)>> {
    radii
        .iter()
        .map(|&r| {
            let params = RoiParams {
                tau,
                merge_radius: r,
                min_events,
                time_bins: 1,
            };
            Ok((r, extract_rois(grid, events, &params)?.len()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heatmap::smooth_grid;

    fn pt(x: f64, y: f64, t: f64) -> TimedPoint {
        TimedPoint {
            x,
            y,
            t_norm: t,
            event_type: EventType::Move,
        }
    }

    fn grid_of(points: &[TimedPoint], res: usize, sigma: f64) -> HeatGrid {
        let mut g = HeatGrid::zeros(res, res).unwrap();
        for p in points {
            let (i, j) = g.cell_of(p.x, p.y);
            let idx = g.index(i, j);
            g.cells[idx] += 1.0;
            g.total_mass += 1.0;
        }
        smooth_grid(&g, sigma).unwrap()
    }

    #[test]
    fn empty_grid_gives_no_rois() {
        let g = HeatGrid::zeros(8, 8).unwrap();
        let set = extract_rois(&g, &[], &RoiParams::default()).unwrap();
        assert!(set.is_empty());
        let curve = roi_count_curve(&g, &[], 0.25, 0, &[0.0, 0.5]).unwrap();
        assert_eq!(curve, vec![(0.0, 0), (0.5, 0)]);
    }

    #[test]
    fn diagonal_cells_are_connected() {
        let mut g = HeatGrid::zeros(4, 4).unwrap();
        for (i, j) in [(0, 0), (1, 1), (3, 3)] {
            let idx = g.index(i, j);
            g.cells[idx] = 1.0;
        }
        let comps = threshold_components(&g, 0.5);
        assert_eq!(comps, vec![vec![0, 5], vec![15]]);
    }

    #[test]
    fn ids_follow_event_count() {
        let mut pts = vec![pt(0.8, 0.5, 0.0); 20];
        pts.extend(vec![pt(0.2, 0.5, 1.0); 10]);
        let g = grid_of(&pts, 16, 1.0);
        let params = RoiParams {
            tau: 0.2,
            merge_radius: 0.0,
            min_events: 1,
            time_bins: 2,
        };
        let set = extract_rois(&g, &pts, &params).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.rois[0].event_count, 20);
        assert!(set.rois[0].centroid[0] > 0.5);
        assert_eq!(set.rois[0].time_hist, vec![20, 0]);
        assert_eq!(set.rois[1].time_hist, vec![0, 10]);
        assert_eq!(set.locate(0.8, 0.5), Some(0));
        assert_eq!(set.locate(0.2, 0.5), Some(1));
        assert_eq!(set.locate(0.5, 0.05), None);
    }

    #[test]
    fn min_events_filter() {
        let pts = vec![pt(0.5, 0.5, 0.0); 10];
        let g = grid_of(&pts, 8, 1.0);
        let params = RoiParams {
            min_events: 11,
            ..RoiParams::default()
        };
        assert!(extract_rois(&g, &pts, &params).unwrap().is_empty());
    }

    #[test]
    fn last_time_bin_is_inclusive() {
        let pts = vec![pt(0.5, 0.5, 1.0), pt(0.5, 0.5, 0.0), pt(0.5, 0.5, 0.5)];
        let g = grid_of(&pts, 4, 0.0);
        let params = RoiParams {
            tau: 1.0,
            merge_radius: 0.0,
            min_events: 0,
            time_bins: 2,
        };
        let set = extract_rois(&g, &pts, &params).unwrap();
        assert_eq!(set.rois[0].time_hist, vec![1, 2]);
    }

    #[test]
    fn invalid_params() {
        let g = HeatGrid::zeros(4, 4).unwrap();
        for p in [
            RoiParams { tau: 0.0, ..Default::default() },
            RoiParams { tau: 1.5, ..Default::default() },
            RoiParams { merge_radius: -0.1, ..Default::default() },
            RoiParams { time_bins: 0, ..Default::default() },
        ] {
            assert!(extract_rois(&g, &[], &p).is_err());
        }
    }

    #[test]
    fn regions_reject_overlap() {
        assert!(RoiSet::from_regions(4, 4, vec![vec![(0, 0)], vec![(0, 0)]], &[], 1).is_err());
        assert!(RoiSet::from_regions(4, 4, vec![vec![(4, 0)]], &[], 1).is_err());
        let set = RoiSet::from_regions(4, 4, vec![vec![(0, 0), (1, 0)]], &[pt(0.3, 0.1, 0.0)], 1).unwrap();
        assert_eq!(set.rois[0].centroid, [0.25, 0.125]);
        assert_eq!(set.rois[0].bbox, [0.0, 0.0, 0.5, 0.25]);
        assert_eq!(set.rois[0].event_count, 1);
    }

    #[test]
    fn merge_tie_prefers_lower_ids() {
        // three equally spaced single-cell blobs on a line: (0,1) and (1,2)
        // tie, the pair with lower ids merges first
        let mut g = HeatGrid::zeros(8, 1).unwrap();
        for i in [0, 2, 4] {
            g.cells[i] = 1.0;
        }
        let pts = [pt(0.01, 0.5, 0.0), pt(0.3, 0.5, 0.0), pt(0.55, 0.5, 0.0)];
        let params = RoiParams {
            tau: 1.0,
            merge_radius: 0.25,
            min_events: 0,
            time_bins: 1,
        };
        let set = extract_rois(&g, &pts, &params).unwrap();
        // merged centroid of cells 0 and 2 ends up 0.375 away from cell 4
        assert_eq!(set.len(), 2);
        assert_eq!(set.rois[0].cells, vec![0, 2]);
        assert_eq!(set.rois[1].cells, vec![4]);
    }
}
