//! Oracles. None of these call into the library code they are used to
//! check; they work from raw points and textbook formulas.

use std::collections::BTreeMap;

/// Pearson r from raw sums: `(n Sxy - Sx Sy) / sqrt((n Sxx - Sx^2)(n Syy - Sy^2))`.
pub fn pearson_direct(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let syy: f64 = ys.iter().map(|y| y * y).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt()
}

/// Rank of each value by counting: `#less + (#equal + 1) / 2`.
pub fn ranks_bruteforce(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|v| {
            let less = values.iter().filter(|w| *w < v).count() as f64;
            let equal = values.iter().filter(|w| *w == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn spearman_bruteforce(xs: &[f64], ys: &[f64]) -> f64 {
    pearson_direct(&ranks_bruteforce(xs), &ranks_bruteforce(ys))
}

/// Cell containing a point, with the right/bottom edge folded in.
pub fn cell(width: usize, height: usize, x: f64, y: f64) -> (usize, usize) {
    let i = ((x * width as f64) as usize).min(width - 1);
    let j = ((y * height as f64) as usize).min(height - 1);
    (i, j)
}

pub fn count_grid(points: &[(f64, f64)], width: usize, height: usize) -> Vec<f64> {
    let mut cells = vec![0.0; width * height];
    for &(x, y) in points {
        let (i, j) = cell(width, height, x, y);
        cells[j * width + i] += 1.0;
    }
    cells
}

/// Direct (non-separable) 2-D Gaussian scatter: every source cell spreads
/// its mass over the in-grid cells of its `ceil(3 sigma)` square window,
/// weights normalized over that in-grid window.
pub fn smooth_direct(cells: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return cells.to_vec();
    }
    let r = (3.0 * sigma).ceil() as isize;
    let mut out = vec![0.0; cells.len()];
    for sj in 0..height as isize {
        for si in 0..width as isize {
            let v = cells[sj as usize * width + si as usize];
            if v == 0.0 {
                continue;
            }
            let mut targets = Vec::new();
            for tj in (sj - r)..=(sj + r) {
                for ti in (si - r)..=(si + r) {
                    if ti < 0 || tj < 0 || ti >= width as isize || tj >= height as isize {
                        continue;
                    }
                    let d2 = ((ti - si).pow(2) + (tj - sj).pow(2)) as f64;
                    targets.push((tj as usize * width + ti as usize, (-d2 / (2.0 * sigma * sigma)).exp()));
                }
            }
            let norm: f64 = targets.iter().map(|t| t.1).sum();
            for (idx, w) in targets {
                out[idx] += v * w / norm;
            }
        }
    }
    out
}

fn find(parent: &mut [usize], mut a: usize) -> usize {
    while parent[a] != a {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    a
}

/// 8-connected components of cells `>= tau * max` (and > 0) via
/// union-find. Canonical form: each component sorted, components sorted by
/// their smallest cell.
pub fn components_union_find(cells: &[f64], width: usize, height: usize, tau: f64) -> Vec<Vec<usize>> {
    let max = cells.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let on: Vec<bool> = cells.iter().map(|&v| v > 0.0 && v >= tau * max).collect();
    let mut parent: Vec<usize> = (0..cells.len()).collect();
    for a in 0..cells.len() {
        for b in 0..cells.len() {
            if a >= b || !on[a] || !on[b] {
                continue;
            }
            let (ai, aj) = ((a % width) as isize, (a / width) as isize);
            let (bi, bj) = ((b % width) as isize, (b / width) as isize);
            if (ai - bi).abs() <= 1 && (aj - bj).abs() <= 1 {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for idx in 0..cells.len() {
        if on[idx] {
            let root = find(&mut parent, idx);
            groups.entry(root).or_default().push(idx);
        }
    }
    let _ = height;
    let mut comps: Vec<Vec<usize>> = groups.into_values().collect();
    comps.sort_by_key(|c| c[0]);
    comps
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRoi {
    pub cells: Vec<usize>,
    pub centroid: (f64, f64),
    pub event_count: usize,
}

/// Full ROI pipeline from raw points: count grid, direct smoothing,
/// union-find components, event filter, naive all-pairs centroid merging.
pub fn roi_oracle(
    points: &[(f64, f64)],
    width: usize,
    height: usize,
    sigma: f64,
    tau: f64,
    radius: f64,
    min_events: usize,
) -> Vec<OracleRoi> {
    let grid = smooth_direct(&count_grid(points, width, height), width, height, sigma);
    let comps = components_union_find(&grid, width, height, tau);
    let count_in = |cells: &[usize]| {
        points
            .iter()
            .filter(|&&(x, y)| {
                let (i, j) = cell(width, height, x, y);
                cells.contains(&(j * width + i))
            })
            .count()
    };
    // (key, cells, mass, mx, my)
    let mut live: Vec<(usize, Vec<usize>, f64, f64, f64)> = comps
        .into_iter()
        .enumerate()
        .filter(|(_, c)| count_in(c) >= min_events)
        .map(|(key, c)| {
            let (mut m, mut mx, mut my) = (0.0, 0.0, 0.0);
            for &idx in &c {
                let w = grid[idx];
                m += w;
                mx += w * ((idx % width) as f64 + 0.5) / width as f64;
                my += w * ((idx / width) as f64 + 0.5) / height as f64;
            }
            (key, c, m, mx, my)
        })
        .collect();
    loop {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for a in 0..live.len() {
            for b in (a + 1)..live.len() {
                let (ka, kb) = (live[a].0, live[b].0);
                let d = (live[a].3 / live[a].2 - live[b].3 / live[b].2)
                    .hypot(live[a].4 / live[a].2 - live[b].4 / live[b].2);
                let key = (ka.min(kb), ka.max(kb));
                let better = match best {
                    None => true,
                    Some((bd, bk, _, _)) => d < bd || (d == bd && key < bk),
                };
                if better {
                    best = Some((d, key, a, b));
                }
            }
        }
        match best {
            Some((d, _, a, b)) if d <= radius => {
                let gone = live.remove(b);
                let keep = &mut live[a];
                keep.0 = keep.0.min(gone.0);
                keep.1.extend(gone.1);
                keep.2 += gone.2;
                keep.3 += gone.3;
                keep.4 += gone.4;
            }
            _ => break,
        }
    }
    live.into_iter()
        .map(|(_, mut cells, m, mx, my)| {
            cells.sort_unstable();
            let event_count = count_in(&cells);
            OracleRoi {
                cells,
                centroid: (mx / m, my / m),
                event_count,
            }
        })
        .collect()
}

/// Transition counts by enumerating every ordered index pair `(i, j)` of
/// each label sequence: `(a, b)` counts when `label[i] = a`, `label[j] = b`,
/// `a != b`, and everything strictly between is unlabeled.
pub fn enumerate_transitions(sequences: &[Vec<Option<usize>>]) -> BTreeMap<(usize, usize), usize> {
    let mut counts = BTreeMap::new();
    for seq in sequences {
        for i in 0..seq.len() {
            for j in (i + 1)..seq.len() {
                let (Some(a), Some(b)) = (seq[i], seq[j]) else { continue };
                if a != b && seq[i + 1..j].iter().all(Option::is_none) {
                    *counts.entry((a, b)).or_insert(0) += 1;
                }
            }
        }
    }
    counts
}
