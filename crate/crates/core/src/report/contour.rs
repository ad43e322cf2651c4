//! Iso-lines of a sampled surface by marching squares.
//!
//! Crossings are linearly interpolated along cell edges. Segments are keyed
//! by the edge they cross, so neighbouring cells share endpoints exactly
//! and chain into polylines without any distance tolerance. Cells with a
//! masked corner are skipped.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::evaluation::ResponseSurface;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub level: f64,
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ContourSet {
    /// Sorted ascending.
    pub levels: Vec<f64>,
    pub contours: Vec<Contour>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmptySurface;

impl std::fmt::Display for EmptySurface {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("surface has no 2x2 block of valid cells")
    }
}

impl std::error::Error for EmptySurface {}

/// Edge of the sample lattice: horizontal edges join (i, j)-(i+1, j),
/// vertical ones (i, j)-(i, j+1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    H(usize, usize),
    V(usize, usize),
}

fn has_block(z: &[Vec<Option<f64>>]) -> bool {
    (0..z.len().saturating_sub(1)).any(|i| {
        (0..z[i].len().saturating_sub(1))
            .any(|j| z[i][j].is_some() && z[i + 1][j].is_some() && z[i][j + 1].is_some() && z[i + 1][j + 1].is_some())
    })
}

/// Contours of `z[i][j]` sampled at `(xs[i], ys[j])`.
pub fn contours_on_grid(
    xs: &[f64],
    ys: &[f64],
    z: &[Vec<Option<f64>>],
    levels: &[f64],
) -> Result<ContourSet, EmptySurface> {
    if xs.len() < 2 || ys.len() < 2 || !has_block(z) {
        return Err(EmptySurface);
    }
    let mut levels: Vec<f64> = levels.iter().copied().filter(|l| l.is_finite()).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut contours = Vec::new();
    for &level in &levels {
        contours.extend(trace_level(xs, ys, z, level));
    }
    Ok(ContourSet { levels, contours })
}

fn trace_level(xs: &[f64], ys: &[f64], z: &[Vec<Option<f64>>], level: f64) -> Vec<Contour> {
    let point = |e: Edge| -> (f64, f64) {
        let (a, b, pa, pb) = match e {
            Edge::H(i, j) => (z[i][j], z[i + 1][j], (xs[i], ys[j]), (xs[i + 1], ys[j])),
            Edge::V(i, j) => (z[i][j], z[i][j + 1], (xs[i], ys[j]), (xs[i], ys[j + 1])),
        };
        let (a, b) = (a.unwrap(), b.unwrap());
        let t = (level - a) / (b - a);
        (pa.0 + t * (pb.0 - pa.0), pa.1 + t * (pb.1 - pa.1))
    };
    let mut segs: Vec<(Edge, Edge)> = Vec::new();
    for i in 0..xs.len() - 1 {
        for j in 0..ys.len() - 1 {
            let (Some(z00), Some(z10), Some(z11), Some(z01)) = (z[i][j], z[i + 1][j], z[i + 1][j + 1], z[i][j + 1]) else {
                continue;
            };
            // Corners counter-clockwise from (i, j); bit set when at or above.
            let code = (z00 >= level) as u8 | ((z10 >= level) as u8) << 1 | ((z11 >= level) as u8) << 2 | ((z01 >= level) as u8) << 3;
            let (bottom, right, top, left) = (Edge::H(i, j), Edge::V(i + 1, j), Edge::H(i, j + 1), Edge::V(i, j));
            let centre_above = (z00 + z10 + z11 + z01) / 4.0 >= level;
            match code {
                0 | 15 => {}
                1 | 14 => segs.push((left, bottom)),
                2 | 13 => segs.push((bottom, right)),
                3 | 12 => segs.push((left, right)),
                4 | 11 => segs.push((right, top)),
                6 | 9 => segs.push((bottom, top)),
                7 | 8 => segs.push((left, top)),
                5 => {
                    if centre_above {
                        segs.push((left, top));
                        segs.push((bottom, right));
                    } else {
                        segs.push((left, bottom));
                        segs.push((right, top));
                    }
                }
                10 => {
                    if centre_above {
                        segs.push((left, bottom));
                        segs.push((right, top));
                    } else {
                        segs.push((left, top));
                        segs.push((bottom, right));
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    chain(&segs).into_iter().map(|(edges, closed)| Contour { level, points: edges.into_iter().map(point).collect(), closed }).collect()
}

/// Joins segments sharing an edge into polylines. Each edge is used by at
/// most two segments.
fn chain(segs: &[(Edge, Edge)]) -> Vec<(Vec<Edge>, bool)> {
    let mut adj: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, (a, b)) in segs.iter().enumerate() {
        adj.entry(*a).or_default().push(k);
        adj.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segs.len()];
    let mut out = Vec::new();
    let walk = |start: usize, from: Edge, used: &mut Vec<bool>| -> Vec<Edge> {
        let mut path = vec![from];
        let mut k = start;
        let mut cur = from;
        loop {
            used[k] = true;
            let (a, b) = segs[k];
            let next = if a == cur { b } else { a };
            path.push(next);
            cur = next;
            match adj[&cur].iter().find(|&&s| !used[s]) {
                Some(&s) => k = s,
                None => return path,
            }
        }
    };
    // Open chains start at edges used once, in segment order for stable output.
    for k in 0..segs.len() {
        if used[k] {
            continue;
        }
        for e in [segs[k].0, segs[k].1] {
            if !used[k] && adj[&e].len() == 1 {
                out.push((walk(k, e, &mut used), false));
            }
        }
    }
    for k in 0..segs.len() {
        if !used[k] {
            let path = walk(k, segs[k].0, &mut used);
            let closed = path.first() == path.last();
            out.push((path, closed));
        }
    }
    out
}

/// Plot coordinates of a surface: log10 of the axis (the raw index for
/// the colour direction axis) and log10 of contrast.
pub fn surface_coords(s: &ResponseSurface) -> (Vec<f64>, Vec<f64>) {
    let log_axis = s.test_id.info().axis.is_log();
    let xs = s.axis_values.iter().map(|&v| if log_axis { v.log10() } else { v }).collect();
    let ys = s.contrasts.iter().map(|c| c.log10()).collect();
    (xs, ys)
}

/// `n` levels evenly spaced strictly inside the observed response range.
pub fn default_levels(s: &ResponseSurface, n: usize) -> Vec<f64> {
    let vals = s.scores.iter().flatten().flatten().copied();
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        return vec![];
    }
    (1..=n).map(|k| lo + (hi - lo) * k as f64 / (n + 1) as f64).collect()
}

pub const DEFAULT_LEVEL_COUNT: usize = 8;

pub fn extract_contours(s: &ResponseSurface, levels: &[f64]) -> Result<ContourSet, EmptySurface> {
    let (xs, ys) = surface_coords(s);
    contours_on_grid(&xs, &ys, &s.scores, levels)
}
