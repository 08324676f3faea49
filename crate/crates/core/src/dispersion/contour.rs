//! Equifrequency contours by marching squares over the zone box.

use std::collections::HashMap;

use super::{branch_range, check_branch, omega_sq, resonance_catalog, Branch};
use crate::error::{LatticeError, Result};
use crate::lattice::{LatticeSpec, WaveVector};

#[derive(Debug, Clone, PartialEq)]
pub struct ContourPolyline {
    pub vertices: Vec<WaveVector>,
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourSet {
    pub omega: f64,
    pub branch: Branch,
    pub polylines: Vec<ContourPolyline>,
    /// Set when the level collapses to isolated points (band extrema and
    /// conical points); `polylines` is then empty.
    pub degenerate_points: Vec<WaveVector>,
}

impl ContourSet {
    pub fn is_empty(&self) -> bool {
        self.polylines.is_empty() && self.degenerate_points.is_empty()
    }

    pub fn vertex_count(&self) -> usize {
        self.polylines.iter().map(|p| p.vertices.len()).sum()
    }
}

/// Edge of the sampling grid: `(vertical, i, j)`. Horizontal edges join
/// `(i, j)`–`(i+1, j)`, vertical ones `(i, j)`–`(i, j+1)`.
type EdgeKey = (bool, usize, usize);

/// Level set `omega(k) = omega` on `branch`, sampled with `resolution` cells
/// per axis. Crossings are refined by bisection on the closed form, so vertex
/// accuracy does not depend on the grid.
pub fn equifrequency_contour(
    spec: &LatticeSpec,
    omega: f64,
    branch: Branch,
    resolution: usize,
) -> Result<ContourSet> {
    check_branch(spec, branch)?;
    if resolution < 64 {
        return Err(LatticeError::InvalidInput(format!("contour resolution must be >= 64, got {resolution}")));
    }
    if !omega.is_finite() {
        return Err(LatticeError::InvalidInput(format!("non-finite frequency {omega}")));
    }
    let mut set = ContourSet { omega, branch, polylines: Vec::new(), degenerate_points: Vec::new() };
    let (lo, hi) = branch_range(spec, branch)?;
    let tol = 1e-12 * hi;
    if omega <= tol || omega < lo - tol || omega > hi + tol {
        return Ok(set);
    }
    if (omega - hi).abs() <= tol || (lo > 0.0 && (omega - lo).abs() <= tol) {
        for e in resonance_catalog(spec) {
            if (e.omega - omega).abs() <= tol {
                set.degenerate_points.extend(e.kpoints.iter().copied());
            }
        }
        return Ok(set);
    }

    let target = omega * omega;
    let f = |k: WaveVector| omega_sq(spec, k, branch).0 - target;
    let ([x0, x1], [y0, y1]) = spec.zone_box();

    if spec.family.is_1d() {
        let grid: Vec<f64> = (0..=resolution).map(|i| x0 + (x1 - x0) * i as f64 / resolution as f64).collect();
        for w in grid.windows(2) {
            let (a, b) = (WaveVector::new(w[0], 0.0), WaveVector::new(w[1], 0.0));
            if (f(a) >= 0.0) != (f(b) >= 0.0) {
                set.polylines.push(ContourPolyline { vertices: vec![refine(&f, a, b)], closed: false });
            }
        }
        return Ok(set);
    }

    let n = resolution;
    let point = |i: usize, j: usize| {
        WaveVector::new(x0 + (x1 - x0) * i as f64 / n as f64, y0 + (y1 - y0) * j as f64 / n as f64)
    };
    let values: Vec<f64> = (0..=n).flat_map(|j| (0..=n).map(move |i| (i, j))).map(|(i, j)| f(point(i, j))).collect();
    let above = |i: usize, j: usize| values[j * (n + 1) + i] >= 0.0;

    let mut segments: Vec<[EdgeKey; 2]> = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let c = [above(i, j), above(i + 1, j), above(i + 1, j + 1), above(i, j + 1)];
            let e = [(false, i, j), (true, i + 1, j), (false, i, j + 1), (true, i, j)];
            let crossing: Vec<EdgeKey> = (0..4).filter(|&q| c[q] != c[(q + 1) % 4]).map(|q| e[q]).collect();
            match crossing.len() {
                0 => {}
                2 => segments.push([crossing[0], crossing[1]]),
                4 => {
                    let centre = point(i, j);
                    let centre = WaveVector::new(
                        centre.kx + 0.5 * (x1 - x0) / n as f64,
                        centre.ky + 0.5 * (y1 - y0) / n as f64,
                    );
                    // corners 0 and 2 joined through the centre: cut off 1 and 3
                    if (f(centre) >= 0.0) == c[0] {
                        segments.push([e[0], e[1]]);
                        segments.push([e[2], e[3]]);
                    } else {
                        segments.push([e[3], e[0]]);
                        segments.push([e[1], e[2]]);
                    }
                }
                _ => unreachable!("a square has an even number of sign changes"),
            }
        }
    }

    let mut at_edge: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (s, seg) in segments.iter().enumerate() {
        for key in seg {
            at_edge.entry(*key).or_default().push(s);
        }
    }
    let mut cache: HashMap<EdgeKey, WaveVector> = HashMap::new();
    let mut vertex = |key: EdgeKey| {
        *cache.entry(key).or_insert_with(|| {
            let (vert, i, j) = key;
            let a = point(i, j);
            let b = if vert { point(i, j + 1) } else { point(i + 1, j) };
            refine(&f, a, b)
        })
    };

    let mut used = vec![false; segments.len()];
    // open chains start at grid-boundary edges that have a single segment
    let mut starts: Vec<usize> = (0..segments.len())
        .filter(|&s| segments[s].iter().any(|k| at_edge[k].len() == 1))
        .collect();
    starts.extend(0..segments.len());
    for start in starts {
        if used[start] {
            continue;
        }
        used[start] = true;
        let [a, b] = segments[start];
        let (first, mut tail) = if at_edge[&b].len() == 1 { (b, a) } else { (a, b) };
        let mut keys = vec![first, tail];
        loop {
            let next = at_edge[&tail].iter().copied().find(|&s| !used[s]);
            let Some(s) = next else { break };
            used[s] = true;
            let [p, q] = segments[s];
            tail = if p == tail { q } else { p };
            keys.push(tail);
        }
        let closed = keys.len() > 2 && keys.first() == keys.last();
        if closed {
            keys.pop();
        }
        set.polylines.push(ContourPolyline { vertices: keys.into_iter().map(&mut vertex).collect(), closed });
    }
    Ok(set)
}

/// Bisection for the sign change of `f` between `a` and `b`.
fn refine(f: &impl Fn(WaveVector) -> f64, a: WaveVector, b: WaveVector) -> WaveVector {
    let side_a = f(a) >= 0.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let at = |t: f64| WaveVector::new(a.kx + t * (b.kx - a.kx), a.ky + t * (b.ky - a.ky));
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if (f(at(mid)) >= 0.0) == side_a {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    at(0.5 * (lo + hi))
}
