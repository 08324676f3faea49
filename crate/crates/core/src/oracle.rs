//! Independent reference computations used to cross-check the closed forms:
//! Bloch-matrix eigenvalues, finite-difference group velocities and the
//! spectrum of a finite fixed-fixed chain.

use crate::dispersion::{branches, Branch};
use crate::error::{LatticeError, Result};
use crate::lattice::{bloch_matrix, LatticeSpec, WaveVector};

/// Eigenfrequencies of the Bloch matrix at `k`, ascending.
pub fn bloch_eigenfrequencies(spec: &LatticeSpec, k: WaveVector) -> Result<Vec<f64>> {
    let d = bloch_matrix(spec, k);
    let eig = if d.dimension == 1 {
        vec![d.get(0, 0).re]
    } else {
        let (a, c) = (d.get(0, 0).re, d.get(1, 1).re);
        let b = d.get(0, 1).norm();
        let mean = 0.5 * (a + c);
        let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        vec![mean - r, mean + r]
    };
    eig.into_iter()
        .map(|w2| {
            if w2 < -1e-12 {
                Err(LatticeError::Numerical(format!("negative Bloch eigenvalue {w2} at {k:?}")))
            } else {
                Ok(w2.max(0.0).sqrt())
            }
        })
        .collect()
}

/// Central-difference gradient of the Bloch eigenfrequency on `branch`,
/// step `1e-5`.
pub fn fd_group_velocity(spec: &LatticeSpec, k: WaveVector, branch: Branch) -> Result<[f64; 2]> {
    let idx = branches(spec.family)
        .iter()
        .position(|&b| b == branch)
        .ok_or_else(|| LatticeError::InvalidBranch { family: spec.family, branch: branch.name().to_string() })?;
    let h = 1e-5;
    let w = |kx: f64, ky: f64| bloch_eigenfrequencies(spec, WaveVector::new(kx, ky)).map(|v| v[idx]);
    let gx = (w(k.kx + h, k.ky)? - w(k.kx - h, k.ky)?) / (2.0 * h);
    let gy = if spec.family.is_1d() { 0.0 } else { (w(k.kx, k.ky + h)? - w(k.kx, k.ky - h)?) / (2.0 * h) };
    Ok([gx, gy])
}

/// Eigenvalue count below `x` for the symmetric tridiagonal matrix with
/// constant diagonal `a` and off-diagonal `b` (Sturm sequence).
fn sturm_count(n: usize, a: f64, b: f64, x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0f64;
    for i in 0..n {
        let off = if i == 0 { 0.0 } else { b * b / q };
        q = a - x - off;
        if q == 0.0 {
            q = -f64::EPSILON * (a.abs() + b.abs());
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Natural frequencies of `n` equal masses joined by springs `g`, both ends
/// fixed to walls, ascending. Computed by bisection on the Sturm count.
pub fn finite_chain_eigenfrequencies(n: usize, g: f64, mass: f64) -> Result<Vec<f64>> {
    if n == 0 || !(g > 0.0) || !(mass > 0.0) {
        return Err(LatticeError::InvalidInput(format!("chain needs n >= 1, g > 0, M > 0 (got {n}, {g}, {mass})")));
    }
    let (a, b) = (2.0 * g / mass, -g / mass);
    let top = a + 2.0 * b.abs();
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let (mut lo, mut hi) = (0.0f64, top);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sturm_count(n, a, b, mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 4.0 * f64::EPSILON * top {
                break;
            }
        }
        out.push((0.5 * (lo + hi)).sqrt());
    }
    Ok(out)
}
