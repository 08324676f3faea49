//! Closed-form dispersion relations, group velocities and the resonance
//! structure (band edges, interior resonances, beaming directions).
//!
//! All formulas here are written out per family and are deliberately
//! independent of the bond lists in [`crate::lattice`]; the oracle module
//! checks one against the other.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, PI};
use std::fmt;
use std::str::FromStr;

use crate::error::{LatticeError, Result};
use crate::lattice::{Family, LatticeSpec, WaveVector};

mod contour;

pub use contour::{equifrequency_contour, ContourPolyline, ContourSet};

const SQRT3: f64 = 1.732_050_807_568_877_2;
const TWO_PI: f64 = 2.0 * PI;

/// Below this frequency the dispersion cone tip is treated as singular.
const CONE_TOL: f64 = 1e-9;
/// Below this group speed the velocity is reported as stationary.
const STATIONARY_TOL: f64 = 1e-12;

/// Dispersion branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Single,
    /// Lower ("-") hexagonal branch.
    AcousticI,
    /// Upper ("+") hexagonal branch.
    OpticalII,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Single => "single",
            Branch::AcousticI => "I",
            Branch::OpticalII => "II",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Branch {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" | "0" => Ok(Branch::Single),
            "I" | "i" | "1" | "acoustic" => Ok(Branch::AcousticI),
            "II" | "ii" | "2" | "optical" => Ok(Branch::OpticalII),
            other => Err(LatticeError::InvalidSpec(format!("unknown branch '{other}'"))),
        }
    }
}

/// Branches of a family, lowest first.
pub fn branches(family: Family) -> &'static [Branch] {
    match family {
        Family::Hcl => &[Branch::AcousticI, Branch::OpticalII],
        _ => &[Branch::Single],
    }
}

fn check_branch(spec: &LatticeSpec, branch: Branch) -> Result<()> {
    if branches(spec.family).contains(&branch) {
        Ok(())
    } else {
        Err(LatticeError::InvalidBranch { family: spec.family, branch: branch.name().to_string() })
    }
}

/// `|f|` for the hexagonal lattice, `phi(k) = sqrt(1 + 4 cos(ky/2) (cos(sqrt3 kx/2) + cos(ky/2)))`,
/// and the gradient of `phi^2`.
fn hcl_phi(k: WaveVector) -> (f64, [f64; 2]) {
    let (sx, cx) = (0.5 * SQRT3 * k.kx).sin_cos();
    let (sy, cy) = (0.5 * k.ky).sin_cos();
    let phi2 = (1.0 + 4.0 * cy * (cx + cy)).max(0.0);
    (phi2.sqrt(), [-2.0 * SQRT3 * cy * sx, -2.0 * sy * (cx + 2.0 * cy)])
}

/// `2 sin^2(x/2) = 1 - cos x` without cancellation near zero.
fn versine(x: f64) -> f64 {
    let s = (0.5 * x).sin();
    2.0 * s * s
}

/// `M omega^2` and its gradient for single-branch families.
fn stiffness_form(spec: &LatticeSpec, k: WaveVector) -> (f64, [f64; 2]) {
    match spec.family {
        Family::Msl1d => {
            let g = spec.gx;
            (2.0 * g * versine(k.kx), [2.0 * g * k.kx.sin(), 0.0])
        }
        Family::Rcl => {
            let (gx, gy, l) = (spec.gx, spec.gy, spec.l);
            let q = l * k.ky;
            (
                2.0 * (gx * versine(k.kx) + gy * versine(q)),
                [2.0 * gx * k.kx.sin(), 2.0 * gy * l * q.sin()],
            )
        }
        Family::Etl => {
            let (s, c) = (0.5 * k.kx).sin_cos();
            let (sy, cy) = (0.5 * SQRT3 * k.ky).sin_cos();
            // 8 - 4c(c + cy) = 2 vers(kx) + 4 (vers(kx/2) + c vers(sqrt3 ky/2))
            (
                2.0 * versine(k.kx) + 4.0 * (versine(0.5 * k.kx) + c * versine(0.5 * SQRT3 * k.ky)),
                [2.0 * s * (2.0 * c + cy), 2.0 * SQRT3 * c * sy],
            )
        }
        Family::Rtl => {
            let gamma = spec.gamma;
            let sd = (k.kx + k.ky).sin();
            (
                2.0 * versine(k.kx) + 2.0 * versine(k.ky) + 2.0 * gamma * versine(k.kx + k.ky),
                [2.0 * k.kx.sin() + 2.0 * gamma * sd, 2.0 * k.ky.sin() + 2.0 * gamma * sd],
            )
        }
        Family::Hcl => unreachable!("two-branch family"),
    }
}

/// `omega^2`, its gradient, and whether the point is a branch-touching
/// singularity.
fn omega_sq(spec: &LatticeSpec, k: WaveVector, branch: Branch) -> (f64, [f64; 2], bool) {
    let inv_m = 1.0 / spec.mass;
    if spec.family == Family::Hcl {
        let (phi, dphi2) = hcl_phi(k);
        let sign = if branch == Branch::AcousticI { -1.0 } else { 1.0 };
        let w2 = if branch == Branch::AcousticI {
            // 3 - phi = (9 - phi^2) / (3 + phi), written to survive k -> 0
            let sy = (0.5 * k.ky).sin();
            let cx = (0.5 * SQRT3 * k.kx).cos();
            let num = 4.0 * (versine(0.5 * SQRT3 * k.kx) + cx * versine(0.5 * k.ky)) + 4.0 * sy * sy;
            num / (3.0 + phi) * inv_m
        } else {
            (3.0 + phi) * inv_m
        };
        let grad = if phi > CONE_TOL {
            [sign * dphi2[0] / (2.0 * phi) * inv_m, sign * dphi2[1] / (2.0 * phi) * inv_m]
        } else {
            [f64::NAN, f64::NAN]
        };
        (w2.max(0.0), grad, phi <= CONE_TOL)
    } else {
        let (p, dp) = stiffness_form(spec, k);
        (p.max(0.0) * inv_m, [dp[0] * inv_m, dp[1] * inv_m], false)
    }
}

/// Angular frequency on `branch` at `k` (nonnegative root).
pub fn omega(spec: &LatticeSpec, k: WaveVector, branch: Branch) -> Result<f64> {
    check_branch(spec, branch)?;
    Ok(omega_sq(spec, k, branch).0.sqrt())
}

/// Group velocity `grad_k omega`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GroupVelocity {
    Regular { cg: [f64; 2], beta: f64 },
    /// Gradient exists and vanishes (angular points, band edges); no direction.
    Stationary,
    /// Gradient undefined: cone tip at `omega = 0` or a conical point.
    Singular,
}

impl GroupVelocity {
    pub fn cg(&self) -> Option<[f64; 2]> {
        match *self {
            GroupVelocity::Regular { cg, .. } => Some(cg),
            GroupVelocity::Stationary => Some([0.0, 0.0]),
            GroupVelocity::Singular => None,
        }
    }

    pub fn beta(&self) -> Option<f64> {
        match *self {
            GroupVelocity::Regular { beta, .. } => Some(beta),
            _ => None,
        }
    }

    pub fn speed(&self) -> Option<f64> {
        self.cg().map(|c| c[0].hypot(c[1]))
    }

    pub fn flag(&self) -> &'static str {
        match self {
            GroupVelocity::Regular { .. } => "regular",
            GroupVelocity::Stationary => "stationary",
            GroupVelocity::Singular => "singular",
        }
    }
}

pub fn group_velocity(spec: &LatticeSpec, k: WaveVector, branch: Branch) -> Result<GroupVelocity> {
    check_branch(spec, branch)?;
    let (w2, grad, touching) = omega_sq(spec, k, branch);
    let w = w2.sqrt();
    if touching || w < CONE_TOL {
        return Ok(GroupVelocity::Singular);
    }
    let cg = [grad[0] / (2.0 * w), grad[1] / (2.0 * w)];
    if cg[0].hypot(cg[1]) < STATIONARY_TOL {
        return Ok(GroupVelocity::Stationary);
    }
    Ok(GroupVelocity::Regular { cg, beta: cg[1].atan2(cg[0]) })
}

/// Frequency and group velocity at one wave vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionSample {
    pub k: WaveVector,
    pub omega: f64,
    pub group_velocity: GroupVelocity,
    pub branch: Branch,
}

impl DispersionSample {
    /// Phase direction `atan2(ky, kx)`.
    pub fn alpha(&self) -> f64 {
        self.k.ky.atan2(self.k.kx)
    }
}

pub fn sample(spec: &LatticeSpec, k: WaveVector, branch: Branch) -> Result<DispersionSample> {
    Ok(DispersionSample {
        k,
        omega: omega(spec, k, branch)?,
        group_velocity: group_velocity(spec, k, branch)?,
        branch,
    })
}

/// Samples on a regular `n x n` grid spanning the zone box, endpoints
/// included (`n` points along `kx` for the chain).
pub fn group_velocity_field(spec: &LatticeSpec, branch: Branch, n: usize) -> Result<Vec<DispersionSample>> {
    check_branch(spec, branch)?;
    if n < 2 {
        return Err(LatticeError::InvalidInput(format!("grid needs at least 2 points per axis, got {n}")));
    }
    let ([x0, x1], [y0, y1]) = spec.zone_box();
    let ny = if spec.family.is_1d() { 1 } else { n };
    let mut out = Vec::with_capacity(n * ny);
    for j in 0..ny {
        let ky = if ny == 1 { 0.0 } else { y0 + (y1 - y0) * j as f64 / (n - 1) as f64 };
        for i in 0..n {
            let kx = x0 + (x1 - x0) * i as f64 / (n - 1) as f64;
            out.push(sample(spec, WaveVector::new(kx, ky), branch)?);
        }
    }
    Ok(out)
}

/// Frequency range `(min, max)` covered by a branch.
pub fn branch_range(spec: &LatticeSpec, branch: Branch) -> Result<(f64, f64)> {
    check_branch(spec, branch)?;
    let m = spec.mass;
    Ok(match spec.family {
        Family::Msl1d => (0.0, 2.0 * (spec.gx / m).sqrt()),
        Family::Rcl => (0.0, (4.0 * (spec.gx + spec.gy) / m).sqrt()),
        Family::Hcl => match branch {
            Branch::AcousticI => (0.0, (3.0 / m).sqrt()),
            _ => ((3.0 / m).sqrt(), (6.0 / m).sqrt()),
        },
        Family::Etl => (0.0, 3.0 / m.sqrt()),
        Family::Rtl => (0.0, rtl_band_edge(spec.gamma).0 / m.sqrt()),
    })
}

/// Pass band `(0, omega_max)`.
pub fn band_edges(spec: &LatticeSpec) -> (f64, f64) {
    let top = *branches(spec.family).last().expect("every family has a branch");
    (0.0, branch_range(spec, top).expect("valid branch").1)
}

/// Right-triangle band edge (unit mass) and the diagonal phase where it is
/// attained.
fn rtl_band_edge(gamma: f64) -> (f64, f64) {
    if gamma <= 0.5 {
        (8f64.sqrt(), PI)
    } else {
        ((2.0 * gamma + 1.0) / gamma.sqrt(), (-1.0 / (2.0 * gamma)).acos())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResonanceKind {
    /// Top of the pass band, group velocity vanishes everywhere on it.
    BandEdge,
    /// Interior resonance carried by a localized primitive waveform.
    InteriorLpw,
    /// Interior resonance at angular points of the contours, no waveform.
    InteriorCaustic,
    /// Branch-touching frequency of the hexagonal lattice.
    ConicalPoint,
}

impl ResonanceKind {
    pub fn name(self) -> &'static str {
        match self {
            ResonanceKind::BandEdge => "band-edge",
            ResonanceKind::InteriorLpw => "interior-lpw",
            ResonanceKind::InteriorCaustic => "interior-caustic",
            ResonanceKind::ConicalPoint => "conical-point",
        }
    }

    pub fn is_interior(self) -> bool {
        matches!(self, ResonanceKind::InteriorLpw | ResonanceKind::InteriorCaustic)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceEntry {
    pub omega: f64,
    pub kind: ResonanceKind,
    pub branch: Branch,
    /// Wave vectors where the group velocity vanishes or branches touch.
    pub kpoints: Vec<WaveVector>,
    /// Dominant energy-flux directions in the physical frame (empty unless
    /// the resonance is interior).
    pub beaming: Vec<f64>,
}

fn quad(a: f64, b: f64) -> Vec<WaveVector> {
    let mut v = vec![WaveVector::new(a, b)];
    for p in [WaveVector::new(-a, b), WaveVector::new(a, -b), WaveVector::new(-a, -b)] {
        if !v.contains(&p) {
            v.push(p);
        }
    }
    v
}

/// Every resonant frequency of a lattice, sorted by frequency.
pub fn resonance_catalog(spec: &LatticeSpec) -> Vec<ResonanceEntry> {
    let s = 1.0 / spec.mass.sqrt();
    let entry = |omega: f64, kind: ResonanceKind, branch: Branch, kpoints: Vec<WaveVector>| ResonanceEntry {
        omega,
        kind,
        branch,
        kpoints,
        beaming: Vec::new(),
    };
    let mut out = match spec.family {
        Family::Msl1d => vec![entry(
            2.0 * spec.gx.sqrt() * s,
            ResonanceKind::BandEdge,
            Branch::Single,
            vec![WaveVector::new(PI, 0.0), WaveVector::new(-PI, 0.0)],
        )],
        Family::Rcl => {
            let (gx, gy, l) = (spec.gx, spec.gy, spec.l);
            let x_points = vec![WaveVector::new(PI, 0.0), WaveVector::new(-PI, 0.0)];
            let y_points = vec![WaveVector::new(0.0, PI / l), WaveVector::new(0.0, -PI / l)];
            let mut v = if gx == gy {
                let mut pts = x_points;
                pts.extend(y_points);
                vec![entry(2.0 * gx.sqrt() * s, ResonanceKind::InteriorLpw, Branch::Single, pts)]
            } else {
                vec![
                    entry(2.0 * gx.sqrt() * s, ResonanceKind::InteriorCaustic, Branch::Single, x_points),
                    entry(2.0 * gy.sqrt() * s, ResonanceKind::InteriorCaustic, Branch::Single, y_points),
                ]
            };
            v.push(entry(
                (4.0 * (gx + gy)).sqrt() * s,
                ResonanceKind::BandEdge,
                Branch::Single,
                quad(PI, PI / l),
            ));
            v
        }
        Family::Hcl => {
            let mut angular = quad(PI / SQRT3, PI);
            angular.extend([WaveVector::new(2.0 * PI / SQRT3, 0.0), WaveVector::new(-2.0 * PI / SQRT3, 0.0)]);
            vec![
                entry(2f64.sqrt() * s, ResonanceKind::InteriorLpw, Branch::AcousticI, angular.clone()),
                entry(
                    3f64.sqrt() * s,
                    ResonanceKind::ConicalPoint,
                    Branch::AcousticI,
                    quad(2.0 * PI / SQRT3, 2.0 * PI / 3.0),
                ),
                entry(2.0 * s, ResonanceKind::InteriorLpw, Branch::OpticalII, angular),
                entry(6f64.sqrt() * s, ResonanceKind::BandEdge, Branch::OpticalII, vec![WaveVector::ZERO]),
            ]
        }
        Family::Etl => {
            let mut angular = quad(PI, PI / SQRT3);
            angular.extend([WaveVector::new(0.0, 2.0 * PI / SQRT3), WaveVector::new(0.0, -2.0 * PI / SQRT3)]);
            vec![
                entry(8f64.sqrt() * s, ResonanceKind::InteriorLpw, Branch::Single, angular),
                entry(3.0 * s, ResonanceKind::BandEdge, Branch::Single, quad(2.0 * PI / 3.0, 2.0 * PI / SQRT3)),
            ]
        }
        Family::Rtl => {
            let (edge, phase) = rtl_band_edge(spec.gamma);
            let edge_points = if spec.gamma <= 0.5 {
                vec![WaveVector::new(PI, PI)]
            } else {
                vec![WaveVector::new(phase, phase), WaveVector::new(-phase, -phase)]
            };
            vec![
                entry(
                    2.0 * (1.0 + spec.gamma).sqrt() * s,
                    ResonanceKind::InteriorLpw,
                    Branch::Single,
                    vec![
                        WaveVector::new(PI, 0.0),
                        WaveVector::new(-PI, 0.0),
                        WaveVector::new(0.0, PI),
                        WaveVector::new(0.0, -PI),
                    ],
                ),
                entry(edge * s, ResonanceKind::BandEdge, Branch::Single, edge_points),
            ]
        }
    };
    for e in &mut out {
        if e.kind.is_interior() {
            e.beaming = physical_beams(spec, e.omega);
        }
    }
    out.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    out
}

/// Frame in which energy-flux angles are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngleFrame {
    /// Physical `(x, y)` coordinates of the nodes.
    Physical,
    /// Raw lattice indices `(m, n)` used as Cartesian axes.
    Index,
}

impl AngleFrame {
    pub fn name(self) -> &'static str {
        match self {
            AngleFrame::Physical => "physical",
            AngleFrame::Index => "index",
        }
    }
}

impl FromStr for AngleFrame {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "physical" => Ok(AngleFrame::Physical),
            "index" => Ok(AngleFrame::Index),
            other => Err(LatticeError::InvalidSpec(format!("unknown angle frame '{other}'"))),
        }
    }
}

fn norm_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TWO_PI);
    if TWO_PI - r < 1e-12 {
        0.0
    } else {
        r
    }
}

fn physical_beams(spec: &LatticeSpec, omega: f64) -> Vec<f64> {
    let mut angles: Vec<f64> = match spec.family {
        Family::Rcl => {
            // flat sides of the contours meet the angular points with
            // tan(beta) = sqrt(gy/gx) in index space
            let b = (spec.l * (spec.gy / spec.gx).sqrt()).atan();
            vec![b, PI - b, PI + b, TWO_PI - b]
        }
        Family::Hcl => (0..6).map(|k| FRAC_PI_6 + k as f64 * FRAC_PI_3).collect(),
        Family::Etl => (0..6).map(|k| k as f64 * FRAC_PI_3).collect(),
        Family::Rtl => {
            let mut v = vec![FRAC_PI_4, PI + FRAC_PI_4];
            if (spec.gamma - 1.0).abs() < 1e-12 {
                v.extend([0.0, FRAC_PI_2, PI, PI + FRAC_PI_2]);
            }
            v
        }
        Family::Msl1d => Vec::new(),
    };
    let _ = omega;
    angles.iter_mut().for_each(|a| *a = norm_angle(*a));
    angles.sort_by(f64::total_cmp);
    angles
}

/// Re-expresses a physical direction in the requested frame.
pub fn direction_in_frame(spec: &LatticeSpec, angle: f64, frame: AngleFrame) -> f64 {
    match frame {
        AngleFrame::Physical => norm_angle(angle),
        AngleFrame::Index => {
            let v = spec.to_index_velocity([angle.cos(), angle.sin()]);
            norm_angle(v[1].atan2(v[0]))
        }
    }
}

/// Dominant energy-flux directions (radians in `[0, 2pi)`) for a source
/// driven at an interior resonance.
pub fn beaming_directions(spec: &LatticeSpec, omega: f64, frame: AngleFrame) -> Result<Vec<f64>> {
    let catalog = resonance_catalog(spec);
    let entry = catalog
        .iter()
        .find(|e| (e.omega - omega).abs() <= 1e-4 * e.omega)
        .ok_or(LatticeError::NotResonant { omega })?;
    if !entry.kind.is_interior() {
        return Err(LatticeError::NoBeaming { omega, kind: entry.kind.name().to_string() });
    }
    let mut out: Vec<f64> = entry.beaming.iter().map(|&a| direction_in_frame(spec, a, frame)).collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Largest index-space speeds `(max |dm/dt|, max |dn/dt|)` over all branches,
/// scanned on a 128 x 128 zone grid.
pub fn max_index_speed(spec: &LatticeSpec) -> [f64; 2] {
    let mut best = [0.0f64, 0.0f64];
    for &branch in branches(spec.family) {
        let field = group_velocity_field(spec, branch, 128).expect("valid branch");
        for s in field {
            if let Some(cg) = s.group_velocity.cg() {
                let v = spec.to_index_velocity(cg);
                best[0] = best[0].max(v[0].abs());
                best[1] = best[1].max(v[1].abs());
            }
        }
    }
    // the supremum of the acoustic speed sits at k -> 0, off the grid
    for q in 0..64 {
        let a = q as f64 * TWO_PI / 64.0;
        let k = WaveVector::new(1e-4 * a.cos(), 1e-4 * a.sin());
        if let Ok(GroupVelocity::Regular { cg, .. }) = group_velocity(spec, k, branches(spec.family)[0]) {
            let v = spec.to_index_velocity(cg);
            best[0] = best[0].max(v[0].abs());
            best[1] = best[1].max(v[1].abs());
        }
    }
    if spec.family.is_1d() {
        best[1] = 0.0;
    }
    best
}
