//! Lattice families, node indexing, physical embedding, equations of motion
//! and Bloch dynamical matrices.
//!
//! Every family is described by a list of [`Bond`]s per sublattice. The
//! acceleration operator and the Bloch matrix are both generated from that
//! list, so the two can never disagree about the stencil.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{LatticeError, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Lattice family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// 1D mass-spring chain.
    Msl1d,
    /// Rectangular-cell lattice (square and simplified variants included).
    Rcl,
    /// Hexagonal-cell (honeycomb) lattice, two nodes per cell.
    Hcl,
    /// Equilateral-triangle lattice.
    Etl,
    /// Right-triangle lattice: square lattice plus one bonded diagonal.
    Rtl,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Msl1d => "msl1d",
            Family::Rcl => "rcl",
            Family::Hcl => "hcl",
            Family::Etl => "etl",
            Family::Rtl => "rtl",
        }
    }

    pub fn sublattices(self) -> usize {
        match self {
            Family::Hcl => 2,
            _ => 1,
        }
    }

    pub fn is_1d(self) -> bool {
        self == Family::Msl1d
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "msl1d" | "msl" => Ok(Family::Msl1d),
            "rcl" => Ok(Family::Rcl),
            "hcl" => Ok(Family::Hcl),
            "etl" => Ok(Family::Etl),
            "rtl" => Ok(Family::Rtl),
            other => Err(LatticeError::InvalidSpec(format!("unknown family '{other}'"))),
        }
    }
}

/// Sublattice tag. Only the hexagonal lattice uses `V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sublattice {
    U,
    V,
}

impl Sublattice {
    pub fn index(self) -> usize {
        match self {
            Sublattice::U => 0,
            Sublattice::V => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Sublattice::U
        } else {
            Sublattice::V
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sublattice::U => "u",
            Sublattice::V => "v",
        }
    }
}

impl FromStr for Sublattice {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "u" | "U" => Ok(Sublattice::U),
            "v" | "V" => Ok(Sublattice::V),
            other => Err(LatticeError::InvalidSpec(format!("unknown sublattice '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeIndex {
    pub m: i64,
    pub n: i64,
    pub sub: Sublattice,
}

impl NodeIndex {
    pub const ORIGIN: NodeIndex = NodeIndex::u(0, 0);

    pub const fn u(m: i64, n: i64) -> Self {
        NodeIndex { m, n, sub: Sublattice::U }
    }

    pub const fn v(m: i64, n: i64) -> Self {
        NodeIndex { m, n, sub: Sublattice::V }
    }
}

/// Which flavour of rectangular lattice a spec describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RclVariant {
    /// `l = 1`, `gx = gy`.
    Square,
    /// `gx = gy`, `l != 1`.
    Simplified,
    /// Unequal stiffnesses.
    General,
}

/// Lattice family plus its physical parameters.
///
/// Units follow the usual lattice-dynamics normalization: time is measured in
/// `sqrt(M/g)`. `gx`/`gy` are used by the rectangular lattice (and `gx` is the
/// spring stiffness of the 1D chain); the hexagonal and triangular lattices use
/// unit bond stiffness. `gamma` is the diagonal stiffness of the right-triangle
/// lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    pub family: Family,
    pub l: f64,
    pub gx: f64,
    pub gy: f64,
    pub gamma: f64,
    pub mass: f64,
}

/// One spring seen from a target node: the source node sits at cell offset
/// `(dm, dn)` on sublattice `source`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bond {
    pub source: Sublattice,
    pub dm: i64,
    pub dn: i64,
    pub stiffness: f64,
}

impl LatticeSpec {
    fn base(family: Family) -> Self {
        LatticeSpec { family, l: 1.0, gx: 1.0, gy: 1.0, gamma: 0.0, mass: 1.0 }
    }

    pub fn msl1d() -> Self {
        Self::base(Family::Msl1d)
    }

    /// Square-cell lattice.
    pub fn scl() -> Self {
        Self::base(Family::Rcl)
    }

    /// Simplified rectangular lattice: equal stiffnesses, y-bond length `l`.
    pub fn srcl(l: f64) -> Self {
        LatticeSpec { l, ..Self::base(Family::Rcl) }
    }

    /// Rectangular lattice whose y-bonds have length `l` and stiffness `1/l`
    /// (x-bond length and stiffness are the units).
    pub fn rcl(l: f64) -> Self {
        LatticeSpec { l, gy: 1.0 / l, ..Self::base(Family::Rcl) }
    }

    pub fn rcl_with(l: f64, gx: f64, gy: f64) -> Self {
        LatticeSpec { l, gx, gy, ..Self::base(Family::Rcl) }
    }

    pub fn hcl() -> Self {
        Self::base(Family::Hcl)
    }

    pub fn etl() -> Self {
        Self::base(Family::Etl)
    }

    pub fn rtl(gamma: f64) -> Self {
        LatticeSpec { gamma, ..Self::base(Family::Rtl) }
    }

    pub fn with_mass(mut self, mass: f64) -> Self {
        self.mass = mass;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(LatticeError::InvalidSpec(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("mass", self.mass)?;
        match self.family {
            Family::Rcl => {
                positive("l", self.l)?;
                positive("gx", self.gx)?;
                positive("gy", self.gy)?;
            }
            Family::Msl1d => positive("gx", self.gx)?,
            Family::Rtl => {
                if !(self.gamma.is_finite() && self.gamma >= 0.0) {
                    return Err(LatticeError::InvalidSpec(format!(
                        "gamma must be nonnegative and finite, got {}",
                        self.gamma
                    )));
                }
            }
            Family::Hcl | Family::Etl => {}
        }
        Ok(())
    }

    /// Cell aspect ratio; 1 for every family but the rectangular one.
    pub fn aspect(&self) -> f64 {
        if self.family == Family::Rcl {
            self.l
        } else {
            1.0
        }
    }

    pub fn rcl_variant(&self) -> Option<RclVariant> {
        if self.family != Family::Rcl {
            return None;
        }
        Some(if self.gx != self.gy {
            RclVariant::General
        } else if self.l == 1.0 {
            RclVariant::Square
        } else {
            RclVariant::Simplified
        })
    }

    /// Spring stiffness of the 1D chain.
    pub fn chain_stiffness(&self) -> f64 {
        self.gx
    }

    /// Physical lattice vectors `(e_m, e_n)`: moving one step in `m` (resp.
    /// `n`) translates a node by `e_m` (resp. `e_n`).
    pub fn lattice_vectors(&self) -> ([f64; 2], [f64; 2]) {
        match self.family {
            Family::Msl1d | Family::Rtl => ([1.0, 0.0], [0.0, 1.0]),
            Family::Rcl => ([1.0, 0.0], [0.0, self.l]),
            Family::Etl => ([1.0, 0.0], [0.5, 0.5 * SQRT3]),
            // cell [m, n] sits at n*a1 + m*a2, a1 = (sqrt3/2, 1/2), a2 = (sqrt3/2, -1/2)
            Family::Hcl => ([0.5 * SQRT3, -0.5], [0.5 * SQRT3, 0.5]),
        }
    }

    /// Bonds acting on a node of sublattice `target`.
    pub fn bonds(&self, target: Sublattice) -> Vec<Bond> {
        let b = |source, dm, dn, stiffness| Bond { source, dm, dn, stiffness };
        use Sublattice::{U, V};
        match self.family {
            Family::Msl1d => vec![b(U, 1, 0, self.gx), b(U, -1, 0, self.gx)],
            Family::Rcl => vec![
                b(U, 1, 0, self.gx),
                b(U, -1, 0, self.gx),
                b(U, 0, 1, self.gy),
                b(U, 0, -1, self.gy),
            ],
            Family::Hcl => match target {
                U => vec![b(V, 0, 0, 1.0), b(V, 0, -1, 1.0), b(V, -1, 0, 1.0)],
                V => vec![b(U, 0, 0, 1.0), b(U, 0, 1, 1.0), b(U, 1, 0, 1.0)],
            },
            Family::Etl => vec![
                b(U, 0, 1, 1.0),
                b(U, 1, 0, 1.0),
                b(U, -1, 0, 1.0),
                b(U, 0, -1, 1.0),
                b(U, -1, 1, 1.0),
                b(U, 1, -1, 1.0),
            ],
            Family::Rtl => {
                let mut bonds = vec![b(U, 0, 1, 1.0), b(U, 1, 0, 1.0), b(U, -1, 0, 1.0), b(U, 0, -1, 1.0)];
                if self.gamma != 0.0 {
                    bonds.push(b(U, 1, 1, self.gamma));
                    bonds.push(b(U, -1, -1, self.gamma));
                }
                bonds
            }
        }
    }

    /// Sum of the stiffnesses attached to a node of sublattice `target`.
    pub fn total_stiffness(&self, target: Sublattice) -> f64 {
        self.bonds(target).iter().map(|b| b.stiffness).sum()
    }

    pub fn check_index(&self, idx: NodeIndex) -> Result<()> {
        if idx.sub == Sublattice::V && self.family != Family::Hcl {
            return Err(LatticeError::InvalidIndex(idx, self.family));
        }
        if self.family.is_1d() && idx.n != 0 {
            return Err(LatticeError::InvalidIndex(idx, self.family));
        }
        Ok(())
    }

    /// Physical coordinates of a node.
    ///
    /// Hexagonal lattice: v-nodes sit on the cell lattice points, u-nodes one
    /// bond length (`1/sqrt3` in lattice-constant units) to their left.
    pub fn node_position(&self, idx: NodeIndex) -> Result<(f64, f64)> {
        self.check_index(idx)?;
        let (em, en) = self.lattice_vectors();
        let (m, n) = (idx.m as f64, idx.n as f64);
        let mut x = m * em[0] + n * en[0];
        let y = m * em[1] + n * en[1];
        if self.family == Family::Hcl && idx.sub == Sublattice::U {
            x -= 1.0 / SQRT3;
        }
        Ok((x, y))
    }

    /// Nearest-neighbour distance in physical units.
    pub fn bond_length(&self) -> f64 {
        match self.family {
            Family::Hcl => 1.0 / SQRT3,
            _ => 1.0,
        }
    }

    /// Converts a physical velocity into lattice-index velocity
    /// `(dm/dt, dn/dt)`.
    pub fn to_index_velocity(&self, v: [f64; 2]) -> [f64; 2] {
        let (em, en) = self.lattice_vectors();
        let det = em[0] * en[1] - en[0] * em[1];
        [(en[1] * v[0] - en[0] * v[1]) / det, (-em[1] * v[0] + em[0] * v[1]) / det]
    }

    /// Axis-aligned box that contains the Brillouin zone.
    pub fn zone_box(&self) -> ([f64; 2], [f64; 2]) {
        match self.family {
            Family::Msl1d => ([-PI, PI], [0.0, 0.0]),
            Family::Rcl => ([-PI, PI], [-PI / self.l, PI / self.l]),
            Family::Hcl => ([-2.0 * PI / SQRT3, 2.0 * PI / SQRT3], [-4.0 * PI / 3.0, 4.0 * PI / 3.0]),
            Family::Etl => ([-PI, PI], [-2.0 * PI / SQRT3, 2.0 * PI / SQRT3]),
            Family::Rtl => ([-PI, PI], [-PI, PI]),
        }
    }
}

/// Point `(kx, ky)` of the reciprocal plane, radians per unit length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveVector {
    pub kx: f64,
    pub ky: f64,
}

impl WaveVector {
    pub const ZERO: WaveVector = WaveVector { kx: 0.0, ky: 0.0 };

    pub const fn new(kx: f64, ky: f64) -> Self {
        WaveVector { kx, ky }
    }

    pub fn neg(self) -> Self {
        WaveVector::new(-self.kx, -self.ky)
    }

    /// Phase advance per index step, `(k . e_m, k . e_n)`.
    pub fn index_phases(self, spec: &LatticeSpec) -> (f64, f64) {
        let (em, en) = spec.lattice_vectors();
        let tm = self.kx * em[0] + self.ky * em[1];
        let tn = if spec.family.is_1d() { 0.0 } else { self.kx * en[0] + self.ky * en[1] };
        (tm, tn)
    }

    /// Inverse of [`WaveVector::index_phases`].
    pub fn from_index_phases(spec: &LatticeSpec, tm: f64, tn: f64) -> Self {
        if spec.family.is_1d() {
            return WaveVector::new(tm, 0.0);
        }
        let (em, en) = spec.lattice_vectors();
        let det = em[0] * en[1] - en[0] * em[1];
        WaveVector::new((en[1] * tm - em[1] * tn) / det, (-en[0] * tm + em[0] * tn) / det)
    }

    /// Membership in the family's Brillouin zone (closed, with a small slack).
    pub fn in_zone(self, spec: &LatticeSpec) -> bool {
        let eps = 1e-12;
        let ([x0, x1], [y0, y1]) = spec.zone_box();
        let in_box = self.kx >= x0 - eps && self.kx <= x1 + eps && self.ky >= y0 - eps && self.ky <= y1 + eps;
        match spec.family {
            Family::Hcl => in_box && self.ky.abs() + self.kx.abs() / SQRT3 <= 4.0 * PI / 3.0 + eps,
            _ => in_box,
        }
    }

    /// Folds `k` so that both index phases lie in `(-pi, pi]`. The result is
    /// equivalent to `k` modulo a reciprocal lattice vector; for the hexagonal
    /// and triangular lattices it lands in the index-space parallelogram cell
    /// rather than the hexagonal zone.
    pub fn fold(self, spec: &LatticeSpec) -> Self {
        let (tm, tn) = self.index_phases(spec);
        WaveVector::from_index_phases(spec, wrap_phase(tm), wrap_phase(tn))
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_phase(t: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = t.rem_euclid(two_pi);
    if r > PI {
        r -= two_pi;
    }
    r
}

/// Reciprocal-space dynamical operator; its eigenvalues are `omega^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochMatrix {
    pub dimension: usize,
    pub entries: [[Complex64; 2]; 2],
}

impl BlochMatrix {
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i][j]
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (0..self.dimension)
            .all(|i| (0..self.dimension).all(|j| (self.entries[i][j] - self.entries[j][i].conj()).norm() <= tol))
    }
}

/// Bloch matrix at `k` (folded into the zone first).
pub fn bloch_matrix(spec: &LatticeSpec, k: WaveVector) -> BlochMatrix {
    let (tm, tn) = k.fold(spec).index_phases(spec);
    let dim = spec.family.sublattices();
    let mut entries = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (a, row) in entries.iter_mut().enumerate().take(dim) {
        let target = Sublattice::from_index(a);
        for bond in spec.bonds(target) {
            row[a] += bond.stiffness;
            let phase = tm * bond.dm as f64 + tn * bond.dn as f64;
            row[bond.source.index()] -= Complex64::from_polar(bond.stiffness, phase);
        }
        for e in row.iter_mut() {
            *e /= spec.mass;
        }
    }
    BlochMatrix { dimension: dim, entries }
}

/// Boundary treatment outside a finite window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// A ring of nodes held at zero displacement.
    Fixed,
    /// Index-space torus.
    Periodic,
}

/// Inclusive index ranges `[m_lo, m_hi] x [n_lo, n_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub m_lo: i64,
    pub m_hi: i64,
    pub n_lo: i64,
    pub n_hi: i64,
}

impl Window {
    pub fn new(m_lo: i64, m_hi: i64, n_lo: i64, n_hi: i64) -> Self {
        Window { m_lo, m_hi, n_lo, n_hi }
    }

    /// Square window of half-width `r` around the origin (a single row for 1D).
    pub fn centered(spec: &LatticeSpec, rm: i64, rn: i64) -> Self {
        if spec.family.is_1d() {
            Window::new(-rm, rm, 0, 0)
        } else {
            Window::new(-rm, rm, -rn, rn)
        }
    }

    pub fn width(&self) -> usize {
        (self.m_hi - self.m_lo + 1) as usize
    }

    pub fn height(&self) -> usize {
        (self.n_hi - self.n_lo + 1) as usize
    }

    pub fn cells(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, m: i64, n: i64) -> bool {
        m >= self.m_lo && m <= self.m_hi && n >= self.n_lo && n <= self.n_hi
    }

    /// Row-major offset (`n` selects the row).
    pub fn offset(&self, m: i64, n: i64) -> Option<usize> {
        self.contains(m, n)
            .then(|| (n - self.n_lo) as usize * self.width() + (m - self.m_lo) as usize)
    }

    pub fn cell_at(&self, offset: usize) -> (i64, i64) {
        let w = self.width();
        (self.m_lo + (offset % w) as i64, self.n_lo + (offset / w) as i64)
    }

    pub fn is_valid(&self) -> bool {
        self.m_hi >= self.m_lo && self.n_hi >= self.n_lo
    }
}

/// Displacements and velocities over a finite window.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub window: Window,
    pub boundary: Boundary,
    pub t: f64,
    /// One row-major array per sublattice.
    pub displacement: Vec<Vec<f64>>,
    pub velocity: Vec<Vec<f64>>,
}

impl FieldState {
    pub fn zeros(spec: &LatticeSpec, window: Window, boundary: Boundary) -> Self {
        let subs = spec.family.sublattices();
        let len = window.cells();
        FieldState {
            window,
            boundary,
            t: 0.0,
            displacement: vec![vec![0.0; len]; subs],
            velocity: vec![vec![0.0; len]; subs],
        }
    }

    pub fn sublattices(&self) -> usize {
        self.displacement.len()
    }

    pub fn get(&self, idx: NodeIndex) -> Option<f64> {
        let off = self.window.offset(idx.m, idx.n)?;
        self.displacement.get(idx.sub.index()).map(|a| a[off])
    }

    pub fn set(&mut self, idx: NodeIndex, value: f64) -> Result<()> {
        let off = self
            .window
            .offset(idx.m, idx.n)
            .ok_or_else(|| LatticeError::InvalidConfig(format!("node {idx:?} outside window")))?;
        let arr = self
            .displacement
            .get_mut(idx.sub.index())
            .ok_or_else(|| LatticeError::InvalidConfig(format!("node {idx:?} has no sublattice array")))?;
        arr[off] = value;
        Ok(())
    }

    pub fn velocity_at(&self, idx: NodeIndex) -> Option<f64> {
        let off = self.window.offset(idx.m, idx.n)?;
        self.velocity.get(idx.sub.index()).map(|a| a[off])
    }

    pub fn is_finite(&self) -> bool {
        self.displacement.iter().chain(self.velocity.iter()).all(|a| a.iter().all(|v| v.is_finite()))
    }

    /// Iterates `(node, displacement)` over every node of the window.
    pub fn nodes(&self) -> impl Iterator<Item = (NodeIndex, f64)> + '_ {
        self.displacement.iter().enumerate().flat_map(move |(s, arr)| {
            arr.iter().enumerate().map(move |(off, &u)| {
                let (m, n) = self.window.cell_at(off);
                (NodeIndex { m, n, sub: Sublattice::from_index(s) }, u)
            })
        })
    }
}

/// Displacement arrays with a one-node halo on every side, the layout the
/// stencil kernel runs on.
#[derive(Debug, Clone)]
pub(crate) struct PaddedField {
    pub nm: usize,
    pub nn: usize,
    pub stride: usize,
    pub data: Vec<Vec<f64>>,
}

impl PaddedField {
    pub fn zeros(window: &Window, subs: usize) -> Self {
        let (nm, nn) = (window.width(), window.height());
        let stride = nm + 2;
        PaddedField { nm, nn, stride, data: vec![vec![0.0; stride * (nn + 2)]; subs] }
    }

    pub fn from_arrays(window: &Window, arrays: &[Vec<f64>]) -> Self {
        let mut p = PaddedField::zeros(window, arrays.len());
        for (dst, src) in p.data.iter_mut().zip(arrays) {
            for j in 0..p.nn {
                let row = &src[j * p.nm..(j + 1) * p.nm];
                dst[(j + 1) * p.stride + 1..(j + 1) * p.stride + 1 + p.nm].copy_from_slice(row);
            }
        }
        p
    }

    pub fn interior(&self, sub: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.nm * self.nn);
        for j in 0..self.nn {
            out.extend_from_slice(self.row(sub, j));
        }
        out
    }

    /// Interior row `j` (0-based) of sublattice `sub`.
    pub fn row(&self, sub: usize, j: usize) -> &[f64] {
        let start = (j + 1) * self.stride + 1;
        &self.data[sub][start..start + self.nm]
    }

    pub fn pos(&self, i: usize, j: usize) -> usize {
        (j + 1) * self.stride + i + 1
    }

    /// Copies opposite edges into the halo (torus).
    pub fn refresh_periodic_halo(&mut self) {
        let (nm, nn, stride) = (self.nm, self.nn, self.stride);
        for arr in &mut self.data {
            arr.copy_within(nn * stride..(nn + 1) * stride, 0);
            arr.copy_within(stride..2 * stride, (nn + 1) * stride);
            for j in 0..nn + 2 {
                let r = j * stride;
                arr[r] = arr[r + nm];
                arr[r + nm + 1] = arr[r + 1];
            }
        }
    }
}

/// Stencil precomputed from the bond list.
#[derive(Debug, Clone)]
pub(crate) struct Stencil {
    /// Per target sublattice: diagonal coefficient and neighbour terms
    /// `(source sublattice, padded-array offset, stiffness)`.
    pub rows: Vec<(f64, Vec<(usize, isize, f64)>)>,
}

impl Stencil {
    pub fn new(spec: &LatticeSpec, stride: usize) -> Self {
        let rows = (0..spec.family.sublattices())
            .map(|s| {
                let target = Sublattice::from_index(s);
                let bonds = spec.bonds(target);
                let diag: f64 = bonds.iter().map(|b| b.stiffness).sum();
                let terms = bonds
                    .iter()
                    .map(|b| (b.source.index(), b.dn as isize * stride as isize + b.dm as isize, b.stiffness))
                    .collect();
                (diag, terms)
            })
            .collect();
        Stencil { rows }
    }

    /// Writes the bond force (acceleration times mass) on interior row `j` of
    /// sublattice `sub` into `out`.
    #[inline]
    pub fn force_row(&self, field: &PaddedField, sub: usize, j: usize, out: &mut [f64]) {
        let (diag, terms) = &self.rows[sub];
        let start = field.pos(0, j);
        let nm = field.nm;
        let own = &field.data[sub][start..start + nm];
        for (o, &u) in out.iter_mut().zip(own) {
            *o = -diag * u;
        }
        for &(src, shift, g) in terms {
            let s = (start as isize + shift) as usize;
            let neigh = &field.data[src][s..s + nm];
            for (o, &u) in out.iter_mut().zip(neigh) {
                *o += g * u;
            }
        }
    }
}

impl Stencil {
    /// Leapfrog update of one interior row, fused with the force evaluation:
    /// `prev <- 2 u - prev + c f(u)`. `prev_row` is the full padded row.
    /// Arithmetic order matches [`Stencil::force_row`].
    #[inline]
    pub fn leapfrog_row(&self, field: &PaddedField, sub: usize, j: usize, prev_row: &mut [f64], c: f64) {
        let (_, terms) = &self.rows[sub];
        match terms.len() {
            2 => self.leapfrog_fixed::<2>(field, sub, j, prev_row, c),
            3 => self.leapfrog_fixed::<3>(field, sub, j, prev_row, c),
            4 => self.leapfrog_fixed::<4>(field, sub, j, prev_row, c),
            6 => self.leapfrog_fixed::<6>(field, sub, j, prev_row, c),
            _ => {
                let mut f = vec![0.0; field.nm];
                self.force_row(field, sub, j, &mut f);
                let u = field.row(sub, j);
                for ((p, &u), &f) in prev_row[1..=field.nm].iter_mut().zip(u).zip(&f) {
                    *p = 2.0 * u - *p + c * f;
                }
            }
        }
    }

    #[inline(always)]
    fn leapfrog_fixed<const N: usize>(&self, field: &PaddedField, sub: usize, j: usize, prev_row: &mut [f64], c: f64) {
        let (diag, terms) = &self.rows[sub];
        let start = field.pos(0, j);
        let nm = field.nm;
        let own = &field.data[sub][start..start + nm];
        let neigh: [&[f64]; N] = std::array::from_fn(|k| {
            let (src, shift, _) = terms[k];
            let s = (start as isize + shift) as usize;
            &field.data[src][s..s + nm]
        });
        let g: [f64; N] = std::array::from_fn(|k| terms[k].2);
        let out = &mut prev_row[1..=nm];
        // lets the optimizer drop the bounds checks below
        assert!(own.len() == nm && out.len() == nm && neigh.iter().all(|n| n.len() == nm));
        for i in 0..nm {
            let u = own[i];
            let mut f = -diag * u;
            for k in 0..N {
                f += g[k] * neigh[k][i];
            }
            out[i] = 2.0 * u - out[i] + c * f;
        }
    }
}

/// Accelerations at every node of the window, one array per sublattice.
/// Nodes outside the window are zero (fixed ring) or wrapped (periodic).
pub fn acceleration(spec: &LatticeSpec, field: &FieldState) -> Vec<Vec<f64>> {
    let mut padded = PaddedField::from_arrays(&field.window, &field.displacement);
    if field.boundary == Boundary::Periodic {
        padded.refresh_periodic_halo();
    }
    let stencil = Stencil::new(spec, padded.stride);
    let inv_mass = 1.0 / spec.mass;
    let mut out = vec![vec![0.0; field.window.cells()]; field.sublattices()];
    for (s, arr) in out.iter_mut().enumerate() {
        for (j, row) in arr.chunks_mut(padded.nm).enumerate() {
            stencil.force_row(&padded, s, j, row);
            for a in row.iter_mut() {
                *a *= inv_mass;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn impulse(spec: &LatticeSpec, idx: NodeIndex, r: i64) -> FieldState {
        let mut f = FieldState::zeros(spec, Window::centered(spec, r, r), Boundary::Fixed);
        f.set(idx, 1.0).unwrap();
        f
    }

    fn acc_at(spec: &LatticeSpec, f: &FieldState, idx: NodeIndex) -> f64 {
        let a = acceleration(spec, f);
        a[idx.sub.index()][f.window.offset(idx.m, idx.n).unwrap()]
    }

    #[test]
    fn etl_positions() {
        let s = LatticeSpec::etl();
        assert_eq!(s.node_position(NodeIndex::u(1, 0)).unwrap(), (1.0, 0.0));
        let (x, y) = s.node_position(NodeIndex::u(0, 1)).unwrap();
        assert!((x - 0.5).abs() < 1e-15 && (y - 0.866_025_403_784_438_6).abs() < 1e-15);
    }

    #[test]
    fn rcl_position_scales_y() {
        let s = LatticeSpec::rcl(1.5);
        assert_eq!(s.node_position(NodeIndex::u(2, 3)).unwrap(), (2.0, 4.5));
    }

    #[test]
    fn hcl_bonds_have_unit_cell_length() {
        let s = LatticeSpec::hcl();
        let u = s.node_position(NodeIndex::u(0, 0)).unwrap();
        for b in s.bonds(Sublattice::U) {
            let v = s.node_position(NodeIndex { m: b.dm, n: b.dn, sub: b.source }).unwrap();
            let d = ((v.0 - u.0).powi(2) + (v.1 - u.1).powi(2)).sqrt();
            assert!((d - s.bond_length()).abs() < 1e-14, "bond length {d}");
        }
    }

    #[test]
    fn v_index_rejected_outside_hcl() {
        let s = LatticeSpec::scl();
        assert!(matches!(s.node_position(NodeIndex::v(0, 0)), Err(LatticeError::InvalidIndex(..))));
        assert!(LatticeSpec::msl1d().node_position(NodeIndex::u(0, 1)).is_err());
    }

    #[test]
    fn scl_point_stencil() {
        let s = LatticeSpec::scl();
        let f = impulse(&s, NodeIndex::ORIGIN, 3);
        assert_eq!(acc_at(&s, &f, NodeIndex::ORIGIN), -4.0);
        assert_eq!(acc_at(&s, &f, NodeIndex::u(1, 0)), 1.0);
        assert_eq!(acc_at(&s, &f, NodeIndex::u(1, 1)), 0.0);
    }

    #[test]
    fn hcl_point_stencil() {
        let s = LatticeSpec::hcl();
        let f = impulse(&s, NodeIndex::ORIGIN, 3);
        assert_eq!(acc_at(&s, &f, NodeIndex::v(0, 0)), 1.0);
        assert_eq!(acc_at(&s, &f, NodeIndex::ORIGIN), -3.0);
        // u(0,0) also feeds v(0,-1) and v(-1,0)
        assert_eq!(acc_at(&s, &f, NodeIndex::v(0, -1)), 1.0);
        assert_eq!(acc_at(&s, &f, NodeIndex::v(-1, 0)), 1.0);
    }

    #[test]
    fn etl_and_rtl_diagonals() {
        let s = LatticeSpec::etl();
        let f = impulse(&s, NodeIndex::ORIGIN, 3);
        assert_eq!(acc_at(&s, &f, NodeIndex::ORIGIN), -6.0);
        let r = LatticeSpec::rtl(0.5);
        let f = impulse(&r, NodeIndex::ORIGIN, 3);
        assert_eq!(acc_at(&r, &f, NodeIndex::ORIGIN), -5.0);
        assert_eq!(acc_at(&r, &f, NodeIndex::u(1, 1)), 0.5);
        assert_eq!(acc_at(&r, &f, NodeIndex::u(1, -1)), 0.0);
    }

    #[test]
    fn uniform_field_is_force_free() {
        for spec in [
            LatticeSpec::msl1d(),
            LatticeSpec::rcl(1.5),
            LatticeSpec::hcl(),
            LatticeSpec::etl(),
            LatticeSpec::rtl(2.0625),
        ] {
            let w = Window::centered(&spec, 4, 4);
            let mut f = FieldState::zeros(&spec, w, Boundary::Periodic);
            for a in f.displacement.iter_mut() {
                a.iter_mut().for_each(|u| *u = 0.75);
            }
            let acc = acceleration(&spec, &f);
            assert!(acc.iter().flatten().all(|a| a.abs() < 1e-14), "{:?}", spec.family);
            let b = bloch_matrix(&spec, WaveVector::ZERO);
            let d = b.dimension;
            for i in 0..d {
                let row: Complex64 = (0..d).map(|j| b.get(i, j)).sum();
                assert!(row.norm() < 1e-14, "{:?}", spec.family);
            }
        }
    }

    #[test]
    fn bloch_examples() {
        let s = LatticeSpec::scl();
        let b = bloch_matrix(&s, WaveVector::new(PI, PI));
        assert!((b.get(0, 0).re - 8.0).abs() < 1e-12);
        let b = bloch_matrix(&LatticeSpec::msl1d(), WaveVector::new(PI, 0.0));
        assert!((b.get(0, 0).re - 4.0).abs() < 1e-12);
        let h = bloch_matrix(&LatticeSpec::hcl(), WaveVector::ZERO);
        assert_eq!(h.dimension, 2);
        // [[3, -3], [-3, 3]] has eigenvalues 0 and 6
        assert!((h.get(0, 1).re + 3.0).abs() < 1e-12 && (h.get(0, 0).re - 3.0).abs() < 1e-12);
    }

    #[test]
    fn fold_preserves_bloch_matrix() {
        let s = LatticeSpec::hcl();
        let k = WaveVector::new(1.3, -0.4);
        let (tm, tn) = k.index_phases(&s);
        let shifted = WaveVector::from_index_phases(&s, tm + 2.0 * PI, tn - 4.0 * PI);
        let (a, b) = (bloch_matrix(&s, k), bloch_matrix(&s, shifted));
        for i in 0..2 {
            for j in 0..2 {
                assert!((a.get(i, j) - b.get(i, j)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn index_velocity_inverts_embedding() {
        let s = LatticeSpec::hcl();
        let (em, en) = s.lattice_vectors();
        let v = [0.3 * em[0] - 1.2 * en[0], 0.3 * em[1] - 1.2 * en[1]];
        let iv = s.to_index_velocity(v);
        assert!((iv[0] - 0.3).abs() < 1e-14 && (iv[1] + 1.2).abs() < 1e-14);
    }

    #[test]
    fn hcl_zone_contains_conical_points() {
        let s = LatticeSpec::hcl();
        assert!(WaveVector::new(2.0 * PI / SQRT3, 2.0 * PI / 3.0).in_zone(&s));
        assert!(WaveVector::new(0.0, 4.0 * PI / 3.0).in_zone(&s));
        assert!(!WaveVector::new(2.0 * PI / SQRT3, PI).in_zone(&s));
    }

    #[test]
    fn periodic_halo_wraps_corners() {
        let s = LatticeSpec::rtl(1.0);
        let w = Window::new(0, 3, 0, 3);
        let mut f = FieldState::zeros(&s, w, Boundary::Periodic);
        f.set(NodeIndex::u(3, 3), 1.0).unwrap();
        // (0,0) sees (3,3) through the wrapped (-1,-1) diagonal
        let a = acceleration(&s, &f);
        assert_eq!(a[0][w.offset(0, 0).unwrap()], 1.0);
    }
}
