//! Explicit time integration of finite lattice windows driven by a point
//! source.
//!
//! The scheme is the central difference on displacements,
//! `u[n+1] = 2 u[n] - u[n-1] + dt^2 a(u[n])`, run on halo-padded arrays. Rows
//! are independent within a step, so they can be spread over a rayon pool
//! without changing a single bit of the result.

use std::f64::consts::PI;
use std::mem;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dispersion::max_index_speed;
use crate::error::{LatticeError, Result};
use crate::lattice::{Boundary, FieldState, LatticeSpec, NodeIndex, PaddedField, Stencil, Sublattice, Window};

/// Largest admissible time step.
pub const MAX_DT: f64 = 0.01;
/// Extra rings of nodes kept between the fastest wavefront and the edge.
pub const WINDOW_MARGIN: i64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    /// Displacement of the source node is prescribed.
    Kinematic,
    /// A point force is applied to the source node.
    Force,
}

impl SourceKind {
    pub fn name(self) -> &'static str {
        match self {
            SourceKind::Kinematic => "kinematic",
            SourceKind::Force => "force",
        }
    }
}

impl FromStr for SourceKind {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kinematic" => Ok(SourceKind::Kinematic),
            "force" => Ok(SourceKind::Force),
            other => Err(LatticeError::InvalidConfig(format!("unknown source kind '{other}'"))),
        }
    }
}

/// `amplitude * sin(omega0 * t)` switched on at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    pub kind: SourceKind,
    pub omega0: f64,
    pub amplitude: f64,
    pub node: NodeIndex,
}

impl SourceSpec {
    pub fn kinematic(omega0: f64) -> Self {
        SourceSpec { kind: SourceKind::Kinematic, omega0, amplitude: 1.0, node: NodeIndex::ORIGIN }
    }

    pub fn force(omega0: f64) -> Self {
        SourceSpec { kind: SourceKind::Force, omega0, amplitude: 1.0, node: NodeIndex::ORIGIN }
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn at(mut self, node: NodeIndex) -> Self {
        self.node = node;
        self
    }

    pub fn value(&self, t: f64) -> f64 {
        self.amplitude * (self.omega0 * t).sin()
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega0
    }

    pub fn validate(&self, spec: &LatticeSpec) -> Result<()> {
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(LatticeError::InvalidConfig(format!("omega0 must be positive, got {}", self.omega0)));
        }
        if !self.amplitude.is_finite() {
            return Err(LatticeError::InvalidConfig("source amplitude must be finite".into()));
        }
        spec.check_index(self.node)
    }
}

/// How the simulated window is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowSpec {
    /// Large enough that no wave reaches the edge before `t_end`.
    Auto,
    /// Smaller: reflections may exist but cannot reach any probe before `t_end`.
    ProbeSafe,
    Explicit(Window),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub window: WindowSpec,
    pub boundary: Boundary,
    pub probes: Vec<NodeIndex>,
    pub snapshot_times: Vec<f64>,
    /// Record probes every `probe_stride` steps.
    pub probe_stride: usize,
    /// Accept an explicit window that the fastest wave would reach.
    pub allow_small_window: bool,
    /// Worker threads for the stepper; 1 runs inline.
    pub workers: usize,
}

impl SimConfig {
    pub fn new(t_end: f64) -> Self {
        SimConfig {
            dt: MAX_DT,
            t_end,
            window: WindowSpec::Auto,
            boundary: Boundary::Fixed,
            probes: Vec::new(),
            snapshot_times: Vec::new(),
            probe_stride: 1,
            allow_small_window: false,
            workers: 1,
        }
    }

    pub fn with_window(mut self, window: WindowSpec) -> Self {
        self.window = window;
        self
    }

    pub fn with_probes(mut self, probes: impl IntoIterator<Item = NodeIndex>) -> Self {
        self.probes = probes.into_iter().collect();
        self
    }

    pub fn with_snapshots(mut self, times: impl IntoIterator<Item = f64>) -> Self {
        self.snapshot_times = times.into_iter().collect();
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(LatticeError::InvalidConfig(format!("dt must lie in (0, {MAX_DT}], got {}", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(LatticeError::InvalidConfig(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.probe_stride == 0 || self.workers == 0 {
            return Err(LatticeError::InvalidConfig("probe_stride and workers must be at least 1".into()));
        }
        if let Some(t) = self.snapshot_times.iter().find(|&&t| !(0.0..=self.t_end + 1e-9).contains(&t)) {
            return Err(LatticeError::InvalidConfig(format!("snapshot time {t} outside [0, t_end]")));
        }
        Ok(())
    }
}

/// Displacement history of one node on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRecord {
    pub node: NodeIndex,
    pub times: Vec<f64>,
    pub displacements: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub field: FieldState,
    /// Per-node max `|u|` over the last source period up to `t`.
    pub envelope: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn envelope_at(&self, idx: NodeIndex) -> Option<f64> {
        let off = self.field.window.offset(idx.m, idx.n)?;
        self.envelope.get(idx.sub.index()).map(|a| a[off])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub window: Window,
    pub steps: usize,
    pub probes: Vec<ProbeRecord>,
    pub snapshots: Vec<Snapshot>,
}

/// Reach (in index rings) needed on each axis so that nothing travelling at
/// the fastest group velocity meets the edge before `t_end`.
pub fn required_reach(spec: &LatticeSpec, t_end: f64) -> [i64; 2] {
    let v = max_index_speed(spec);
    let r = |s: f64| (s * t_end).ceil() as i64 + WINDOW_MARGIN;
    if spec.family.is_1d() {
        [r(v[0]), 0]
    } else {
        [r(v[0]), r(v[1])]
    }
}

/// Resolves the window for a run.
pub fn resolve_window(spec: &LatticeSpec, source: &SourceSpec, config: &SimConfig) -> Result<Window> {
    let (m0, n0) = (source.node.m, source.node.n);
    let around = |rm: i64, rn: i64| {
        let rn = if spec.family.is_1d() { 0 } else { rn };
        Window::new(m0 - rm, m0 + rm, n0 - rn, n0 + rn)
    };
    let need = required_reach(spec, config.t_end);
    match config.window {
        WindowSpec::Auto => Ok(around(need[0], need[1])),
        WindowSpec::ProbeSafe => {
            let v = max_index_speed(spec);
            let mut reach = [0i64; 2];
            for (axis, r) in reach.iter_mut().enumerate() {
                let d = config
                    .probes
                    .iter()
                    .map(|p| if axis == 0 { (p.m - m0).abs() } else { (p.n - n0).abs() })
                    .max()
                    .unwrap_or(0);
                *r = ((v[axis] * config.t_end + d as f64) / 2.0).ceil() as i64 + WINDOW_MARGIN;
                *r = (*r).max(d + WINDOW_MARGIN);
            }
            Ok(around(reach[0], reach[1]))
        }
        WindowSpec::Explicit(w) => {
            if !w.is_valid() {
                return Err(LatticeError::InvalidConfig(format!("empty window {w:?}")));
            }
            if config.boundary == Boundary::Fixed && !config.allow_small_window {
                let avail = [(m0 - w.m_lo).min(w.m_hi - m0), (n0 - w.n_lo).min(w.n_hi - n0)];
                let axes = if spec.family.is_1d() { 1 } else { 2 };
                for a in 0..axes {
                    if avail[a] < need[a] {
                        return Err(LatticeError::WindowTooSmall {
                            axis: if a == 0 { 'm' } else { 'n' },
                            available: avail[a],
                            required: need[a],
                            t_end: config.t_end,
                        });
                    }
                }
            }
            Ok(w)
        }
    }
}

/// Position of a node inside the padded arrays.
fn padded_pos(window: &Window, stride: usize, idx: NodeIndex) -> Option<(usize, usize)> {
    window.contains(idx.m, idx.n).then(|| {
        let i = (idx.m - window.m_lo) as usize;
        let j = (idx.n - window.n_lo) as usize;
        (idx.sub.index(), (j + 1) * stride + i + 1)
    })
}

/// Leapfrog state machine over one window.
pub struct Stepper {
    spec: LatticeSpec,
    stencil: Stencil,
    window: Window,
    boundary: Boundary,
    dt: f64,
    t0: f64,
    step: usize,
    cur: PaddedField,
    prev: PaddedField,
    source: Option<(SourceSpec, usize, usize)>,
    pool: Option<rayon::ThreadPool>,
}

impl Stepper {
    /// Zero initial conditions.
    pub fn new(spec: &LatticeSpec, window: Window, boundary: Boundary, dt: f64) -> Result<Self> {
        spec.validate()?;
        if !window.is_valid() {
            return Err(LatticeError::InvalidConfig(format!("empty window {window:?}")));
        }
        if !(dt > 0.0 && dt <= MAX_DT) {
            return Err(LatticeError::InvalidConfig(format!("dt must lie in (0, {MAX_DT}], got {dt}")));
        }
        if spec.family.is_1d() && window.height() != 1 {
            return Err(LatticeError::InvalidConfig("1D windows must have a single row".into()));
        }
        let subs = spec.family.sublattices();
        let cur = PaddedField::zeros(&window, subs);
        let stencil = Stencil::new(spec, cur.stride);
        Ok(Stepper {
            spec: *spec,
            stencil,
            window,
            boundary,
            dt,
            t0: 0.0,
            step: 0,
            prev: cur.clone(),
            cur,
            source: None,
            pool: None,
        })
    }

    /// Starts from displacement `u0` and velocity `v0` at `state.t`.
    pub fn from_state(spec: &LatticeSpec, state: &FieldState, dt: f64) -> Result<Self> {
        let mut s = Stepper::new(spec, state.window, state.boundary, dt)?;
        if state.displacement.len() != s.cur.data.len() {
            return Err(LatticeError::InvalidConfig("field has the wrong number of sublattices".into()));
        }
        s.cur = PaddedField::from_arrays(&state.window, &state.displacement);
        s.refresh_halo_cur();
        let acc = s.acceleration();
        // second-order start: u[-1] = u0 - dt v0 + dt^2/2 a0
        let mut prev = vec![vec![0.0; state.window.cells()]; state.displacement.len()];
        for (p, ((u, v), a)) in prev.iter_mut().zip(state.displacement.iter().zip(&state.velocity).zip(&acc)) {
            for (((p, &u), &v), &a) in p.iter_mut().zip(u).zip(v).zip(a) {
                *p = u - dt * v + 0.5 * dt * dt * a;
            }
        }
        s.prev = PaddedField::from_arrays(&state.window, &prev);
        s.refresh_halo_prev();
        s.t0 = state.t;
        Ok(s)
    }

    pub fn with_source(mut self, source: SourceSpec) -> Result<Self> {
        source.validate(&self.spec)?;
        let (sub, pos) = padded_pos(&self.window, self.cur.stride, source.node)
            .ok_or_else(|| LatticeError::InvalidConfig(format!("source node {:?} outside window", source.node)))?;
        self.source = Some((source, sub, pos));
        Ok(self)
    }

    pub fn with_workers(mut self, workers: usize) -> Result<Self> {
        self.pool = if workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| LatticeError::InvalidConfig(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(self)
    }

    pub fn time(&self) -> f64 {
        self.t0 + self.step as f64 * self.dt
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn window(&self) -> Window {
        self.window
    }

    fn refresh_halo_cur(&mut self) {
        if self.boundary == Boundary::Periodic {
            self.cur.refresh_periodic_halo();
        }
    }

    fn refresh_halo_prev(&mut self) {
        if self.boundary == Boundary::Periodic {
            self.prev.refresh_periodic_halo();
        }
    }

    /// Displacement at a node at the current time.
    pub fn displacement(&self, idx: NodeIndex) -> Option<f64> {
        padded_pos(&self.window, self.cur.stride, idx).map(|(s, p)| self.cur.data[s][p])
    }

    /// Interior displacements, one array per sublattice.
    pub fn displacements(&self) -> Vec<Vec<f64>> {
        (0..self.cur.data.len()).map(|s| self.cur.interior(s)).collect()
    }

    /// Bond accelerations (no source term) at the current time.
    pub fn acceleration(&self) -> Vec<Vec<f64>> {
        let inv_m = 1.0 / self.spec.mass;
        let nm = self.cur.nm;
        (0..self.cur.data.len())
            .map(|s| {
                let mut out = vec![0.0; self.window.cells()];
                for (j, row) in out.chunks_mut(nm).enumerate() {
                    self.stencil.force_row(&self.cur, s, j, row);
                    row.iter_mut().for_each(|a| *a *= inv_m);
                }
                out
            })
            .collect()
    }

    fn source_acceleration(&self, t: f64) -> Option<(usize, usize, f64)> {
        match self.source {
            Some((src, sub, pos)) if src.kind == SourceKind::Force => Some((sub, pos, src.value(t))),
            _ => None,
        }
    }

    /// Current state with the velocity reconstructed to second order.
    pub fn state(&self) -> FieldState {
        let t = self.time();
        let dt = self.dt;
        let mut acc = self.acceleration();
        if let Some((sub, pos, f)) = self.source_acceleration(t) {
            let (i, j) = ((pos % self.cur.stride) - 1, pos / self.cur.stride - 1);
            acc[sub][j * self.cur.nm + i] += f / self.spec.mass;
        }
        let displacement = self.displacements();
        let velocity = (0..displacement.len())
            .map(|s| {
                let prev = self.prev.interior(s);
                displacement[s]
                    .iter()
                    .zip(&prev)
                    .zip(&acc[s])
                    .map(|((&u, &p), &a)| (u - p) / dt + 0.5 * dt * a)
                    .collect()
            })
            .collect();
        FieldState { window: self.window, boundary: self.boundary, t, displacement, velocity }
    }

    /// Energy conserved exactly by the scheme (source-free, fixed or periodic
    /// edges): kinetic part from the last difference quotient, potential part
    /// the bilinear form between the last two levels.
    pub fn conserved_energy(&self) -> f64 {
        let m = self.spec.mass;
        let dt = self.dt;
        let mut kinetic = 0.0;
        let mut cross = 0.0;
        let nm = self.cur.nm;
        let mut f = vec![0.0; nm];
        for s in 0..self.cur.data.len() {
            for j in 0..self.cur.nn {
                // force from the previous level, paired with the current one
                self.stencil.force_row(&self.prev, s, j, &mut f);
                let cur = self.cur.row(s, j);
                let prev = self.prev.row(s, j);
                for i in 0..nm {
                    let v = (cur[i] - prev[i]) / dt;
                    kinetic += v * v;
                    cross += cur[i] * f[i];
                }
            }
        }
        0.5 * m * kinetic - 0.5 * cross
    }

    /// Advances one step.
    pub fn advance(&mut self) {
        let t = self.time();
        let dt2_m = self.dt * self.dt / self.spec.mass;
        let force = self.source_acceleration(t);
        let stride = self.cur.stride;
        let (nm, nn) = (self.cur.nm, self.cur.nn);
        let cur = &self.cur;
        let stencil = &self.stencil;
        for (s, prev) in self.prev.data.iter_mut().enumerate() {
            let rows = &mut prev[stride..(nn + 1) * stride];
            let kernel = |j: usize, row: &mut [f64], f: &mut Vec<f64>| match force {
                Some((fs, fpos, fv)) if fs == s && fpos / stride == j + 1 => {
                    stencil.force_row(cur, s, j, f);
                    f[fpos % stride - 1] += fv;
                    let u = cur.row(s, j);
                    for ((p, &u), &f) in row[1..=nm].iter_mut().zip(u).zip(f.iter()) {
                        *p = 2.0 * u - *p + dt2_m * f;
                    }
                }
                _ => stencil.leapfrog_row(cur, s, j, row, dt2_m),
            };
            match &self.pool {
                None => {
                    let mut f = vec![0.0; nm];
                    for (j, row) in rows.chunks_mut(stride).enumerate() {
                        kernel(j, row, &mut f);
                    }
                }
                Some(pool) => pool.install(|| {
                    rows.par_chunks_mut(stride)
                        .enumerate()
                        .for_each_init(|| vec![0.0; nm], |f, (j, row)| kernel(j, row, f));
                }),
            }
        }
        self.step += 1;
        if let Some((src, sub, pos)) = self.source {
            if src.kind == SourceKind::Kinematic {
                self.prev.data[sub][pos] = src.value(self.time());
            }
        }
        mem::swap(&mut self.cur, &mut self.prev);
        self.refresh_halo_cur();
    }
}

struct EnvelopeTracker {
    snapshot: usize,
    max: Vec<Vec<f64>>,
}

/// Runs a driven simulation from rest.
pub fn simulate(spec: &LatticeSpec, source: &SourceSpec, config: &SimConfig) -> Result<SimOutput> {
    spec.validate()?;
    source.validate(spec)?;
    config.validate()?;
    let window = resolve_window(spec, source, config)?;
    for p in &config.probes {
        spec.check_index(*p)?;
        if !window.contains(p.m, p.n) {
            return Err(LatticeError::InvalidConfig(format!("probe {p:?} outside window {window:?}")));
        }
    }
    let mut stepper = Stepper::new(spec, window, config.boundary, config.dt)?
        .with_source(*source)?
        .with_workers(config.workers)?;
    let steps = config.steps();
    let dt = config.dt;

    // snapshot times snapped to the step grid
    let mut snap_steps: Vec<(usize, usize)> = config
        .snapshot_times
        .iter()
        .enumerate()
        .map(|(i, &t)| (((t / dt).round() as usize).min(steps), i))
        .collect();
    snap_steps.sort();
    let period = source.period();
    let subs = spec.family.sublattices();
    let mut trackers: Vec<EnvelopeTracker> = Vec::new();
    let mut pending = snap_steps.iter().peekable();
    let mut snapshots: Vec<Option<Snapshot>> = vec![None; config.snapshot_times.len()];

    let probe_pos: Vec<_> = config.probes.iter().map(|p| padded_pos(&window, stepper.cur.stride, *p).unwrap()).collect();
    let samples = steps / config.probe_stride + 1;
    let mut probes: Vec<ProbeRecord> = config
        .probes
        .iter()
        .map(|&node| ProbeRecord {
            node,
            times: Vec::with_capacity(samples),
            displacements: Vec::with_capacity(samples),
        })
        .collect();

    let record = |stepper: &Stepper, probes: &mut Vec<ProbeRecord>| {
        let t = stepper.time();
        for (rec, &(s, p)) in probes.iter_mut().zip(&probe_pos) {
            rec.times.push(t);
            rec.displacements.push(stepper.cur.data[s][p]);
        }
    };

    let mut n = 0usize;
    loop {
        let t = stepper.time();
        if n % config.probe_stride == 0 {
            record(&stepper, &mut probes);
        }
        // open envelope trackers whose final period has started
        for &(sstep, idx) in snap_steps.iter() {
            let ts = sstep as f64 * dt;
            let start = (ts - period).max(0.0);
            if n == ((start / dt).ceil() as usize).min(sstep) && !trackers.iter().any(|tr| tr.snapshot == idx) {
                trackers.push(EnvelopeTracker { snapshot: idx, max: vec![vec![0.0; window.cells()]; subs] });
            }
        }
        for tr in &mut trackers {
            for (s, acc) in tr.max.iter_mut().enumerate() {
                for j in 0..stepper.cur.nn {
                    let row = stepper.cur.row(s, j);
                    let dst = &mut acc[j * stepper.cur.nm..(j + 1) * stepper.cur.nm];
                    for (d, &u) in dst.iter_mut().zip(row) {
                        *d = d.max(u.abs());
                    }
                }
            }
        }
        while let Some(&&(sstep, idx)) = pending.peek() {
            if sstep != n {
                break;
            }
            pending.next();
            let pos = trackers.iter().position(|tr| tr.snapshot == idx).expect("tracker opened before snapshot");
            let tr = trackers.swap_remove(pos);
            snapshots[idx] = Some(Snapshot { t, field: stepper.state(), envelope: tr.max });
        }
        if n == steps {
            break;
        }
        stepper.advance();
        n += 1;
        if n % 4096 == 0 && !stepper.cur.data.iter().all(|a| a.iter().all(|v| v.is_finite())) {
            return Err(LatticeError::Numerical(format!("non-finite displacement at t = {}", stepper.time())));
        }
    }
    if probes.iter().any(|p| p.displacements.iter().any(|v| !v.is_finite())) {
        return Err(LatticeError::Numerical("non-finite probe value".into()));
    }
    Ok(SimOutput {
        window,
        steps,
        probes,
        snapshots: snapshots.into_iter().map(|s| s.expect("every snapshot step is visited")).collect(),
    })
}

/// One step from a full state (displacement and velocity). Equivalent to
/// velocity Verlet; the source clock is the state's time.
pub fn step(spec: &LatticeSpec, state: &FieldState, source: Option<&SourceSpec>, dt: f64) -> Result<FieldState> {
    let mut stepper = Stepper::from_state(spec, state, dt)?;
    if let Some(src) = source {
        stepper = stepper.with_source(*src)?;
    }
    stepper.advance();
    Ok(stepper.state())
}

/// Kinetic plus spring energy of a state.
pub fn energy(spec: &LatticeSpec, state: &FieldState) -> f64 {
    let acc = crate::lattice::acceleration(spec, state);
    let m = spec.mass;
    let mut e = 0.0;
    for s in 0..state.sublattices() {
        for ((&u, &v), &a) in state.displacement[s].iter().zip(&state.velocity[s]).zip(&acc[s]) {
            e += 0.5 * m * v * v - 0.5 * m * u * a;
        }
    }
    e
}

/// Node of sublattice `sub` at `(m, n)`; convenience for probe lists.
pub fn node(m: i64, n: i64, sub: Sublattice) -> NodeIndex {
    NodeIndex { m, n, sub }
}
