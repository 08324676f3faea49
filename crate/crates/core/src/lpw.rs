//! Localized primitive waveforms: standing waves confined to a narrow band
//! of nodes along a lattice line, everything off the band exactly at rest.
//!
//! Patterns are stored on a periodic `period x period` cell torus so that the
//! line is effectively infinite; `period` is a multiple of 6, which every
//! pattern below is compatible with.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6, PI};
use std::str::FromStr;

use crate::error::{LatticeError, Result};
use crate::lattice::{acceleration, Boundary, Family, FieldState, LatticeSpec, NodeIndex, Window};
use crate::transient::Stepper;

/// Default torus size.
pub const LPW_PERIOD: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpwMode {
    /// The single waveform of one-branch lattices.
    Primary,
    /// Hexagonal lattice, in-phase pairs (`omega = sqrt2`).
    I,
    /// Hexagonal lattice, anti-phase pairs (`omega = 2`).
    II,
    /// Hexagonal lattice, `u` at rest, `v` period-3 (`omega = sqrt3`). Not line-localized.
    Conical,
    /// Hexagonal lattice, `u = -v` everywhere (`omega = sqrt6`). Not line-localized.
    BandEdgeForm,
}

impl LpwMode {
    pub fn name(self) -> &'static str {
        match self {
            LpwMode::Primary => "primary",
            LpwMode::I => "I",
            LpwMode::II => "II",
            LpwMode::Conical => "conical",
            LpwMode::BandEdgeForm => "band-edge",
        }
    }
}

impl FromStr for LpwMode {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "primary" => Ok(LpwMode::Primary),
            "I" | "i" | "1" => Ok(LpwMode::I),
            "II" | "ii" | "2" => Ok(LpwMode::II),
            "cp" | "conical" => Ok(LpwMode::Conical),
            "band-edge" | "bandedge" => Ok(LpwMode::BandEdgeForm),
            other => Err(LatticeError::InvalidSpec(format!("unknown LPW mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpwPattern {
    pub spec: LatticeSpec,
    pub mode: LpwMode,
    /// Index into [`lpw_orientations`].
    pub orientation: usize,
    /// Physical direction of the carrying line (radians, `[0, pi)`); `None`
    /// for the hexagonal oscillation forms that are not line-localized.
    pub line_angle: Option<f64>,
    pub frequency: f64,
    /// Torus size in cells along both index axes.
    pub period: usize,
    /// Nonzero amplitudes (`+1`/`-1`), indices in `[0, period)`.
    pub amplitudes: Vec<(NodeIndex, f64)>,
}

impl LpwPattern {
    pub fn window(&self) -> Window {
        let p = self.period as i64 - 1;
        if self.spec.family.is_1d() {
            Window::new(0, p, 0, 0)
        } else {
            Window::new(0, p, 0, p)
        }
    }

    /// The pattern as a displacement field on its torus, at rest.
    pub fn field(&self) -> FieldState {
        let mut f = FieldState::zeros(&self.spec, self.window(), Boundary::Periodic);
        for &(idx, a) in &self.amplitudes {
            f.set(idx, a).expect("pattern nodes lie on the torus");
        }
        f
    }
}

/// Number of admissible orientations for a lattice (0 when it has none).
pub fn lpw_orientations(spec: &LatticeSpec) -> usize {
    match spec.family {
        Family::Rcl if spec.gx == spec.gy => 2,
        Family::Hcl | Family::Etl => 3,
        Family::Rtl => 1,
        _ => 0,
    }
}

fn wrap(i: i64, p: usize) -> i64 {
    i.rem_euclid(p as i64)
}

/// Builds the waveform along `orientation` for `mode`.
pub fn construct_lpw(spec: &LatticeSpec, orientation: usize, mode: LpwMode) -> Result<LpwPattern> {
    spec.validate()?;
    let p = LPW_PERIOD;
    let alt = |j: i64| if j.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let line = |dm: i64, dn: i64| -> Vec<(NodeIndex, f64)> {
        (0..p as i64).map(|j| (NodeIndex::u(wrap(j * dm, p), wrap(j * dn, p)), alt(j))).collect()
    };
    let no_lpw = |why: String| Err(LatticeError::NoLpw(why));
    let count = lpw_orientations(spec);
    if count == 0 {
        return no_lpw(match spec.family {
            Family::Msl1d => "the chain has no interior resonance".into(),
            _ => format!("rectangular lattice with gx = {} != gy = {}", spec.gx, spec.gy),
        });
    }
    let hcl_form = matches!(mode, LpwMode::Conical | LpwMode::BandEdgeForm);
    let hcl_mode = matches!(mode, LpwMode::I | LpwMode::II) || hcl_form;
    if (spec.family == Family::Hcl) != hcl_mode {
        return no_lpw(format!("mode {mode:?} does not apply to the {} lattice", spec.family));
    }
    if orientation >= count && !hcl_form {
        return no_lpw(format!("{} has {count} LPW orientations, got index {orientation}", spec.family));
    }
    let m = spec.mass;
    let (amplitudes, frequency, line_angle) = match spec.family {
        Family::Rcl => {
            let w = (4.0 * spec.gx / m).sqrt();
            if orientation == 0 {
                (line(1, 1), w, spec.l.atan())
            } else {
                (line(1, -1), w, PI - spec.l.atan())
            }
        }
        Family::Etl => {
            let w = (8.0 / m).sqrt();
            match orientation {
                0 => (line(1, 0), w, 0.0),
                1 => (line(0, 1), w, PI / 3.0),
                _ => (line(1, -1), w, 2.0 * PI / 3.0),
            }
        }
        Family::Rtl => (line(1, 1), 2.0 * ((1.0 + spec.gamma) / m).sqrt(), FRAC_PI_4),
        Family::Hcl => return Ok(hcl_pattern(spec, orientation, mode)),
        Family::Msl1d => unreachable!(),
    };
    Ok(LpwPattern { spec: *spec, mode, orientation, line_angle: Some(line_angle), frequency, period: p, amplitudes })
}

fn hcl_pattern(spec: &LatticeSpec, orientation: usize, mode: LpwMode) -> LpwPattern {
    let p = LPW_PERIOD;
    let m = spec.mass;
    let mut amplitudes = Vec::new();
    let (frequency, line_angle) = match mode {
        LpwMode::Conical => {
            let f = [1.0, -1.0, 0.0];
            for a in 0..p as i64 {
                for b in 0..p as i64 {
                    let v = f[(a - b).rem_euclid(3) as usize];
                    if v != 0.0 {
                        amplitudes.push((NodeIndex::v(a, b), v));
                    }
                }
            }
            ((3.0 / m).sqrt(), None)
        }
        LpwMode::BandEdgeForm => {
            for a in 0..p as i64 {
                for b in 0..p as i64 {
                    amplitudes.push((NodeIndex::u(a, b), 1.0));
                    amplitudes.push((NodeIndex::v(a, b), -1.0));
                }
            }
            ((6.0 / m).sqrt(), None)
        }
        _ => {
            // pair (u_c, v_{c + dv}) marched along `step`
            let (dv, step, angle) = match orientation {
                0 => ((0, 0), (-1, 1), FRAC_PI_2),
                1 => ((0, -1), (1, 0), PI - FRAC_PI_6),
                _ => ((-1, 0), (0, -1), FRAC_PI_6),
            };
            let v_sign = if mode == LpwMode::I { 1.0 } else { -1.0 };
            for j in 0..p as i64 {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                let (cm, cn) = (j * step.0, j * step.1);
                amplitudes.push((NodeIndex::u(wrap(cm, p), wrap(cn, p)), s));
                amplitudes.push((NodeIndex::v(wrap(cm + dv.0, p), wrap(cn + dv.1, p)), v_sign * s));
            }
            let w2 = if mode == LpwMode::I { 2.0 } else { 4.0 };
            ((w2 / m).sqrt(), Some(angle))
        }
    };
    LpwPattern { spec: *spec, mode, orientation, line_angle, frequency, period: p, amplitudes }
}

/// `max |a + omega^2 u|` over the torus with `u` the pattern and `a` its bond
/// acceleration; exact waveforms give zero up to rounding. `omega` defaults
/// to the pattern frequency.
pub fn verify_lpw(spec: &LatticeSpec, pattern: &LpwPattern, omega: Option<f64>) -> f64 {
    let w = omega.unwrap_or(pattern.frequency);
    let field = pattern.field();
    let acc = acceleration(spec, &field);
    acc.iter()
        .zip(&field.displacement)
        .flat_map(|(a, u)| a.iter().zip(u).map(|(a, u)| (a + w * w * u).abs()))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpwEvolution {
    /// Largest `|u|` reached by any node that starts at rest.
    pub zero_node_drift: f64,
    /// Frequency measured from zero crossings of a `+1` node.
    pub frequency_estimate: f64,
    /// `|2 pi / estimate - 2 pi / omega| / (2 pi / omega)`.
    pub period_error: f64,
}

/// Releases the pattern from rest and integrates `steps` steps of size `dt`.
pub fn lpw_time_evolution_check(spec: &LatticeSpec, pattern: &LpwPattern, steps: usize, dt: f64) -> Result<LpwEvolution> {
    let field = pattern.field();
    let zero_nodes: Vec<NodeIndex> = field.nodes().filter(|(_, u)| *u == 0.0).map(|(i, _)| i).collect();
    let probe = pattern
        .amplitudes
        .iter()
        .find(|(_, a)| *a > 0.0)
        .map(|(i, _)| *i)
        .ok_or_else(|| LatticeError::InvalidInput("pattern has no +1 node".into()))?;
    let mut stepper = Stepper::from_state(spec, &field, dt)?;
    let mut drift = 0.0f64;
    let mut crossings = Vec::new();
    let mut last = stepper.displacement(probe).expect("probe on torus");
    for _ in 0..steps {
        let t_prev = stepper.time();
        stepper.advance();
        let u = stepper.displacement(probe).expect("probe on torus");
        if (last > 0.0) != (u > 0.0) {
            crossings.push(t_prev + dt * last / (last - u));
        }
        last = u;
        for z in &zero_nodes {
            drift = drift.max(stepper.displacement(*z).expect("node on torus").abs());
        }
    }
    if crossings.len() < 3 {
        return Err(LatticeError::InvalidInput(format!(
            "only {} zero crossings in {steps} steps; run longer",
            crossings.len()
        )));
    }
    let half_periods = (crossings.len() - 1) as f64;
    let period = 2.0 * (crossings[crossings.len() - 1] - crossings[0]) / half_periods;
    let exact = 2.0 * PI / pattern.frequency;
    Ok(LpwEvolution {
        zero_node_drift: drift,
        frequency_estimate: 2.0 * PI / period,
        period_error: (period - exact).abs() / exact,
    })
}

/// Every waveform of a lattice: all orientations, and for the hexagonal
/// lattice both modes plus the two oscillation forms.
pub fn lpw_catalog(spec: &LatticeSpec) -> Vec<LpwPattern> {
    let modes: &[LpwMode] = if spec.family == Family::Hcl { &[LpwMode::I, LpwMode::II] } else { &[LpwMode::Primary] };
    let mut out = Vec::new();
    for &mode in modes {
        for o in 0..lpw_orientations(spec) {
            out.extend(construct_lpw(spec, o, mode));
        }
    }
    if spec.family == Family::Hcl {
        out.extend(construct_lpw(spec, 0, LpwMode::Conical));
        out.extend(construct_lpw(spec, 0, LpwMode::BandEdgeForm));
    }
    out
}
