//! Textual run configuration: `key = value` lines, `#` comments.

use std::fmt::Write as _;
use std::str::FromStr;

use latwave_core::{AngleFrame, Boundary, Branch, Family, LatticeSpec, NodeIndex, SourceKind, SourceSpec, Sublattice, Window, WindowSpec};
use latwave_core::transient::SimConfig;
use thiserror::Error;

/// Lattice names accepted by the front end; `scl` and `srcl` are the square
/// and simplified rectangular members of the rectangular family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeName {
    Msl1d,
    Scl,
    Srcl,
    Rcl,
    Hcl,
    Etl,
    Rtl,
}

impl LatticeName {
    pub fn name(self) -> &'static str {
        match self {
            LatticeName::Msl1d => "msl1d",
            LatticeName::Scl => "scl",
            LatticeName::Srcl => "srcl",
            LatticeName::Rcl => "rcl",
            LatticeName::Hcl => "hcl",
            LatticeName::Etl => "etl",
            LatticeName::Rtl => "rtl",
        }
    }
}

impl FromStr for LatticeName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "scl" => LatticeName::Scl,
            "srcl" => LatticeName::Srcl,
            other => match Family::from_str(other).map_err(|e| e.to_string())? {
                Family::Msl1d => LatticeName::Msl1d,
                Family::Rcl => LatticeName::Rcl,
                Family::Hcl => LatticeName::Hcl,
                Family::Etl => LatticeName::Etl,
                Family::Rtl => LatticeName::Rtl,
            },
        })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown configuration key '{0}'")]
    UnknownKey(String),
    #[error("bad value for '{key}': {reason}")]
    BadValue { key: String, reason: String },
    #[error("line {line}: expected 'key = value', got '{text}'")]
    Syntax { line: usize, text: String },
    #[error("missing required key '{0}'")]
    Missing(&'static str),
}

/// Every key, in manifest order.
pub const KEYS: &[&str] = &[
    "family",
    "l",
    "gx",
    "gy",
    "gamma",
    "mass",
    "branch",
    "res",
    "omega",
    "frame",
    "source",
    "omega0",
    "amplitude",
    "source_node",
    "dt",
    "t_end",
    "window",
    "boundary",
    "probes",
    "snapshots",
    "probe_stride",
    "allow_small_window",
    "workers",
    "lpw_steps",
    "threshold",
    "min_radius",
    "t_from",
    "t_to",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub family: Option<LatticeName>,
    pub l: f64,
    /// Rectangular lattice stiffnesses; unset means `gx = 1` and `gy = 1/l`
    /// for `rcl`, `gy = gx` for `scl`/`srcl`. `gx` is also the chain stiffness.
    pub gx: Option<f64>,
    pub gy: Option<f64>,
    pub gamma: f64,
    pub mass: f64,
    pub branch: Option<Branch>,
    pub res: usize,
    pub omega: Option<f64>,
    pub frame: AngleFrame,
    pub source: SourceKind,
    pub omega0: Option<f64>,
    pub amplitude: f64,
    pub source_node: NodeIndex,
    pub dt: f64,
    pub t_end: Option<f64>,
    pub window: WindowSpec,
    pub boundary: Boundary,
    pub probes: Vec<NodeIndex>,
    pub snapshots: Vec<f64>,
    pub probe_stride: usize,
    pub allow_small_window: bool,
    pub workers: usize,
    pub lpw_steps: usize,
    pub threshold: f64,
    pub min_radius: f64,
    pub t_from: Option<f64>,
    pub t_to: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            family: None,
            l: 1.0,
            gx: None,
            gy: None,
            gamma: 1.0,
            mass: 1.0,
            branch: None,
            res: 64,
            omega: None,
            frame: AngleFrame::Physical,
            source: SourceKind::Kinematic,
            omega0: None,
            amplitude: 1.0,
            source_node: NodeIndex::ORIGIN,
            dt: 0.01,
            t_end: None,
            window: WindowSpec::Auto,
            boundary: Boundary::Fixed,
            probes: Vec::new(),
            snapshots: Vec::new(),
            probe_stride: 1,
            allow_small_window: false,
            workers: 1,
            lpw_steps: 10_000,
            threshold: 0.1,
            min_radius: 10.0,
            t_from: None,
            t_to: None,
        }
    }
}

fn bad(key: &str, reason: impl ToString) -> ConfigError {
    ConfigError::BadValue { key: key.to_string(), reason: reason.to_string() }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: ToString,
{
    v.parse::<T>().map_err(|e| bad(key, e))
}

fn node(key: &str, v: &str) -> Result<NodeIndex, ConfigError> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if !(2..=3).contains(&parts.len()) {
        return Err(bad(key, format!("expected 'm,n' or 'm,n,sub', got '{v}'")));
    }
    let sub = match parts.get(2) {
        Some(s) => Sublattice::from_str(s).map_err(|e| bad(key, e))?,
        None => Sublattice::U,
    };
    Ok(NodeIndex { m: num(key, parts[0])?, n: num(key, parts[1])?, sub })
}

fn list<T>(key: &str, v: &str, f: impl Fn(&str, &str) -> Result<T, ConfigError>) -> Result<Vec<T>, ConfigError> {
    v.split(';').map(str::trim).filter(|s| !s.is_empty()).map(|s| f(key, s)).collect()
}

fn opt(v: &str) -> Option<&str> {
    match v {
        "" | "none" => None,
        s => Some(s),
    }
}

fn fmt_node(n: NodeIndex) -> String {
    format!("{},{},{}", n.m, n.n, n.sub.name())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x:?}"))
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "family" => self.family = opt(v).map(|s| LatticeName::from_str(s).map_err(|e| bad(key, e))).transpose()?,
            "l" => self.l = num(key, v)?,
            "gx" => self.gx = opt(v).map(|s| num(key, s)).transpose()?,
            "gy" => self.gy = opt(v).map(|s| num(key, s)).transpose()?,
            "gamma" => self.gamma = num(key, v)?,
            "mass" => self.mass = num(key, v)?,
            "branch" => self.branch = opt(v).map(|s| Branch::from_str(s).map_err(|e| bad(key, e))).transpose()?,
            "res" => {
                self.res = num(key, v)?;
                if self.res == 0 {
                    return Err(bad(key, "resolution must be at least 1"));
                }
            }
            "omega" => self.omega = opt(v).map(|s| num(key, s)).transpose()?,
            "frame" => self.frame = AngleFrame::from_str(v).map_err(|e| bad(key, e))?,
            "source" => self.source = SourceKind::from_str(v).map_err(|e| bad(key, e))?,
            "omega0" => self.omega0 = opt(v).map(|s| num(key, s)).transpose()?,
            "amplitude" => self.amplitude = num(key, v)?,
            "source_node" => self.source_node = node(key, v)?,
            "dt" => self.dt = num(key, v)?,
            "t_end" => self.t_end = opt(v).map(|s| num(key, s)).transpose()?,
            "window" => {
                self.window = match v {
                    "auto" => WindowSpec::Auto,
                    "probe-safe" => WindowSpec::ProbeSafe,
                    s => {
                        let p: Vec<&str> = s.split(':').collect();
                        if p.len() != 4 {
                            return Err(bad(key, "expected auto, probe-safe or m_lo:m_hi:n_lo:n_hi"));
                        }
                        WindowSpec::Explicit(Window::new(num(key, p[0])?, num(key, p[1])?, num(key, p[2])?, num(key, p[3])?))
                    }
                }
            }
            "boundary" => {
                self.boundary = match v {
                    "fixed" => Boundary::Fixed,
                    "periodic" => Boundary::Periodic,
                    _ => return Err(bad(key, "expected fixed or periodic")),
                }
            }
            "probes" => self.probes = list(key, v, node)?,
            "snapshots" => self.snapshots = list(key, v, |k, s| num(k, s))?,
            "probe_stride" => self.probe_stride = num(key, v)?,
            "allow_small_window" => self.allow_small_window = num(key, v)?,
            "workers" => self.workers = num(key, v)?,
            "lpw_steps" => self.lpw_steps = num(key, v)?,
            "threshold" => self.threshold = num(key, v)?,
            "min_radius" => self.min_radius = num(key, v)?,
            "t_from" => self.t_from = opt(v).map(|s| num(key, s)).transpose()?,
            "t_to" => self.t_to = opt(v).map(|s| num(key, s)).transpose()?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.to_string() })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    fn value(&self, key: &str) -> String {
        match key {
            "family" => self.family.map_or_else(|| "none".into(), |f| f.name().into()),
            "l" => format!("{:?}", self.l),
            "gx" => fmt_opt(self.gx),
            "gy" => fmt_opt(self.gy),
            "gamma" => format!("{:?}", self.gamma),
            "mass" => format!("{:?}", self.mass),
            "branch" => self.branch.map_or_else(|| "none".into(), |b| b.name().into()),
            "res" => self.res.to_string(),
            "omega" => fmt_opt(self.omega),
            "frame" => self.frame.name().into(),
            "source" => self.source.name().into(),
            "omega0" => fmt_opt(self.omega0),
            "amplitude" => format!("{:?}", self.amplitude),
            "source_node" => fmt_node(self.source_node),
            "dt" => format!("{:?}", self.dt),
            "t_end" => fmt_opt(self.t_end),
            "window" => match self.window {
                WindowSpec::Auto => "auto".into(),
                WindowSpec::ProbeSafe => "probe-safe".into(),
                WindowSpec::Explicit(w) => format!("{}:{}:{}:{}", w.m_lo, w.m_hi, w.n_lo, w.n_hi),
            },
            "boundary" => match self.boundary {
                Boundary::Fixed => "fixed".into(),
                Boundary::Periodic => "periodic".into(),
            },
            "probes" => self.probes.iter().map(|p| fmt_node(*p)).collect::<Vec<_>>().join(";"),
            "snapshots" => self.snapshots.iter().map(|t| format!("{t:?}")).collect::<Vec<_>>().join(";"),
            "probe_stride" => self.probe_stride.to_string(),
            "allow_small_window" => self.allow_small_window.to_string(),
            "workers" => self.workers.to_string(),
            "lpw_steps" => self.lpw_steps.to_string(),
            "threshold" => format!("{:?}", self.threshold),
            "min_radius" => format!("{:?}", self.min_radius),
            "t_from" => fmt_opt(self.t_from),
            "t_to" => fmt_opt(self.t_to),
            _ => unreachable!("key list and value() out of sync"),
        }
    }

    /// All keys as `key = value` lines; floats use the shortest exact form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for k in KEYS {
            let _ = writeln!(s, "{k} = {}", self.value(k));
        }
        s
    }

    pub fn lattice(&self) -> Result<LatticeSpec, ConfigError> {
        let family = self.family.ok_or(ConfigError::Missing("family"))?;
        let g = self.gx.unwrap_or(1.0);
        let spec = match family {
            LatticeName::Msl1d => LatticeSpec { gx: g, ..LatticeSpec::msl1d() },
            LatticeName::Scl | LatticeName::Srcl => {
                if self.gy.is_some_and(|gy| gy != g) {
                    return Err(bad("gy", format!("{} needs gy = gx", family.name())));
                }
                let l = if family == LatticeName::Scl { 1.0 } else { self.l };
                if family == LatticeName::Scl && self.l != 1.0 {
                    return Err(bad("l", "scl has l = 1; use srcl or rcl"));
                }
                LatticeSpec::rcl_with(l, g, g)
            }
            LatticeName::Rcl => LatticeSpec::rcl_with(self.l, g, self.gy.unwrap_or(1.0 / self.l)),
            LatticeName::Hcl => LatticeSpec::hcl(),
            LatticeName::Etl => LatticeSpec::etl(),
            LatticeName::Rtl => LatticeSpec::rtl(self.gamma),
        };
        Ok(spec.with_mass(self.mass))
    }

    pub fn source_spec(&self) -> Result<SourceSpec, ConfigError> {
        let omega0 = self.omega0.ok_or(ConfigError::Missing("omega0"))?;
        let s = match self.source {
            SourceKind::Kinematic => SourceSpec::kinematic(omega0),
            SourceKind::Force => SourceSpec::force(omega0),
        };
        Ok(s.with_amplitude(self.amplitude).at(self.source_node))
    }

    pub fn sim_config(&self) -> Result<SimConfig, ConfigError> {
        let t_end = self.t_end.ok_or(ConfigError::Missing("t_end"))?;
        let mut c = SimConfig::new(t_end)
            .with_window(self.window)
            .with_probes(self.probes.iter().copied())
            .with_snapshots(self.snapshots.iter().copied())
            .with_workers(self.workers);
        c.dt = self.dt;
        c.boundary = self.boundary;
        c.probe_stride = self.probe_stride;
        c.allow_small_window = self.allow_small_window;
        Ok(c)
    }
}
