//! Python module `latwave`: lattice specs, dispersion, resonances, waveforms,
//! simulation and the main analyses.

use latwave_core as core;
use latwave_core::analysis::{self, BeamingParams};
use latwave_core::dispersion::branches;
use latwave_core::lpw::lpw_catalog;
use latwave_core::{AngleFrame, Branch, NodeIndex, SimConfig, SourceKind, SourceSpec, Sublattice, WaveVector, Window, WindowSpec};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(latwave, LatticeError, PyException, "Error raised by the lattice toolkit.");

fn err(e: core::LatticeError) -> PyErr {
    LatticeError::new_err(format!("{}: {e}", e.name()))
}

fn parse<T: std::str::FromStr<Err = core::LatticeError>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

#[pyclass(name = "LatticeSpec", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PySpec(core::LatticeSpec);

#[pymethods]
impl PySpec {
    #[staticmethod]
    fn msl1d() -> Self {
        PySpec(core::LatticeSpec::msl1d())
    }
    #[staticmethod]
    fn scl() -> Self {
        PySpec(core::LatticeSpec::scl())
    }
    #[staticmethod]
    fn srcl(l: f64) -> Self {
        PySpec(core::LatticeSpec::srcl(l))
    }
    #[staticmethod]
    #[pyo3(signature = (l, gx=None, gy=None))]
    fn rcl(l: f64, gx: Option<f64>, gy: Option<f64>) -> Self {
        PySpec(core::LatticeSpec::rcl_with(l, gx.unwrap_or(1.0), gy.unwrap_or(1.0 / l)))
    }
    #[staticmethod]
    fn hcl() -> Self {
        PySpec(core::LatticeSpec::hcl())
    }
    #[staticmethod]
    fn etl() -> Self {
        PySpec(core::LatticeSpec::etl())
    }
    #[staticmethod]
    fn rtl(gamma: f64) -> Self {
        PySpec(core::LatticeSpec::rtl(gamma))
    }
    fn with_mass(&self, mass: f64) -> PyResult<Self> {
        let s = self.0.with_mass(mass);
        s.validate().map_err(err)?;
        Ok(PySpec(s))
    }
    #[getter]
    fn family(&self) -> &'static str {
        self.0.family.name()
    }
    #[getter]
    fn l(&self) -> f64 {
        self.0.l
    }
    #[getter]
    fn gx(&self) -> f64 {
        self.0.gx
    }
    #[getter]
    fn gy(&self) -> f64 {
        self.0.gy
    }
    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma
    }
    #[getter]
    fn mass(&self) -> f64 {
        self.0.mass
    }
    /// Branch names, lowest first.
    fn branches(&self) -> Vec<&'static str> {
        branches(self.0.family).iter().map(|b| b.name()).collect()
    }
    fn node_position(&self, m: i64, n: i64, sub: &str) -> PyResult<(f64, f64)> {
        self.0.node_position(NodeIndex { m, n, sub: parse(sub)? }).map_err(err)
    }
    fn __repr__(&self) -> String {
        let s = &self.0;
        format!("LatticeSpec({}, l={}, gx={}, gy={}, gamma={}, mass={})", s.family, s.l, s.gx, s.gy, s.gamma, s.mass)
    }
}

fn branch_list(spec: &core::LatticeSpec, branch: Option<&str>) -> PyResult<Vec<Branch>> {
    match branch {
        None => Ok(branches(spec.family).to_vec()),
        Some(b) => Ok(vec![parse(b)?]),
    }
}

/// Frequencies at `k`, one per branch (or just `branch`).
#[pyfunction]
#[pyo3(signature = (spec, kx, ky, branch=None))]
fn omega(spec: &PySpec, kx: f64, ky: f64, branch: Option<&str>) -> PyResult<Vec<f64>> {
    branch_list(&spec.0, branch)?
        .into_iter()
        .map(|b| core::omega(&spec.0, WaveVector::new(kx, ky), b).map_err(err))
        .collect()
}

/// `(cgx, cgy)`, or `None` where the gradient vanishes or is undefined.
#[pyfunction]
#[pyo3(signature = (spec, kx, ky, branch=None))]
fn group_velocity(spec: &PySpec, kx: f64, ky: f64, branch: Option<&str>) -> PyResult<Option<(f64, f64)>> {
    let b = branch_list(&spec.0, branch)?[0];
    let g = core::group_velocity(&spec.0, WaveVector::new(kx, ky), b).map_err(err)?;
    Ok(g.cg().map(|c| (c[0], c[1])))
}

#[pyfunction]
fn band_edges(spec: &PySpec) -> (f64, f64) {
    core::band_edges(&spec.0)
}

#[pyfunction]
fn resonance_catalog<'py>(py: Python<'py>, spec: &PySpec) -> PyResult<Vec<Bound<'py, PyDict>>> {
    core::resonance_catalog(&spec.0)
        .into_iter()
        .map(|e| {
            let d = PyDict::new(py);
            d.set_item("omega", e.omega)?;
            d.set_item("kind", e.kind.name())?;
            d.set_item("branch", e.branch.name())?;
            d.set_item("kpoints", e.kpoints.iter().map(|k| (k.kx, k.ky)).collect::<Vec<_>>())?;
            d.set_item("beaming", e.beaming)?;
            Ok(d)
        })
        .collect()
}

/// Beaming angles in radians.
#[pyfunction]
#[pyo3(signature = (spec, omega, frame="physical"))]
fn beaming_directions(spec: &PySpec, omega: f64, frame: &str) -> PyResult<Vec<f64>> {
    core::beaming_directions(&spec.0, omega, parse(frame)?).map_err(err)
}

/// Polylines of `(kx, ky)` vertices on the level set `omega`.
#[pyfunction]
#[pyo3(signature = (spec, omega, branch=None, resolution=128))]
fn equifrequency_contour(spec: &PySpec, omega: f64, branch: Option<&str>, resolution: usize) -> PyResult<Vec<Vec<(f64, f64)>>> {
    let mut out = Vec::new();
    for b in branch_list(&spec.0, branch)? {
        let set = core::equifrequency_contour(&spec.0, omega, b, resolution).map_err(err)?;
        out.extend(set.polylines.iter().map(|p| p.vertices.iter().map(|k| (k.kx, k.ky)).collect::<Vec<_>>()));
    }
    Ok(out)
}

/// Every cataloged waveform with its residual and time-evolution check.
#[pyfunction]
#[pyo3(signature = (spec, steps=10_000, dt=0.01))]
fn lpw_report<'py>(py: Python<'py>, spec: &PySpec, steps: usize, dt: f64) -> PyResult<Vec<Bound<'py, PyDict>>> {
    lpw_catalog(&spec.0)
        .iter()
        .map(|p| {
            let ev = core::lpw_time_evolution_check(&spec.0, p, steps, dt).map_err(err)?;
            let d = PyDict::new(py);
            d.set_item("orientation", p.orientation)?;
            d.set_item("mode", p.mode.name())?;
            d.set_item("frequency", p.frequency)?;
            d.set_item("line_angle", p.line_angle)?;
            d.set_item("residual", core::verify_lpw(&spec.0, p, None))?;
            d.set_item("zero_node_drift", ev.zero_node_drift)?;
            d.set_item("period_error", ev.period_error)?;
            d.set_item(
                "nodes",
                p.amplitudes.iter().map(|(i, a)| (i.m, i.n, i.sub.name(), *a)).collect::<Vec<_>>(),
            )?;
            Ok(d)
        })
        .collect()
}

fn node(t: (i64, i64, Option<String>)) -> PyResult<NodeIndex> {
    let sub = match t.2 {
        Some(s) => parse(&s)?,
        None => Sublattice::U,
    };
    Ok(NodeIndex { m: t.0, n: t.1, sub })
}

/// Driven run from rest.
///
/// `window` is `"auto"`, `"probe-safe"` or `(m_lo, m_hi, n_lo, n_hi)`.
/// Returns a dict with the window, probe series and snapshots (each with
/// `u` and `envelope` arrays per sublattice, row-major in `m`).
#[pyclass(name = "Simulation", frozen)]
struct PySimulation {
    spec: core::LatticeSpec,
    source: SourceSpec,
    out: core::SimOutput,
}

#[pymethods]
impl PySimulation {
    #[getter]
    fn window(&self) -> (i64, i64, i64, i64) {
        let w = self.out.window;
        (w.m_lo, w.m_hi, w.n_lo, w.n_hi)
    }
    #[getter]
    fn steps(&self) -> usize {
        self.out.steps
    }
    /// `[(m, n, sub, times, u)]`.
    fn probes(&self) -> Vec<(i64, i64, &'static str, Vec<f64>, Vec<f64>)> {
        self.out
            .probes
            .iter()
            .map(|p| (p.node.m, p.node.n, p.node.sub.name(), p.times.clone(), p.displacements.clone()))
            .collect()
    }
    fn snapshot_times(&self) -> Vec<f64> {
        self.out.snapshots.iter().map(|s| s.t).collect()
    }
    /// `(u, envelope)` of snapshot `i`, one row-major array per sublattice.
    fn snapshot(&self, i: usize) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let s = self.out.snapshots.get(i).ok_or_else(|| LatticeError::new_err("snapshot index out of range"))?;
        Ok((s.field.displacement.clone(), s.envelope.clone()))
    }
    fn envelope_at(&self, i: usize, m: i64, n: i64, sub: &str) -> PyResult<Option<f64>> {
        let s = self.out.snapshots.get(i).ok_or_else(|| LatticeError::new_err("snapshot index out of range"))?;
        Ok(s.envelope_at(NodeIndex { m, n, sub: parse(sub)? }))
    }
    /// Ray angles (radians) of snapshot `i`.
    #[pyo3(signature = (i, threshold=0.1, frame="physical"))]
    fn beaming_rays(&self, i: usize, threshold: f64, frame: &str) -> PyResult<Vec<f64>> {
        let s = self.out.snapshots.get(i).ok_or_else(|| LatticeError::new_err("snapshot index out of range"))?;
        let params = BeamingParams { threshold, frame: parse::<AngleFrame>(frame)?, ..Default::default() };
        Ok(analysis::beaming_map(&self.spec, s, &self.source, &params).map_err(err)?.rays)
    }
    /// Power-law exponent of probe `i`'s envelope over `[t_from, t_to]`.
    fn growth_exponent(&self, i: usize, t_from: f64, t_to: f64) -> PyResult<f64> {
        let p = self.out.probes.get(i).ok_or_else(|| LatticeError::new_err("probe index out of range"))?;
        let env = analysis::envelope(p, self.source.omega0).map_err(err)?;
        Ok(analysis::growth_exponent(&env, (t_from, t_to)).map_err(err)?.exponent)
    }
}

#[pyfunction]
#[pyo3(signature = (spec, omega0, t_end, source="kinematic", amplitude=1.0, node_at=None, window=None, probes=Vec::new(), snapshots=Vec::new(), dt=0.01, workers=1))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    spec: &PySpec,
    omega0: f64,
    t_end: f64,
    source: &str,
    amplitude: f64,
    node_at: Option<(i64, i64, Option<String>)>,
    window: Option<Bound<'_, PyAny>>,
    probes: Vec<(i64, i64, Option<String>)>,
    snapshots: Vec<f64>,
    dt: f64,
    workers: usize,
) -> PyResult<PySimulation> {
    let kind: SourceKind = parse(source)?;
    let mut src = match kind {
        SourceKind::Kinematic => SourceSpec::kinematic(omega0),
        SourceKind::Force => SourceSpec::force(omega0),
    }
    .with_amplitude(amplitude);
    if let Some(n) = node_at {
        src = src.at(node(n)?);
    }
    let window = match window {
        None => WindowSpec::Auto,
        Some(w) => match w.extract::<String>() {
            Ok(s) if s == "auto" => WindowSpec::Auto,
            Ok(s) if s == "probe-safe" => WindowSpec::ProbeSafe,
            Ok(s) => return Err(LatticeError::new_err(format!("unknown window '{s}'"))),
            Err(_) => {
                let (a, b, c, d): (i64, i64, i64, i64) = w.extract()?;
                WindowSpec::Explicit(Window::new(a, b, c, d))
            }
        },
    };
    let probes = probes.into_iter().map(node).collect::<PyResult<Vec<_>>>()?;
    let mut cfg = SimConfig::new(t_end).with_window(window).with_probes(probes).with_snapshots(snapshots).with_workers(workers);
    cfg.dt = dt;
    let s = spec.0;
    let out = py.detach(|| core::simulate(&s, &src, &cfg)).map_err(err)?;
    Ok(PySimulation { spec: s, source: src, out })
}

#[pymodule]
fn latwave(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LatticeError", m.py().get_type::<LatticeError>())?;
    m.add("__version__", core::VERSION)?;
    m.add_class::<PySpec>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(omega, m)?)?;
    m.add_function(wrap_pyfunction!(group_velocity, m)?)?;
    m.add_function(wrap_pyfunction!(band_edges, m)?)?;
    m.add_function(wrap_pyfunction!(resonance_catalog, m)?)?;
    m.add_function(wrap_pyfunction!(beaming_directions, m)?)?;
    m.add_function(wrap_pyfunction!(equifrequency_contour, m)?)?;
    m.add_function(wrap_pyfunction!(lpw_report, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
