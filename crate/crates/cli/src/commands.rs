use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use latwave_core::analysis::{beaming_map, envelope, front_scaling, growth_exponent, sublattice_ratio, BeamingParams};
use latwave_core::dispersion::branches;
use latwave_core::lpw::{lpw_catalog, lpw_orientations};
use latwave_core::*;
use std::result::Result;

use crate::output::{f, read_manifest, write_manifest, writer};
use crate::{CliError, RunConfig};

/// Residual above which a cataloged waveform counts as broken.
const LPW_RESIDUAL_LIMIT: f64 = 1e-9;

fn selected_branches(cfg: &RunConfig, spec: &LatticeSpec) -> Result<Vec<Branch>, CliError> {
    let all = branches(spec.family);
    match cfg.branch {
        None => Ok(all.to_vec()),
        Some(b) if all.contains(&b) => Ok(vec![b]),
        Some(b) => Err(LatticeError::InvalidBranch { family: spec.family, branch: b.name().into() }.into()),
    }
}

fn axis(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    if n == 1 {
        0.5 * (lo + hi)
    } else {
        lo + (hi - lo) * i as f64 / (n - 1) as f64
    }
}

pub fn dispersion(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let spec = cfg.lattice()?;
    spec.validate()?;
    let brs = branches(spec.family);
    let mut header = vec!["kx".to_string(), "ky".to_string()];
    header.extend(brs.iter().map(|b| format!("omega_{}", b.name())));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let (mut w, path) = writer(out, "dispersion.csv", &header)?;
    let (bx, by) = spec.zone_box();
    let ny = if spec.family.is_1d() { 1 } else { cfg.res };
    for j in 0..ny {
        let ky = if spec.family.is_1d() { 0.0 } else { axis(by[0], by[1], ny, j) };
        for i in 0..cfg.res {
            let k = WaveVector::new(axis(bx[0], bx[1], cfg.res, i), ky);
            let mut row = vec![f(k.kx), f(k.ky)];
            for b in brs {
                row.push(f(omega(&spec, k, *b)?));
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(vec![path])
}

pub fn contour(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let spec = cfg.lattice()?;
    let w0 = cfg.omega.ok_or(crate::ConfigError::Missing("omega"))?;
    let (mut w, path) = writer(out, "contour.csv", &["branch", "polyline", "kind", "kx", "ky"])?;
    let mut id = 0usize;
    for b in selected_branches(cfg, &spec)? {
        let set = equifrequency_contour(&spec, w0, b, cfg.res.max(64))?;
        for pl in &set.polylines {
            let kind = if pl.closed { "closed" } else { "open" };
            for k in &pl.vertices {
                w.write_record([b.name().to_string(), id.to_string(), kind.into(), f(k.kx), f(k.ky)])?;
            }
            id += 1;
        }
        for k in &set.degenerate_points {
            w.write_record([b.name().to_string(), id.to_string(), "point".into(), f(k.kx), f(k.ky)])?;
            id += 1;
        }
    }
    w.flush()?;
    println!("{id} polylines/points at omega = {w0}");
    Ok(vec![path])
}

pub fn groupvel(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let spec = cfg.lattice()?;
    let (mut w, path) =
        writer(out, "groupvel.csv", &["branch", "kx", "ky", "omega", "cgx", "cgy", "beta", "flag"])?;
    for b in selected_branches(cfg, &spec)? {
        for s in group_velocity_field(&spec, b, cfg.res)? {
            let (cgx, cgy, beta) = match (s.group_velocity.cg(), s.group_velocity.beta()) {
                (Some(c), Some(beta)) => (f(c[0]), f(c[1]), f(beta)),
                _ => (String::new(), String::new(), String::new()),
            };
            w.write_record([b.name().into(), f(s.k.kx), f(s.k.ky), f(s.omega), cgx, cgy, beta, s.group_velocity.flag().into()])?;
        }
    }
    w.flush()?;
    Ok(vec![path])
}

pub fn resonances(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let spec = cfg.lattice()?;
    spec.validate()?;
    let (mut w, path) = writer(out, "resonances.csv", &["omega", "kind", "branch", "kpoints", "beaming_deg"])?;
    for e in resonance_catalog(&spec) {
        let kp: Vec<String> = e.kpoints.iter().map(|k| format!("{}:{}", f(k.kx), f(k.ky))).collect();
        let beams = match beaming_directions(&spec, e.omega, cfg.frame) {
            Ok(b) => b.iter().map(|a| f(a.to_degrees())).collect::<Vec<_>>().join(";"),
            Err(_) => String::new(),
        };
        println!("{:.10} {} ({})", e.omega, e.kind.name(), e.branch.name());
        w.write_record([f(e.omega), e.kind.name().into(), e.branch.name().into(), kp.join(";"), beams])?;
    }
    w.flush()?;
    Ok(vec![path])
}

pub fn lpw(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let spec = cfg.lattice()?;
    spec.validate()?;
    let pats = lpw_catalog(&spec);
    fs::create_dir_all(out)?;
    if pats.is_empty() {
        let reason = match construct_lpw(&spec, 0, LpwMode::Primary) {
            Err(e) => e.to_string(),
            Ok(_) => "no waveform cataloged".into(),
        };
        let path = out.join("lpw_report.txt");
        let text = format!("no LPW for this configuration\n{reason}\n");
        fs::write(&path, &text)?;
        print!("{text}");
        return Ok(vec![path]);
    }
    let (mut w, path) = writer(
        out,
        "lpw.csv",
        &["orientation", "mode", "frequency", "line_angle_deg", "residual", "zero_node_drift", "frequency_estimate", "period_error"],
    )?;
    let (mut wn, nodes_path) = writer(out, "lpw_nodes.csv", &["orientation", "mode", "m", "n", "sub", "amplitude"])?;
    let mut worst = 0.0f64;
    for p in &pats {
        let res = verify_lpw(&spec, p, None);
        worst = worst.max(res);
        let ev = lpw_time_evolution_check(&spec, p, cfg.lpw_steps, cfg.dt)?;
        let angle = p.line_angle.map(|a| f(a.to_degrees())).unwrap_or_default();
        w.write_record([
            p.orientation.to_string(),
            p.mode.name().into(),
            f(p.frequency),
            angle,
            f(res),
            f(ev.zero_node_drift),
            f(ev.frequency_estimate),
            f(ev.period_error),
        ])?;
        for (idx, a) in &p.amplitudes {
            wn.write_record([p.orientation.to_string(), p.mode.name().into(), idx.m.to_string(), idx.n.to_string(), idx.sub.name().into(), f(*a)])?;
        }
    }
    w.flush()?;
    wn.flush()?;
    println!("{} waveforms ({} orientations), max residual {worst:.3e}", pats.len(), lpw_orientations(&spec));
    if worst > LPW_RESIDUAL_LIMIT {
        return Err(LatticeError::Numerical(format!("LPW residual {worst:.3e} exceeds {LPW_RESIDUAL_LIMIT:.0e}")).into());
    }
    Ok(vec![path, nodes_path])
}

fn snapshot_name(i: usize) -> String {
    format!("snapshot_{i:03}.csv")
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let spec = cfg.lattice()?;
    let source = cfg.source_spec()?;
    let sim = cfg.sim_config()?;
    let res = latwave_core::simulate(&spec, &source, &sim)?;
    let mut files = Vec::new();

    let (mut w, path) = writer(out, "probes.csv", &["m", "n", "sub", "t", "u", "envelope"])?;
    let period = source.period();
    for p in &res.probes {
        let env = envelope(p, source.omega0).ok();
        let t0 = p.times.first().copied().unwrap_or(0.0);
        for (&t, &u) in p.times.iter().zip(&p.displacements) {
            let k = ((t - t0) / period + 1e-9).floor() as usize;
            let e = env.as_ref().and_then(|e| e.amplitudes.get(k)).map(|a| f(*a)).unwrap_or_default();
            w.write_record([p.node.m.to_string(), p.node.n.to_string(), p.node.sub.name().into(), f(t), f(u), e])?;
        }
    }
    w.flush()?;
    files.push(path);

    for (i, s) in res.snapshots.iter().enumerate() {
        let (mut w, path) = writer(out, &snapshot_name(i), &["t", "m", "n", "sub", "x", "y", "u", "v", "envelope"])?;
        for (idx, u) in s.field.nodes() {
            let (x, y) = spec.node_position(idx)?;
            let v = s.field.velocity_at(idx).unwrap_or(0.0);
            let e = s.envelope_at(idx).unwrap_or(0.0);
            w.write_record([f(s.t), idx.m.to_string(), idx.n.to_string(), idx.sub.name().into(), f(x), f(y), f(u), f(v), f(e)])?;
        }
        w.flush()?;
        files.push(path);
    }
    let wdw = res.window;
    println!(
        "window m {}..{} n {}..{}, {} steps, {} probes, {} snapshots",
        wdw.m_lo,
        wdw.m_hi,
        wdw.n_lo,
        wdw.n_hi,
        res.steps,
        res.probes.len(),
        res.snapshots.len()
    );
    Ok(files)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AnalyzeKind {
    /// Threshold mask and ray directions of a snapshot.
    Beaming,
    /// Power-law fit of probe envelopes.
    Growth,
    /// Collapse of 1D snapshots under `lambda = 2m / sqrt(t)`.
    Scaling,
    /// `|u| / |v|` envelope ratio of the first two probes.
    Ratio,
}

fn parse_field<T: FromStr>(rec: &csv::StringRecord, i: usize, file: &Path) -> Result<T, CliError> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| LatticeError::InvalidInput(format!("{}: bad field {i} in {:?}", file.display(), rec)).into())
}

fn read_snapshot(spec: &LatticeSpec, boundary: Boundary, path: &Path) -> Result<Snapshot, CliError> {
    let mut rd = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let sub = Sublattice::from_str(rec.get(3).unwrap_or(""))?;
        let idx = NodeIndex { m: parse_field(&rec, 1, path)?, n: parse_field(&rec, 2, path)?, sub };
        let t: f64 = parse_field(&rec, 0, path)?;
        rows.push((t, idx, parse_field::<f64>(&rec, 6, path)?, parse_field::<f64>(&rec, 7, path)?, parse_field::<f64>(&rec, 8, path)?));
    }
    let first = rows.first().ok_or_else(|| LatticeError::InvalidInput(format!("{} is empty", path.display())))?;
    let t = first.0;
    let (m_lo, m_hi) = rows.iter().fold((i64::MAX, i64::MIN), |(a, b), r| (a.min(r.1.m), b.max(r.1.m)));
    let (n_lo, n_hi) = rows.iter().fold((i64::MAX, i64::MIN), |(a, b), r| (a.min(r.1.n), b.max(r.1.n)));
    let window = Window::new(m_lo, m_hi, n_lo, n_hi);
    let mut field = FieldState::zeros(spec, window, boundary);
    field.t = t;
    let mut env = vec![vec![0.0; window.cells()]; spec.family.sublattices()];
    for (_, idx, u, v, e) in rows {
        spec.check_index(idx)?;
        let o = window.offset(idx.m, idx.n).expect("window spans every row");
        let s = idx.sub.index();
        field.displacement[s][o] = u;
        field.velocity[s][o] = v;
        env[s][o] = e;
    }
    Ok(Snapshot { t, field, envelope: env })
}

fn snapshot_files(dir: &Path) -> Vec<PathBuf> {
    (0..).map(|i| dir.join(snapshot_name(i))).take_while(|p| p.exists()).collect()
}

fn read_probes(path: &Path) -> Result<Vec<ProbeRecord>, CliError> {
    let mut rd = csv::Reader::from_path(path)?;
    let mut order = Vec::new();
    let mut map: BTreeMap<NodeIndex, ProbeRecord> = BTreeMap::new();
    for rec in rd.records() {
        let rec = rec?;
        let sub = Sublattice::from_str(rec.get(2).unwrap_or(""))?;
        let node = NodeIndex { m: parse_field(&rec, 0, path)?, n: parse_field(&rec, 1, path)?, sub };
        let p = map.entry(node).or_insert_with(|| {
            order.push(node);
            ProbeRecord { node, times: Vec::new(), displacements: Vec::new() }
        });
        p.times.push(parse_field(&rec, 3, path)?);
        p.displacements.push(parse_field(&rec, 4, path)?);
    }
    Ok(order.into_iter().filter_map(|n| map.remove(&n)).collect())
}

pub fn analyze(kind: AnalyzeKind, cfg: &RunConfig, input: &Path, index: Option<usize>, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let spec = cfg.lattice()?;
    match kind {
        AnalyzeKind::Beaming => {
            let files = snapshot_files(input);
            let file = match index {
                Some(i) => files.get(i).cloned(),
                None => files.last().cloned(),
            }
            .ok_or_else(|| CliError::Usage(format!("no snapshot files in {}", input.display())))?;
            let snap = read_snapshot(&spec, cfg.boundary, &file)?;
            let source = cfg.source_spec()?;
            let params = BeamingParams { threshold: cfg.threshold, min_radius: cfg.min_radius, frame: cfg.frame, ..Default::default() };
            let map = beaming_map(&spec, &snap, &source, &params)?;
            let masked: BTreeSet<NodeIndex> = map.mask.iter().copied().collect();
            let (mut w, path) = writer(out, "beaming.csv", &["m", "n", "sub", "x", "y", "envelope", "above_threshold"])?;
            for (idx, _) in snap.field.nodes() {
                let (x, y) = spec.node_position(idx)?;
                let e = snap.envelope_at(idx).unwrap_or(0.0);
                let above = if masked.contains(&idx) { "1" } else { "0" };
                w.write_record([idx.m.to_string(), idx.n.to_string(), idx.sub.name().into(), f(x), f(y), f(e), above.into()])?;
            }
            w.flush()?;
            let (mut wr, rays_path) = writer(out, "rays.csv", &["ray", "frame", "angle_deg", "angle_rad"])?;
            for (i, r) in map.rays.iter().enumerate() {
                wr.write_record([i.to_string(), cfg.frame.name().into(), f(r.to_degrees()), f(*r)])?;
            }
            wr.flush()?;
            let degs: Vec<String> = map.rays.iter().map(|r| format!("{:.2}", r.to_degrees())).collect();
            println!(
                "t = {}: {} masked nodes, rays ({} frame, deg): [{}]",
                snap.t,
                map.mask.len(),
                cfg.frame.name(),
                degs.join(", ")
            );
            Ok(vec![path, rays_path])
        }
        AnalyzeKind::Growth => {
            let probes = read_probes(&input.join("probes.csv"))?;
            let source = cfg.source_spec()?;
            let t_end = cfg.t_end.or_else(|| probes.first().and_then(|p| p.times.last().copied())).unwrap_or(0.0);
            let range = (cfg.t_from.unwrap_or(0.5 * t_end), cfg.t_to.unwrap_or(t_end));
            let (mut w, path) = writer(out, "growth.csv", &["m", "n", "sub", "t_from", "t_to", "exponent", "prefactor", "r_squared"])?;
            for p in &probes {
                let fit = growth_exponent(&envelope(p, source.omega0)?, range)?;
                println!("{},{},{}: exponent {:.4} (R^2 {:.4})", p.node.m, p.node.n, p.node.sub.name(), fit.exponent, fit.r_squared);
                w.write_record([
                    p.node.m.to_string(),
                    p.node.n.to_string(),
                    p.node.sub.name().into(),
                    f(range.0),
                    f(range.1),
                    f(fit.exponent),
                    f(fit.prefactor),
                    f(fit.r_squared),
                ])?;
            }
            w.flush()?;
            Ok(vec![path])
        }
        AnalyzeKind::Scaling => {
            let snaps = snapshot_files(input)
                .iter()
                .map(|p| read_snapshot(&spec, cfg.boundary, p))
                .collect::<Result<Vec<_>, _>>()?;
            let err = front_scaling(&snaps)?;
            let (mut w, path) = writer(out, "scaling.csv", &["snapshots", "collapse_error"])?;
            w.write_record([snaps.len().to_string(), f(err)])?;
            w.flush()?;
            println!("collapse error over {} snapshots: {err:.4}", snaps.len());
            Ok(vec![path])
        }
        AnalyzeKind::Ratio => {
            let probes = read_probes(&input.join("probes.csv"))?;
            if probes.len() < 2 {
                return Err(CliError::Usage("ratio needs two probes (u then v)".into()));
            }
            let source = cfg.source_spec()?;
            let r = sublattice_ratio(&spec, &probes[0], &probes[1], source.omega0)?;
            let (mut w, path) = writer(out, "ratio.csv", &["t", "ratio"])?;
            for (t, q) in r.times.iter().zip(&r.ratios) {
                w.write_record([f(*t), f(*q)])?;
            }
            w.flush()?;
            Ok(vec![path])
        }
    }
}

/// Writes `manifest.txt`, or `<command>_manifest.txt` for analyses so the
/// simulation manifest next to them is kept.
pub fn manifest(command: &str, cfg: &RunConfig, out: &Path) -> Result<PathBuf, CliError> {
    let name = if command.starts_with("analyze") {
        format!("{}_manifest.txt", command.replace(' ', "_"))
    } else {
        crate::output::MANIFEST.to_string()
    };
    write_manifest(out, &name, command, cfg)
}

/// Config stored next to earlier results, if any.
pub fn input_config(input: &Path) -> Result<Option<RunConfig>, CliError> {
    if input.join(crate::output::MANIFEST).exists() {
        Ok(Some(read_manifest(input)?))
    } else {
        Ok(None)
    }
}
