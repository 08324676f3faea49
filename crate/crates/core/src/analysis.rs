//! Post-processing of simulation output: envelopes, growth exponents,
//! beaming maps, front scaling of the 1D resonance and sublattice ratios.

use std::f64::consts::PI;

use crate::dispersion::AngleFrame;
use crate::error::{LatticeError, Result};
use crate::lattice::{Family, LatticeSpec, NodeIndex, Sublattice};
use crate::transient::{ProbeRecord, Snapshot, SourceKind, SourceSpec};

pub mod asymptotic;

pub use asymptotic::{asymptotic_1d, asymptotic_envelope, ResonantProfile, UnitForceProfile};

/// Fewest samples per source period accepted by [`envelope`].
pub const MIN_SAMPLES_PER_PERIOD: f64 = 20.0;

/// Per-period amplitude of one probe.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSeries {
    pub node: NodeIndex,
    /// Window centres.
    pub times: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

/// Max `|u|` over consecutive, non-overlapping windows of one source period.
/// A trailing partial window is dropped.
pub fn envelope(probe: &ProbeRecord, omega0: f64) -> Result<EnvelopeSeries> {
    if !(omega0 > 0.0) {
        return Err(LatticeError::InvalidInput(format!("omega0 must be positive, got {omega0}")));
    }
    let (t, u) = (&probe.times, &probe.displacements);
    if t.len() < 2 || t.len() != u.len() {
        return Err(LatticeError::InvalidInput("probe needs at least two samples".into()));
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    let period = 2.0 * PI / omega0;
    if period / dt < MIN_SAMPLES_PER_PERIOD {
        return Err(LatticeError::InvalidInput(format!(
            "{:.1} samples per period, need at least {MIN_SAMPLES_PER_PERIOD}",
            period / dt
        )));
    }
    let t0 = t[0];
    let mut out = EnvelopeSeries { node: probe.node, times: Vec::new(), amplitudes: Vec::new() };
    let mut k = 0usize;
    let mut cur = 0.0f64;
    let mut have = false;
    for (&ti, &ui) in t.iter().zip(u) {
        let w = ((ti - t0) / period + 1e-9).floor() as usize;
        if w != k {
            if have {
                out.times.push(t0 + (k as f64 + 0.5) * period);
                out.amplitudes.push(cur);
            }
            k = w;
            cur = 0.0;
        }
        cur = cur.max(ui.abs());
        have = true;
    }
    // keep the last window only if it is complete
    if t[t.len() - 1] - t0 >= (k as f64 + 1.0) * period - 0.5 * dt {
        out.times.push(t0 + (k as f64 + 0.5) * period);
        out.amplitudes.push(cur);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthFit {
    pub node: NodeIndex,
    pub t_range: (f64, f64),
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
}

/// Least-squares slope of `ln(amplitude)` against `ln(t)` over windows
/// centred inside `t_range`.
pub fn growth_exponent(series: &EnvelopeSeries, t_range: (f64, f64)) -> Result<GrowthFit> {
    let (t0, t1) = t_range;
    if !(t0 > 0.0 && t1 > t0) {
        return Err(LatticeError::InvalidInput(format!("bad fit range {t_range:?}")));
    }
    let pts: Vec<(f64, f64)> = series
        .times
        .iter()
        .zip(&series.amplitudes)
        .filter(|(&t, _)| t >= t0 && t <= t1)
        .map(|(&t, &a)| (t, a))
        .collect();
    if pts.len() < 10 {
        return Err(LatticeError::InvalidInput(format!("only {} periods inside {t_range:?}, need 10", pts.len())));
    }
    if let Some((t, a)) = pts.iter().find(|(_, a)| !(*a > 0.0)) {
        return Err(LatticeError::InvalidInput(format!("non-positive amplitude {a} at t = {t}")));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy <= 1e-20 * n { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(GrowthFit {
        node: series.node,
        t_range,
        exponent: slope,
        prefactor: (my - slope * mx).exp(),
        r_squared: r2,
    })
}

/// Tunables of the ray detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamingParams {
    /// Mask level relative to the reference amplitude.
    pub threshold: f64,
    /// Nodes closer than this (physical units) are ignored.
    pub min_radius: f64,
    /// Half-width of the circular moving average, in 1-degree bins.
    pub smoothing: usize,
    /// A peak must exceed this multiple of the median bin...
    pub median_factor: f64,
    /// ...and this fraction of the largest bin.
    pub max_fraction: f64,
    /// Peaks closer than this (degrees) are merged.
    pub merge_deg: f64,
    pub frame: AngleFrame,
}

impl Default for BeamingParams {
    fn default() -> Self {
        BeamingParams {
            threshold: 0.1,
            min_radius: 10.0,
            smoothing: 2,
            median_factor: 2.0,
            max_fraction: 0.25,
            merge_deg: 10.0,
            frame: AngleFrame::Physical,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamingMap {
    pub t: f64,
    pub threshold: f64,
    /// Amplitude the threshold is relative to.
    pub reference: f64,
    pub mask: Vec<NodeIndex>,
    /// Ray directions in radians, `[0, 2 pi)`, ascending.
    pub rays: Vec<f64>,
    /// Smoothed 1-degree angular histogram used for the ray search.
    pub histogram: Vec<f64>,
}

/// Direction of a node as seen from the source.
pub fn node_angle(spec: &LatticeSpec, source: NodeIndex, node: NodeIndex, frame: AngleFrame) -> Result<f64> {
    let (dx, dy) = node_offset(spec, source, node, frame)?;
    Ok(dy.atan2(dx).rem_euclid(2.0 * PI))
}

fn node_offset(spec: &LatticeSpec, source: NodeIndex, node: NodeIndex, frame: AngleFrame) -> Result<(f64, f64)> {
    Ok(match frame {
        AngleFrame::Physical => {
            let (x0, y0) = spec.node_position(source)?;
            let (x, y) = spec.node_position(node)?;
            (x - x0, y - y0)
        }
        AngleFrame::Index => ((node.m - source.m) as f64, (node.n - source.n) as f64),
    })
}

/// Nodes whose last-period envelope reaches `threshold` of the reference
/// level, plus the dominant ray directions among them.
///
/// The reference is the prescribed amplitude for a kinematic source and the
/// envelope at the source node for a force source. Rays are the peaks of the
/// angular density of masked envelope in the annulus from `min_radius` out to
/// the largest circle inside the window.
pub fn beaming_map(
    spec: &LatticeSpec,
    snapshot: &Snapshot,
    source: &SourceSpec,
    params: &BeamingParams,
) -> Result<BeamingMap> {
    if !(params.threshold > 0.0 && params.threshold < 1.0) {
        return Err(LatticeError::InvalidInput(format!("threshold must lie in (0, 1), got {}", params.threshold)));
    }
    if spec.family.is_1d() {
        return Err(LatticeError::InvalidInput("beaming maps need a 2D lattice".into()));
    }
    let reference = match source.kind {
        SourceKind::Kinematic => source.amplitude.abs(),
        SourceKind::Force => snapshot
            .envelope_at(source.node)
            .ok_or_else(|| LatticeError::InvalidInput("source node not in snapshot".into()))?,
    };
    let w = snapshot.field.window;
    // largest circle about the source that fits inside the window
    let mut r_max = f64::INFINITY;
    let edge = (w.m_lo..=w.m_hi)
        .flat_map(|m| [(m, w.n_lo), (m, w.n_hi)])
        .chain((w.n_lo..=w.n_hi).flat_map(|n| [(w.m_lo, n), (w.m_hi, n)]));
    for (m, n) in edge {
        for s in 0..snapshot.envelope.len() {
            let (dx, dy) = node_offset(spec, source.node, NodeIndex { m, n, sub: Sublattice::from_index(s) }, params.frame)?;
            r_max = r_max.min(dx.hypot(dy));
        }
    }

    // each node covers roughly the angle its share of the plane subtends;
    // spreading its weight over that arc keeps lattice rows that happen to
    // line up with one bin from producing spikes
    let (em, en) = match params.frame {
        AngleFrame::Physical => spec.lattice_vectors(),
        AngleFrame::Index => ([1.0, 0.0], [0.0, 1.0]),
    };
    let cell_area = (em[0] * en[1] - em[1] * en[0]).abs();
    let spacing = (cell_area / snapshot.envelope.len() as f64).sqrt();

    const BINS: usize = 360;
    let mut raw = vec![0.0; BINS];
    let mut mask = Vec::new();
    let level = params.threshold * reference;
    for (s, env) in snapshot.envelope.iter().enumerate() {
        for (off, &e) in env.iter().enumerate() {
            if !(reference > 0.0 && e >= level) {
                continue;
            }
            let (m, n) = w.cell_at(off);
            let idx = NodeIndex { m, n, sub: Sublattice::from_index(s) };
            mask.push(idx);
            let (dx, dy) = node_offset(spec, source.node, idx, params.frame)?;
            let r = dx.hypot(dy);
            if r <= params.min_radius || r > r_max {
                continue;
            }
            let centre = dy.atan2(dx).rem_euclid(2.0 * PI).to_degrees();
            let half = (0.5 * spacing / r).to_degrees().max(0.5);
            deposit(&mut raw, centre - half, centre + half, e);
        }
    }
    let k = params.smoothing as isize;
    let hist: Vec<f64> = (0..BINS as isize)
        .map(|b| (-k..=k).map(|d| raw[(b + d).rem_euclid(BINS as isize) as usize]).sum::<f64>() / (2 * k + 1) as f64)
        .collect();
    let rays = find_rays(&hist, params);
    Ok(BeamingMap { t: snapshot.t, threshold: params.threshold, reference, mask, rays, histogram: hist })
}

/// Adds `weight` spread uniformly over the arc `[lo, hi]` (degrees) to the
/// circular 1-degree histogram.
fn deposit(hist: &mut [f64], lo: f64, hi: f64, weight: f64) {
    let n = hist.len() as isize;
    let density = weight / (hi - lo);
    let mut b = lo.floor() as isize;
    while (b as f64) < hi {
        let overlap = (hi.min(b as f64 + 1.0) - lo.max(b as f64)).max(0.0);
        hist[b.rem_euclid(n) as usize] += density * overlap;
        b += 1;
    }
}

fn find_rays(hist: &[f64], params: &BeamingParams) -> Vec<f64> {
    let n = hist.len();
    let max = hist.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Vec::new();
    }
    let mut sorted = hist.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    let floor = (params.median_factor * median).max(params.max_fraction * max);
    let at = |i: isize| hist[i.rem_euclid(n as isize) as usize];
    // (angle in degrees, height)
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for i in 0..n as isize {
        let (l, c, r) = (at(i - 1), at(i), at(i + 1));
        if c > floor && c >= l && c > r {
            let denom = l - 2.0 * c + r;
            let shift = if denom < 0.0 { 0.5 * (l - r) / denom } else { 0.0 };
            peaks.push((i as f64 + 0.5 + shift, c));
        }
    }
    // strongest first, drop anything within merge distance of a kept peak
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut kept: Vec<(f64, f64)> = Vec::new();
    for p in peaks {
        let close = kept.iter().any(|q| {
            let d = (p.0 - q.0).rem_euclid(360.0);
            d.min(360.0 - d) < params.merge_deg
        });
        if !close {
            kept.push(p);
        }
    }
    let mut rays: Vec<f64> = kept.iter().map(|p| p.0.rem_euclid(360.0).to_radians()).collect();
    rays.sort_by(f64::total_cmp);
    rays
}

/// Smallest angular distance between two directions.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Collapse of the 1D resonant front: envelopes divided by `sqrt(t)` are
/// resampled against `lambda = 2 m / sqrt(t)` on `[0, 4]` (`m >= 0`), and the
/// largest pairwise relative L2 discrepancy is returned.
pub fn front_scaling(snapshots: &[Snapshot]) -> Result<f64> {
    if snapshots.len() < 2 {
        return Err(LatticeError::InvalidInput("need at least two snapshots".into()));
    }
    const SAMPLES: usize = 401;
    let mut profiles = Vec::with_capacity(snapshots.len());
    for s in snapshots {
        let w = s.field.window;
        if s.envelope.len() != 1 || w.height() != 1 {
            return Err(LatticeError::InvalidInput("front scaling needs 1D snapshots".into()));
        }
        if !(s.t > 0.0) {
            return Err(LatticeError::InvalidInput(format!("snapshot time {} must be positive", s.t)));
        }
        let sq = s.t.sqrt();
        let m_max = (2.0 * sq).ceil() as i64 + 1;
        if w.m_lo > 0 || w.m_hi < m_max {
            return Err(LatticeError::InvalidInput(format!("window does not cover m in [0, {m_max}]")));
        }
        let env = &s.envelope[0];
        let at = |m: i64| env[(m - w.m_lo) as usize] / sq;
        let profile: Vec<f64> = (0..SAMPLES)
            .map(|q| {
                let lambda = 4.0 * q as f64 / (SAMPLES - 1) as f64;
                let x = lambda * sq / 2.0;
                let m = x.floor() as i64;
                let f = x - m as f64;
                (1.0 - f) * at(m) + f * at(m + 1)
            })
            .collect();
        profiles.push(profile);
    }
    let norm = |p: &[f64]| p.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut worst = 0.0f64;
    for i in 0..profiles.len() {
        for j in i + 1..profiles.len() {
            let (a, b) = (&profiles[i], &profiles[j]);
            let scale = norm(a).max(norm(b));
            if scale == 0.0 {
                continue;
            }
            let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            worst = worst.max(d / scale);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioSeries {
    pub times: Vec<f64>,
    /// `U / V` per source period.
    pub ratios: Vec<f64>,
}

/// Per-period envelope ratio `U/V` of a `u` probe and a `v` probe of the
/// hexagonal lattice.
pub fn sublattice_ratio(spec: &LatticeSpec, u: &ProbeRecord, v: &ProbeRecord, omega0: f64) -> Result<RatioSeries> {
    if spec.family != Family::Hcl {
        return Err(LatticeError::InvalidInput(format!("sublattice ratio needs the hexagonal lattice, got {}", spec.family)));
    }
    if u.node.sub != Sublattice::U || v.node.sub != Sublattice::V {
        return Err(LatticeError::InvalidInput("expected a u probe and a v probe".into()));
    }
    let eu = envelope(u, omega0)?;
    let ev = envelope(v, omega0)?;
    let (times, ratios) = eu
        .times
        .iter()
        .zip(eu.amplitudes.iter().zip(&ev.amplitudes))
        .filter(|(_, (_, &b))| b > 0.0)
        .map(|(&t, (&a, &b))| (t, a / b))
        .unzip();
    Ok(RatioSeries { times, ratios })
}

impl RatioSeries {
    /// Mean ratio over windows centred in `[t0, t1]`.
    pub fn mean_over(&self, t0: f64, t1: f64) -> Option<f64> {
        let v: Vec<f64> =
            self.times.iter().zip(&self.ratios).filter(|(&t, _)| t >= t0 && t <= t1).map(|(_, &r)| r).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Boundary, FieldState, Window};

    fn probe(f: impl Fn(f64) -> f64, t_end: f64, dt: f64) -> ProbeRecord {
        let n = (t_end / dt).round() as usize;
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
        let displacements = times.iter().map(|&t| f(t)).collect();
        ProbeRecord { node: NodeIndex::ORIGIN, times, displacements }
    }

    #[test]
    fn envelope_of_pure_sine() {
        let p = probe(|t| 0.7 * (2.0 * t + 0.3).sin(), 100.0, 0.01);
        let e = envelope(&p, 2.0).unwrap();
        assert!(e.amplitudes.iter().all(|a| (a - 0.7).abs() < 1e-3));
        assert_eq!(e.amplitudes.len(), (100.0 / PI) as usize);
    }

    #[test]
    fn envelope_of_linear_growth() {
        let p = probe(|t| t * (2.0 * t).sin(), 100.0, 0.01);
        let e = envelope(&p, 2.0).unwrap();
        for (t, a) in e.times.iter().zip(&e.amplitudes) {
            assert!((a - t).abs() < PI, "{t} {a}");
        }
    }

    #[test]
    fn envelope_needs_resolution() {
        let p = probe(|t| t.sin(), 100.0, 0.5);
        assert!(envelope(&p, 2.0).is_err());
    }

    #[test]
    fn growth_of_power_laws() {
        for p in [0.0, 0.5, 1.0] {
            let times: Vec<f64> = (1..200).map(|i| i as f64 * 5.0).collect();
            let amps = times.iter().map(|t: &f64| 3.0 * t.powf(p)).collect();
            let s = EnvelopeSeries { node: NodeIndex::ORIGIN, times, amplitudes: amps };
            let fit = growth_exponent(&s, (100.0, 900.0)).unwrap();
            assert!((fit.exponent - p).abs() < 1e-6);
            assert!((fit.r_squared - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn growth_rejects_zero_amplitude() {
        let s = EnvelopeSeries { node: NodeIndex::ORIGIN, times: (1..30).map(f64::from).collect(), amplitudes: vec![0.0; 29] };
        assert!(growth_exponent(&s, (1.0, 30.0)).is_err());
    }

    fn synthetic_snapshot(spec: &LatticeSpec, r: i64, f: impl Fn(f64, f64) -> f64) -> Snapshot {
        let w = Window::new(-r, r, -r, r);
        let mut field = FieldState::zeros(spec, w, Boundary::Fixed);
        field.t = 100.0;
        let envelope: Vec<Vec<f64>> = (0..spec.family.sublattices())
            .map(|s| {
                (0..w.cells())
                    .map(|off| {
                        let (m, n) = w.cell_at(off);
                        let (x, y) = spec.node_position(NodeIndex { m, n, sub: Sublattice::from_index(s) }).unwrap();
                        f(x, y)
                    })
                    .collect()
            })
            .collect();
        Snapshot { t: 100.0, field, envelope }
    }

    #[test]
    fn beaming_finds_diagonal_rays() {
        let spec = LatticeSpec::scl();
        let snap = synthetic_snapshot(&spec, 60, |x, y| if (x.abs() - y.abs()).abs() < 1.5 { 0.5 } else { 0.01 });
        let map = beaming_map(&spec, &snap, &SourceSpec::kinematic(2.0), &BeamingParams::default()).unwrap();
        assert_eq!(map.rays.len(), 4, "{:?}", map.rays);
        for (r, want) in map.rays.iter().zip([45.0f64, 135.0, 225.0, 315.0]) {
            assert!(angle_distance(*r, want.to_radians()) < 3f64.to_radians());
        }
    }

    #[test]
    fn beaming_isotropic_and_empty() {
        let spec = LatticeSpec::scl();
        let snap = synthetic_snapshot(&spec, 40, |x, y| 1.0 / (1.0 + 0.05 * x.hypot(y)));
        let map = beaming_map(&spec, &snap, &SourceSpec::kinematic(2.0), &BeamingParams::default()).unwrap();
        assert!(map.rays.is_empty());
        assert!(!map.mask.is_empty());
        let quiet = synthetic_snapshot(&spec, 40, |_, _| 0.0);
        let map = beaming_map(&spec, &quiet, &SourceSpec::kinematic(2.0), &BeamingParams::default()).unwrap();
        assert!(map.rays.is_empty() && map.mask.is_empty());
    }

    #[test]
    fn front_scaling_identical() {
        let spec = LatticeSpec::msl1d();
        let w = Window::new(-100, 100, 0, 0);
        let mut field = FieldState::zeros(&spec, w, Boundary::Fixed);
        field.t = 400.0;
        let env = vec![(0..w.cells()).map(|i| (-(i as f64 - 100.0).abs() / 10.0).exp()).collect()];
        let s = Snapshot { t: 400.0, field, envelope: env };
        assert_eq!(front_scaling(&[s.clone(), s]).unwrap(), 0.0);
    }

    #[test]
    fn ratio_of_equal_series_is_one() {
        let mut u = probe(|t| (2.0 * t).sin(), 50.0, 0.01);
        let mut v = u.clone();
        u.node = NodeIndex::u(7, 0);
        v.node = NodeIndex::v(7, 0);
        let r = sublattice_ratio(&LatticeSpec::hcl(), &u, &v, 2.0).unwrap();
        assert!(r.ratios.iter().all(|&x| x == 1.0));
        assert!(sublattice_ratio(&LatticeSpec::scl(), &u, &v, 2.0).is_err());
    }
}
