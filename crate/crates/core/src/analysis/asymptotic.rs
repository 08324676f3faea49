//! Long-time form of the chain driven at its band edge by a unit point force,
//! `u_m(t) ~ sqrt(t) [F2(lambda) sin(2t - pi m) - F1(lambda) cos(2t - pi m)]`
//! with `lambda = 2|m| / sqrt(t)`.
//!
//! The profile functions come from the stationary-phase expansion around the
//! band edge. With `a = lambda^2 / 4`,
//! `Phi(a) = int_1^inf v^(-3/2) e^(i a v) dv` and
//! `F1 + i F2 = e^(-i pi/4) Phi / (4 sqrt(pi))`.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;

use crate::error::{LatticeError, Result};

/// Shape functions of the resonant response; replaceable so that other
/// normalizations can be compared against simulations.
pub trait ResonantProfile {
    fn f1(&self, lambda: f64) -> f64;
    fn f2(&self, lambda: f64) -> f64;
}

/// Unit force `sin(2t)` on node 0 of a unit chain.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitForceProfile;

/// `int_0^x e^(i y^2) dy` by composite Simpson; the integrand is smooth and
/// `x` stays moderate for the profiles of interest.
fn fresnel(x: f64) -> Complex64 {
    if x == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let n = 2 * ((200.0 * x.abs().max(1.0) * x.abs().max(1.0)).ceil() as usize).max(200);
    let h = x / n as f64;
    let f = |y: f64| Complex64::from_polar(1.0, y * y);
    let mut s = f(0.0) + f(x);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += f(k as f64 * h) * w;
    }
    s * (h / 3.0)
}

impl UnitForceProfile {
    fn g(&self, lambda: f64) -> Complex64 {
        let a = 0.25 * lambda * lambda;
        let i = Complex64::i();
        let sa = a.sqrt();
        // integrate by parts once, the remainder is a Fresnel integral
        let tail = Complex64::new(1.0, 1.0) * (PI / 2.0).sqrt() * 0.5 - fresnel(sa);
        let phi = Complex64::from_polar(2.0, a) + i * 4.0 * sa * tail;
        Complex64::from_polar(1.0, -FRAC_PI_4) * phi / (4.0 * PI.sqrt())
    }
}

impl ResonantProfile for UnitForceProfile {
    fn f1(&self, lambda: f64) -> f64 {
        self.g(lambda).re
    }

    fn f2(&self, lambda: f64) -> f64 {
        self.g(lambda).im
    }
}

/// Asymptotic displacement of chain node `m` at time `t`.
pub fn asymptotic_1d(m: i64, t: f64) -> Result<f64> {
    asymptotic_1d_with(&UnitForceProfile, m, t)
}

pub fn asymptotic_1d_with(profile: &impl ResonantProfile, m: i64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(LatticeError::InvalidInput(format!("t must be positive, got {t}")));
    }
    let lambda = 2.0 * m.unsigned_abs() as f64 / t.sqrt();
    let phase = 2.0 * t - PI * m as f64;
    Ok(t.sqrt() * (profile.f2(lambda) * phase.sin() - profile.f1(lambda) * phase.cos()))
}

/// Envelope `sqrt(t) sqrt(F1^2 + F2^2)` of the asymptotic form.
pub fn asymptotic_envelope(m: i64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(LatticeError::InvalidInput(format!("t must be positive, got {t}")));
    }
    let p = UnitForceProfile;
    let lambda = 2.0 * m.unsigned_abs() as f64 / t.sqrt();
    Ok(t.sqrt() * p.f1(lambda).hypot(p.f2(lambda)))
}
