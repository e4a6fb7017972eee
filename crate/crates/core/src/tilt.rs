//! Exponential tilting: log-MGF, tilted moments, the inverse problem
//! `m(t) = a`, tilted densities and the asymptotic moment equivalents.
//!
//! Every integral is taken around the mode `psi(t)` of `e^{tx} p(x)` in units
//! of `1/sqrt(h'(psi(t)))`, with the exponent expressed as an increment from
//! the mode so that nothing overflows when `t x` runs into the hundreds.

use crate::error::{Error, Result};
use crate::model::DensityModel;
use crate::quad::{integrate_panels, QuadTol};
use crate::roots::solve_increasing;
use crate::special::std_normal_moment;
use serde::{Deserialize, Serialize};

/// Relative tolerance of [`solve_tilt`] on `m(t) - a`.
pub const SOLVE_REL_TOL: f64 = 1e-10;

/// A solved tilt: parameter, tilted moments and the asymptotic equivalents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltParams {
    pub t: f64,
    /// Tilted mean `m(t)`.
    pub a: f64,
    pub s2: f64,
    pub mu3: f64,
    /// `ln Φ(t)`.
    pub log_phi: f64,
    /// `psi(t)`, `psi'(t)`, `psi''(t)`; NaN where `t` is below the range of `h`.
    pub psi_val: f64,
    pub psi_d1: f64,
    pub psi_d2: f64,
}

impl TiltParams {
    pub fn s(&self) -> f64 {
        self.s2.sqrt()
    }

    /// `mu3 / s^3`.
    pub fn skewness(&self) -> f64 {
        self.mu3 / (self.s2 * self.s())
    }
}

/// Raw tilted integrals around the Laplace centre.
struct Moments {
    log_phi: f64,
    mean: f64,
    var: f64,
    mu3: f64,
}

fn moments(model: &DensityModel, t: f64, with_moments: bool) -> Result<Moments> {
    if !t.is_finite() {
        return Err(Error::domain(format!(
            "tilt parameter must be finite, got {t}"
        )));
    }
    let tf = model.tilt_frame(t);
    let (c, sc) = (tf.center, tf.scale);
    let frame = tf.local_frame();
    let tol = QuadTol::default();
    let (z, m1, m2, m3) = if with_moments {
        let f = |d: f64| {
            let w = tf.weight(d);
            let v = d / sc;
            [w, v * w, v * v * w, v * v * v * w]
        };
        let e = integrate_panels(&f, &frame, &tol)?;
        let z = e.value[0];
        (z, e.value[1] / z, e.value[2] / z, e.value[3] / z)
    } else {
        let f = |d: f64| [tf.weight(d)];
        (integrate_panels(&f, &frame, &tol)?.value[0], 0.0, 0.0, 0.0)
    };
    let log_phi = tf.log_partition(z)? + model.log_norm();
    if !log_phi.is_finite() {
        return Err(Error::numeric(format!("log MGF is not finite at t = {t}")));
    }
    let var = (m2 - m1 * m1) * sc * sc;
    let mu3 = (m3 - 3.0 * m1 * m2 + 2.0 * m1 * m1 * m1) * sc * sc * sc;
    Ok(Moments {
        log_phi,
        mean: c + m1 * sc,
        var,
        mu3,
    })
}

/// `ln Φ(t) = ln ∫ e^{tx} p(x) dx`.
pub fn log_mgf(model: &DensityModel, t: f64) -> Result<f64> {
    Ok(moments(model, t, false)?.log_phi)
}

/// Mean, variance and third central moment of the tilted density `π_t`.
pub fn tilt_moments(model: &DensityModel, t: f64) -> Result<TiltParams> {
    let m = moments(model, t, true)?;
    if !(m.var > 0.0) {
        return Err(Error::numeric(format!(
            "tilted variance {} is not positive at t = {t}",
            m.var
        )));
    }
    let (psi_val, psi_d1, psi_d2) = match model.psi_values(t) {
        Ok(p) => (p.psi, p.d1, p.d2),
        Err(_) => (f64::NAN, f64::NAN, f64::NAN),
    };
    Ok(TiltParams {
        t,
        a: m.mean,
        s2: m.var,
        mu3: m.mu3,
        log_phi: m.log_phi,
        psi_val,
        psi_d1,
        psi_d2,
    })
}

/// Solves `m(t) = a` by safeguarded Newton from `t0 = h(a)`.
pub fn solve_tilt(model: &DensityModel, a: f64) -> Result<TiltParams> {
    if !a.is_finite() {
        return Err(Error::domain(format!(
            "target mean must be finite, got {a}"
        )));
    }
    if a <= model.support_lo() {
        return Err(Error::domain(format!(
            "a = {a} is outside the range of m (above {})",
            model.support_lo()
        )));
    }
    let h0 = model.h(a);
    if !(h0 * a).is_finite() && h0 > 0.0 {
        return Err(Error::Range(format!(
            "the tilt solving m(t) = {a} is beyond floating-point range (h(a) = {h0:e})"
        )));
    }
    let t0 = if h0.is_finite() { h0 } else { 0.0 };
    let mut last: Option<TiltParams> = None;
    let t = solve_increasing(
        |t| {
            let tp = tilt_moments(model, t)?;
            last = Some(tp);
            Ok((tp.a - a, tp.s2))
        },
        t0,
        (f64::NEG_INFINITY, f64::INFINITY),
        |_, fx, _| fx.abs() <= 0.1 * SOLVE_REL_TOL * a.abs(),
        200,
    )
    .map_err(|e| match e {
        Error::Numeric(msg) => Error::numeric(format!("solve_tilt(a = {a}): {msg}")),
        other => other,
    })?;
    match last {
        Some(tp) if tp.t == t => Ok(tp),
        _ => tilt_moments(model, t),
    }
}

/// `ln π_t(x)`; `-∞` below the support.
pub fn tilted_log_density(model: &DensityModel, tp: &TiltParams, x: f64) -> f64 {
    tp.t * x + model.log_density_unchecked(x) - tp.log_phi
}

/// `π_t(x) = e^{tx} p(x) / Φ(t)`; zero below the support.
pub fn tilted_density(model: &DensityModel, tp: &TiltParams, x: f64) -> f64 {
    tilted_log_density(model, tp, x).exp()
}

/// Density of `(X_t - m)/s` for `X_t ~ π_t`: `s π_t(s u + m)`.
pub fn normalized_tilted_density(model: &DensityModel, tp: &TiltParams, u: f64) -> f64 {
    let s = tp.s();
    s * tilted_density(model, tp, s * u + tp.a)
}

/// Asymptotic equivalent of the `j`-th central tilted moment: `psi'` for
/// `j = 2`, `psi''` for `j = 3`, and for `j > 3` the normal-type expressions
/// in `s = sqrt(psi')` and `mu3 = psi''`.
pub fn asymptotic_moments(model: &DensityModel, t: f64, j: u32) -> Result<f64> {
    if j < 2 {
        return Err(Error::domain(format!(
            "moment order must be at least 2, got {j}"
        )));
    }
    let p = model.psi_values(t)?;
    Ok(asymptotic_moment_from(p.d1, p.d2, j))
}

/// The `j`-th moment equivalent given `s^2` and `mu3`.
pub fn asymptotic_moment_from(s2: f64, mu3: f64, j: u32) -> f64 {
    let s = s2.sqrt();
    match j {
        2 => s2,
        3 => mu3,
        _ if j.is_multiple_of(2) => std_normal_moment(j) * s.powi(j as i32),
        _ => {
            (std_normal_moment(j + 3) - 3.0 * j as f64 * std_normal_moment(j - 1))
                * mu3
                * s.powi(j as i32 - 3)
                / 6.0
        }
    }
}

/// `mu3(t) / s(t)^3`.
pub fn skewness_ratio(model: &DensityModel, t: f64) -> Result<f64> {
    Ok(tilt_moments(model, t)?.skewness())
}

/// Tilted variance as a function of the tilted mean, `V = s² ∘ m⁻¹`.
pub fn variance_function(model: &DensityModel, x: f64) -> Result<f64> {
    Ok(solve_tilt(model, x)?.s2)
}
