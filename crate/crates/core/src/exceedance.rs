//! Rate function, tail and sum-density formulas, and mixture approximations
//! of the law of `X_1` given `S_n ≥ n a_n`.

use crate::error::{Error, Result};
use crate::gibbs::{fast_growth_approx, fast_growth_params_with_tilt, FastGrowthParams};
use crate::model::DensityModel;
use crate::quad::{gauss_legendre, integrate_panels, Frame, QuadTol};
use crate::special::LN_SQRT_2PI;
use crate::tilt::{solve_tilt, tilt_moments, tilted_density, TiltParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// `I(x) = x t - ln Φ(t)` with `m(t) = x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub x: f64,
    pub t: f64,
    pub rate: f64,
    /// `s(t)`.
    pub s: f64,
}

impl RatePoint {
    fn from_tilt(tp: &TiltParams) -> Self {
        RatePoint {
            x: tp.a,
            t: tp.t,
            rate: tp.a * tp.t - tp.log_phi,
            s: tp.s(),
        }
    }
}

pub fn rate_function(model: &DensityModel, x: f64) -> Result<RatePoint> {
    let tp = solve_tilt(model, x)?;
    Ok(RatePoint {
        x,
        ..RatePoint::from_tilt(&tp)
    })
}

fn positive_tilt(model: &DensityModel, a: f64) -> Result<TiltParams> {
    let tp = solve_tilt(model, a)?;
    if !(tp.t > 0.0) {
        return Err(Error::domain(format!("a = {a} is not above the mean m(0)")));
    }
    Ok(tp)
}

/// `ln P(S_n ≥ n a) ≈ -n I(a) - ½ ln(2πn) - ln(t s(t))`.
pub fn tail_probability(model: &DensityModel, n: usize, a: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain(format!(
            "row size must be at least 2, got {n}"
        )));
    }
    let tp = positive_tilt(model, a)?;
    let r = RatePoint::from_tilt(&tp);
    let ts = r.t * r.s;
    if !(ts > 0.0 && ts.is_finite()) {
        return Err(Error::numeric(format!("t s(t) = {ts} is not positive")));
    }
    let nf = n as f64;
    Ok(-nf * r.rate - LN_SQRT_2PI - 0.5 * nf.ln() - ts.ln())
}

/// Log density of `S_n` at `n τ`: `-n I(τ) - ½ ln(2πn) - ln s(t_τ)`.
pub fn sum_density(model: &DensityModel, n: usize, tau: f64) -> Result<f64> {
    Ok(mean_density(model, n, tau)? - (n as f64).ln())
}

/// Log density of `S_n / n` at `τ`: `½ ln n - n I(τ) - ½ ln(2π) - ln s(t_τ)`.
pub fn mean_density(model: &DensityModel, n: usize, tau: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("row size must be positive"));
    }
    let r = rate_function(model, tau)?;
    let nf = n as f64;
    Ok(0.5 * nf.ln() - nf * r.rate - LN_SQRT_2PI - r.s.ln())
}

/// `c ln(n) / (√n t)` with `m(t) = a`; `c = 1` by default.
pub fn eta_window(model: &DensityModel, n: usize, a: f64) -> Result<f64> {
    eta_window_with(model, n, a, 1.0)
}

pub fn eta_window_with(model: &DensityModel, n: usize, a: f64, c: f64) -> Result<f64> {
    let tp = positive_tilt(model, a)?;
    Ok(eta_from_tilt(n, tp.t, c))
}

fn eta_from_tilt(n: usize, t: f64, c: f64) -> f64 {
    let nf = n as f64;
    c * nf.ln() / (nf.sqrt() * t)
}

/// Conditional density mixed over the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExceedanceKernel {
    /// `π^τ`, in both regimes.
    Tilted,
    /// `g_τ`, the fast-growth density at level `τ`.
    FastGrowth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceOptions {
    pub kernel: ExceedanceKernel,
    /// Constant in front of `ln(n) / (√n t)`.
    pub eta_scale: f64,
    /// Gauss–Legendre nodes in `u`, where `τ = a + η u²`.
    pub nodes: usize,
}

impl Default for ExceedanceOptions {
    fn default() -> Self {
        ExceedanceOptions {
            kernel: ExceedanceKernel::Tilted,
            eta_scale: 1.0,
            nodes: 32,
        }
    }
}

#[derive(Debug, Clone)]
enum Kernel {
    Tilted(TiltParams),
    Fast(FastGrowthParams),
}

/// One level of the mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceNode {
    pub tau: f64,
    /// Normalized mixture weight.
    pub weight: f64,
    pub tp: TiltParams,
}

/// `t s(t) e^{n I(a)} ∫_a^{a+η} κ_τ(y) e^{-n I(τ) - ln s(t_τ)} dτ`, renormalized
/// to unit mass.
#[derive(Debug, Clone)]
pub struct ExceedanceApprox {
    pub n: usize,
    pub a: f64,
    pub eta: f64,
    pub kernel: ExceedanceKernel,
    pub nodes: Vec<ExceedanceNode>,
    /// Mass of the formula as written, before renormalization.
    pub raw_mass: f64,
    /// `n · raw_mass - 1`: the formula weighs `τ` with the density of `S_n`
    /// rather than of `S_n / n`, which costs a factor `n`.
    pub prefactor_discrepancy: f64,
    kernels: Vec<Kernel>,
}

impl ExceedanceApprox {
    pub fn new(model: &DensityModel, n: usize, a: f64, opts: &ExceedanceOptions) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(format!(
                "row size must be at least 2, got {n}"
            )));
        }
        if opts.nodes == 0 || !(opts.eta_scale > 0.0) {
            return Err(Error::domain(
                "need at least one node and a positive window scale",
            ));
        }
        let tp_a = positive_tilt(model, a)?;
        let ra = RatePoint::from_tilt(&tp_a);
        let eta = eta_from_tilt(n, tp_a.t, opts.eta_scale);
        let nf = n as f64;
        let (u, w) = gauss_legendre(opts.nodes);
        let solved: Vec<(f64, f64, TiltParams, Kernel)> = u
            .par_iter()
            .zip(w.par_iter())
            .map(|(&ui, &wi)| {
                // Map [-1, 1] to [0, 1], then τ = a + η v².
                let v = 0.5 * (ui + 1.0);
                let tau = a + eta * v * v;
                let fail = |e: Error| Error::numeric(format!("exceedance node τ = {tau}: {e}"));
                let tp = solve_tilt(model, tau).map_err(fail)?;
                let r = RatePoint::from_tilt(&tp);
                let log_w = -nf * (r.rate - ra.rate) - r.s.ln() + (ra.t * ra.s).ln();
                let jac = 0.5 * wi * 2.0 * eta * v;
                let kernel = match opts.kernel {
                    ExceedanceKernel::Tilted => Kernel::Tilted(tp),
                    ExceedanceKernel::FastGrowth => {
                        Kernel::Fast(fast_growth_params_with_tilt(model, n, &tp).map_err(fail)?)
                    }
                };
                Ok((tau, jac * log_w.exp(), tp, kernel))
            })
            .collect::<Result<_>>()?;
        let raw_mass: f64 = solved.iter().map(|s| s.1).sum();
        if !(raw_mass > 0.0 && raw_mass.is_finite()) {
            return Err(Error::numeric(format!(
                "mixture mass {raw_mass} is not positive"
            )));
        }
        let mut nodes = Vec::with_capacity(solved.len());
        let mut kernels = Vec::with_capacity(solved.len());
        for (tau, wt, tp, k) in solved {
            nodes.push(ExceedanceNode {
                tau,
                weight: wt / raw_mass,
                tp,
            });
            kernels.push(k);
        }
        Ok(ExceedanceApprox {
            n,
            a,
            eta,
            kernel: opts.kernel,
            nodes,
            raw_mass,
            prefactor_discrepancy: nf * raw_mass - 1.0,
            kernels,
        })
    }

    /// Renormalized mixture density at `y`.
    pub fn density(&self, model: &DensityModel, y: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.kernels)
            .map(|(nd, k)| {
                nd.weight
                    * match k {
                        Kernel::Tilted(tp) => tilted_density(model, tp, y),
                        Kernel::Fast(p) => fast_growth_approx(p, model, y),
                    }
            })
            .sum()
    }
}

/// The renormalized mixture at `y` with default options.
pub fn exceedance_approx(model: &DensityModel, n: usize, a: f64, y: f64) -> Result<f64> {
    Ok(ExceedanceApprox::new(model, n, a, &ExceedanceOptions::default())?.density(model, y))
}

/// Mass of the weight `e^{-n I(τ)} / s(t_τ)` beyond `a + η` relative to its
/// mass on `[a, a + η]`. Integrated in `t`, where `dτ = s² dt`.
pub fn window_tail_ratio(model: &DensityModel, n: usize, a: f64, eta: f64) -> Result<f64> {
    let tp_a = positive_tilt(model, a)?;
    let tp_e = solve_tilt(model, a + eta)?;
    let nf = n as f64;
    let ra = RatePoint::from_tilt(&tp_a);
    let weight = |t: f64| -> f64 {
        match tilt_moments(model, t) {
            Ok(tp) => {
                let r = RatePoint::from_tilt(&tp);
                (-nf * (r.rate - ra.rate)).exp() * tp.s()
            }
            Err(_) => f64::NAN,
        }
    };
    let tol = QuadTol {
        rel: 1e-10,
        tail: 1e-14,
        ..QuadTol::default()
    };
    let p1 = crate::quad::integrate(weight, tp_a.t, tp_e.t, &tol)?;
    let scale = 1.0 / (nf * tp_e.t.max(1e-3) * tp_e.s2);
    let frame = Frame {
        center: tp_e.t,
        scale,
        lo: tp_e.t,
        hi: f64::INFINITY,
    };
    let p2 = integrate_panels(&|t: f64| [weight(t)], &frame, &tol)?.value[0];
    Ok(p2 / p1)
}
