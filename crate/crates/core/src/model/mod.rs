//! Light-tailed densities on the half line, `p(x) = exp(-(g(x) - q(x)))`,
//! with `h = g'` regularly or rapidly varying.
//!
//! Three analytic models are built in (Weibull, the exp-exponential density,
//! the half-Gaussian); user models are either tabulated `(x, g, q)` triples
//! interpolated by cubic splines or sets of closures.

mod spec;
mod spline;

pub use spec::ModelSpec;
pub use spline::CubicSpline;

use crate::error::{Error, Result};
use crate::quad::{integrate_panels, Frame, QuadTol};
use crate::roots::solve_increasing;
use crate::special::{mills_ratio, std_normal_log_cdf};
use std::fmt;
use std::sync::Arc;

/// Default probe points for the finite-sample checks of asymptotic conditions.
pub const DEFAULT_PROBES: [f64; 4] = [10.0, 100.0, 1000.0, 10000.0];

/// Shape of the variation of `h` at infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VariationKind {
    /// `h(x) = x^beta l(x)` with `l` slowly varying.
    RegularRV { beta: f64 },
    /// `psi = h^{-1}` slowly varying.
    Rapid,
}

/// Variation class metadata. The Karamata function `epsilon` is exposed by
/// [`DensityModel::epsilon`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationClass {
    pub kind: VariationKind,
    pub karamata_c: f64,
}

/// Analytic tilt quantities for oracle models.
#[derive(Clone, Copy)]
pub struct ClosedForms {
    pub log_mgf: fn(f64) -> f64,
    pub mean: fn(f64) -> f64,
    pub variance: fn(f64) -> f64,
    pub mu3: fn(f64) -> f64,
    pub psi: fn(f64) -> f64,
}

impl fmt::Debug for ClosedForms {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ClosedForms { .. }")
    }
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Closures describing a user-defined model.
#[derive(Clone)]
pub struct CustomFns {
    pub g: RealFn,
    pub q: RealFn,
    pub h: RealFn,
    pub h_prime: RealFn,
    pub h_second: RealFn,
    /// Karamata epsilon; derived numerically from `h` when absent.
    pub epsilon: Option<RealFn>,
}

#[derive(Clone)]
struct Tabulated {
    g: CubicSpline,
    q: CubicSpline,
    // g, g' and curvature used for the quadratic continuation past the table.
    end: [f64; 3],
}

impl Tabulated {
    fn g_all(&self, x: f64) -> [f64; 4] {
        let last = self.g.last_x();
        if x <= last {
            return self.g.eval_all(x);
        }
        let d = x - last;
        let [g0, h0, c] = self.end;
        [g0 + h0 * d + 0.5 * c * d * d, h0 + c * d, c, 0.0]
    }

    fn q(&self, x: f64) -> f64 {
        let x = x.clamp(self.q.first_x(), self.q.last_x());
        self.q.eval_all(x)[0]
    }
}

#[derive(Clone)]
enum Shape {
    Weibull { k: f64 },
    ExpExponential,
    HalfGaussian,
    Tabulated(Arc<Tabulated>),
    Custom(Arc<CustomFns>),
}

/// A density of the class `exp(-(g - q))` on `[support_lo, ∞)`, normalized.
///
/// Immutable after construction and cheap to clone.
#[derive(Clone)]
pub struct DensityModel {
    name: String,
    shape: Shape,
    variation: VariationClass,
    support_lo: f64,
    log_norm: f64,
    /// `h` is strictly increasing on `(mono_lo, ∞)`.
    mono_lo: f64,
    /// Root of `h` (beyond it `h > 0`).
    x0: f64,
    q_bound: f64,
    probes: Vec<f64>,
}

impl fmt::Debug for DensityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityModel")
            .field("name", &self.name)
            .field("variation", &self.variation)
            .field("support_lo", &self.support_lo)
            .field("log_norm", &self.log_norm)
            .field("x0", &self.x0)
            .finish()
    }
}

/// `psi(t)` together with its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiValues {
    pub psi: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Outcome of one sampled invariant check.
#[derive(Debug, Clone)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn half_gaussian_log_mgf(t: f64) -> f64 {
    std::f64::consts::LN_2 + 0.5 * t * t + std_normal_log_cdf(t)
}

fn half_gaussian_mean(t: f64) -> f64 {
    t + mills_ratio(t)
}

fn half_gaussian_variance(t: f64) -> f64 {
    let l = mills_ratio(t);
    1.0 - t * l - l * l
}

fn half_gaussian_mu3(t: f64) -> f64 {
    // Derivative of the variance: λ' = -λ(t + λ).
    let l = mills_ratio(t);
    let dl = -l * (t + l);
    -l - t * dl - 2.0 * l * dl
}

fn identity(t: f64) -> f64 {
    t
}

impl DensityModel {
    /// Weibull density `k x^{k-1} exp(-x^k)`, written with
    /// `g(x) = x^k - (k-1) ln x` and `q = 0`.
    pub fn weibull(k: f64) -> Result<Self> {
        if !(k > 1.0 && k.is_finite()) {
            return Err(Error::Model(format!(
                "Weibull shape must exceed 1 to stay in the light-tail class, got {k}"
            )));
        }
        Ok(DensityModel {
            name: format!("weibull({k})"),
            shape: Shape::Weibull { k },
            // l(1) = k - (k-1) = 1.
            variation: VariationClass {
                kind: VariationKind::RegularRV { beta: k - 1.0 },
                karamata_c: 1.0,
            },
            support_lo: 0.0,
            log_norm: k.ln(),
            mono_lo: 0.0,
            x0: ((k - 1.0) / k).powf(1.0 / k),
            q_bound: 0.0,
            probes: DEFAULT_PROBES.to_vec(),
        })
    }

    /// The rapidly varying density `c exp(-e^{x-1})` on `x ≥ 0`.
    pub fn exp_exponential() -> Self {
        let mut model = DensityModel {
            name: "exp_exponential".into(),
            shape: Shape::ExpExponential,
            variation: VariationClass {
                kind: VariationKind::Rapid,
                karamata_c: 1.0,
            },
            support_lo: 0.0,
            log_norm: 0.0,
            mono_lo: 0.0,
            x0: 0.0,
            q_bound: 0.0,
            probes: DEFAULT_PROBES.to_vec(),
        };
        model.log_norm = -model
            .log_partition_unnormalized(0.0)
            .expect("exp-exponential normalizer is finite");
        model
    }

    /// Half-normal density `sqrt(2/pi) exp(-x^2/2)` with closed-form tilts.
    pub fn half_gaussian() -> Self {
        DensityModel {
            name: "half_gaussian".into(),
            shape: Shape::HalfGaussian,
            variation: VariationClass {
                kind: VariationKind::RegularRV { beta: 1.0 },
                karamata_c: 1.0,
            },
            support_lo: 0.0,
            log_norm: 0.5 * (2.0 / std::f64::consts::PI).ln(),
            mono_lo: 0.0,
            x0: 0.0,
            q_bound: 0.0,
            probes: DEFAULT_PROBES.to_vec(),
        }
    }

    /// Model from a table of `(x, g(x), q(x))` rows interpolated by cubic
    /// splines. Past the last row `g` continues quadratically and `q` is held
    /// constant. `q_bound` is the declared bound on `|q|`.
    pub fn tabulated(rows: &[(f64, f64, f64)], kind: VariationKind, q_bound: f64) -> Result<Self> {
        let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let gs: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let qs: Vec<f64> = rows.iter().map(|r| r.2).collect();
        if xs.first().is_some_and(|&x| x < 0.0) {
            return Err(Error::Model("tabulated support must lie in [0, ∞)".into()));
        }
        let g = CubicSpline::new(&xs, &gs)?;
        let q = CubicSpline::new(&xs, &qs)?;
        let [g_end, h_end, c_end, _] = g.eval_all(g.last_x());
        if !(c_end > 0.0) || !(h_end > 0.0) {
            return Err(Error::Model(
                "g must be increasing and convex at the end of the table".into(),
            ));
        }
        let table = Tabulated {
            g,
            q,
            end: [g_end, h_end, c_end],
        };
        let lo = xs[0];
        let h = |x: f64| table.g_all(x)[1];
        let mono_lo = mono_threshold(&|x| table.g_all(x)[2], lo, table.g.last_x());
        let x0 = if h(mono_lo) >= 0.0 {
            mono_lo
        } else {
            bisect_root(&h, mono_lo, table.g.last_x() + 1.0)
        };
        let max_q = qs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if max_q > q_bound {
            return Err(Error::Model(format!(
                "declared bound {q_bound} on |q| is below the tabulated maximum {max_q}"
            )));
        }
        DensityModel::finish_user_model(
            "tabulated".into(),
            Shape::Tabulated(Arc::new(table)),
            kind,
            lo,
            mono_lo,
            x0,
            q_bound,
        )
    }

    /// Model from closures. `mono_lo` is the point beyond which `h` is
    /// strictly increasing.
    pub fn custom(
        name: impl Into<String>,
        fns: CustomFns,
        kind: VariationKind,
        support_lo: f64,
        mono_lo: f64,
        q_bound: f64,
    ) -> Result<Self> {
        if !(support_lo >= 0.0) || mono_lo < support_lo {
            return Err(Error::Model("need 0 ≤ support_lo ≤ mono_lo".into()));
        }
        let h = fns.h.clone();
        let x0 = if h(mono_lo) >= 0.0 {
            mono_lo
        } else {
            let mut hi = mono_lo + 1.0;
            while h(hi) < 0.0 {
                hi = mono_lo + 2.0 * (hi - mono_lo);
                if !hi.is_finite() {
                    return Err(Error::Model("h never becomes positive".into()));
                }
            }
            bisect_root(&|x| h(x), mono_lo, hi)
        };
        DensityModel::finish_user_model(
            name.into(),
            Shape::Custom(Arc::new(fns)),
            kind,
            support_lo,
            mono_lo,
            x0,
            q_bound,
        )
    }

    fn finish_user_model(
        name: String,
        shape: Shape,
        kind: VariationKind,
        support_lo: f64,
        mono_lo: f64,
        x0: f64,
        q_bound: f64,
    ) -> Result<Self> {
        let mut model = DensityModel {
            name,
            shape,
            variation: VariationClass {
                kind,
                karamata_c: 1.0,
            },
            support_lo,
            log_norm: 0.0,
            mono_lo,
            x0,
            q_bound,
            probes: DEFAULT_PROBES.to_vec(),
        };
        model.variation.karamata_c = match kind {
            VariationKind::RegularRV { .. } => model.h(1.0_f64.max(x0)),
            VariationKind::Rapid => model.psi(1.0).unwrap_or(f64::NAN),
        };
        model.log_norm = -model.log_partition_unnormalized(0.0)?;
        if !model.log_norm.is_finite() {
            return Err(Error::Model("density cannot be normalized".into()));
        }
        Ok(model)
    }

    /// Replaces the probe grid used by [`DensityModel::check_invariants`].
    pub fn with_probes(mut self, probes: Vec<f64>) -> Self {
        self.probes = probes;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn variation(&self) -> VariationClass {
        self.variation
    }

    pub fn support_lo(&self) -> f64 {
        self.support_lo
    }

    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    /// Root of `h`; the monotonicity checks apply beyond it.
    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn q_bound(&self) -> f64 {
        self.q_bound
    }

    pub fn probes(&self) -> &[f64] {
        &self.probes
    }

    pub fn closed_forms(&self) -> Option<ClosedForms> {
        match self.shape {
            Shape::HalfGaussian => Some(ClosedForms {
                log_mgf: half_gaussian_log_mgf,
                mean: half_gaussian_mean,
                variance: half_gaussian_variance,
                mu3: half_gaussian_mu3,
                psi: identity,
            }),
            _ => None,
        }
    }

    pub fn g(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Weibull { k } => x.powf(*k) - (k - 1.0) * x.ln(),
            Shape::ExpExponential => (x - 1.0).exp(),
            Shape::HalfGaussian => 0.5 * x * x,
            Shape::Tabulated(t) => t.g_all(x)[0],
            Shape::Custom(c) => (c.g)(x),
        }
    }

    pub fn q(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Tabulated(t) => t.q(x),
            Shape::Custom(c) => (c.q)(x),
            _ => 0.0,
        }
    }

    pub fn h(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Weibull { k } => k * x.powf(k - 1.0) - (k - 1.0) / x,
            Shape::ExpExponential => (x - 1.0).exp(),
            Shape::HalfGaussian => x,
            Shape::Tabulated(t) => t.g_all(x)[1],
            Shape::Custom(c) => (c.h)(x),
        }
    }

    pub fn h_prime(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Weibull { k } => k * (k - 1.0) * x.powf(k - 2.0) + (k - 1.0) / (x * x),
            Shape::ExpExponential => (x - 1.0).exp(),
            Shape::HalfGaussian => 1.0,
            Shape::Tabulated(t) => t.g_all(x)[2],
            Shape::Custom(c) => (c.h_prime)(x),
        }
    }

    pub fn h_second(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Weibull { k } => {
                k * (k - 1.0) * (k - 2.0) * x.powf(k - 3.0) - 2.0 * (k - 1.0) / (x * x * x)
            }
            Shape::ExpExponential => (x - 1.0).exp(),
            Shape::HalfGaussian => 0.0,
            Shape::Tabulated(t) => t.g_all(x)[3],
            Shape::Custom(c) => (c.h_second)(x),
        }
    }

    /// `g(c + d) - g(c)`, evaluated without cancellation for the built-ins.
    pub fn g_increment(&self, c: f64, d: f64) -> f64 {
        match &self.shape {
            Shape::Weibull { k } if c > 0.0 => {
                let r = (d / c).ln_1p();
                c.powf(*k) * (k * r).exp_m1() - (k - 1.0) * r
            }
            Shape::ExpExponential => (c - 1.0).exp() * d.exp_m1(),
            Shape::HalfGaussian => d * (c + 0.5 * d),
            _ => self.g(c + d) - self.g(c),
        }
    }

    /// `g(c + d) - g(c) - h(c) d`, the remainder after the tangent at `c`.
    /// Stable for the built-ins when `h(c)` is huge and `d` tiny.
    pub fn g_remainder(&self, c: f64, d: f64) -> f64 {
        match &self.shape {
            Shape::Weibull { k } if c > 0.0 => {
                let u = d / c;
                let l = u.ln_1p();
                let pow_part = expm1_minus_x(k * l) + k * log1p_minus_x(u);
                c.powf(*k) * pow_part - (k - 1.0) * log1p_minus_x(u)
            }
            Shape::ExpExponential => (c - 1.0).exp() * expm1_minus_x(d),
            Shape::HalfGaussian => 0.5 * d * d,
            _ => self.g(c + d) - self.g(c) - self.h(c) * d,
        }
    }

    /// Karamata epsilon: of `l(x) = h(x)/x^beta` in the regular case, of
    /// `psi` (at argument `t`) in the rapid case.
    pub fn epsilon(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Weibull { k } => k * (k - 1.0) / (k * x.powf(*k) - (k - 1.0)),
            Shape::ExpExponential => 1.0 / (x.ln() + 1.0),
            Shape::HalfGaussian => 0.0,
            Shape::Custom(c) if c.epsilon.is_some() => (c.epsilon.as_ref().unwrap())(x),
            _ => match self.variation.kind {
                VariationKind::RegularRV { beta } => x * self.h_prime(x) / self.h(x) - beta,
                VariationKind::Rapid => match self.psi_values(x) {
                    Ok(p) => x * p.d1 / p.psi,
                    Err(_) => f64::NAN,
                },
            },
        }
    }

    /// `ln p(x)`, or `-∞` below the support.
    pub fn log_density_unchecked(&self, x: f64) -> f64 {
        if !(x >= self.support_lo) {
            return f64::NEG_INFINITY;
        }
        let v = -(self.g(x) - self.q(x)) + self.log_norm;
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    /// `ln p(x) = -(g(x) - q(x)) + log_norm`.
    pub fn eval_log_density(&self, x: f64) -> Result<f64> {
        if !(x >= self.support_lo) {
            return Err(Error::domain(format!(
                "x = {x} lies below the support lower bound {}",
                self.support_lo
            )));
        }
        Ok(self.log_density_unchecked(x))
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density_unchecked(x).exp()
    }

    /// Infimum of `h` over the range where it is increasing; `psi` is defined above it.
    pub fn h_floor(&self) -> f64 {
        match self.shape {
            Shape::Weibull { .. } => f64::NEG_INFINITY,
            _ => self.h(self.mono_lo),
        }
    }

    /// `psi(t) = h^{-1}(t)`.
    pub fn psi(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::domain(format!(
                "psi needs a finite argument, got {t}"
            )));
        }
        if !(t > self.h_floor()) {
            return Err(Error::domain(format!(
                "t = {t} is below the range of h (infimum {})",
                self.h_floor()
            )));
        }
        match self.shape {
            Shape::Weibull { k: 2.0 } => {
                let r = (t * t + 8.0).sqrt();
                Ok(if t >= 0.0 {
                    (t + r) / 4.0
                } else {
                    2.0 / (r - t)
                })
            }
            Shape::ExpExponential => Ok(t.ln() + 1.0),
            Shape::HalfGaussian => Ok(t),
            Shape::Weibull { k } => {
                let guess = if t > 0.0 {
                    (t / k).powf(1.0 / (k - 1.0)).max(1e-3)
                } else {
                    1.0
                };
                self.invert_h(t, guess)
            }
            _ => self.invert_h(t, self.mono_lo + 1.0),
        }
    }

    fn invert_h(&self, t: f64, guess: f64) -> Result<f64> {
        solve_increasing(
            |x| Ok((self.h(x) - t, self.h_prime(x))),
            guess,
            (self.mono_lo, f64::INFINITY),
            |x, fx, dfx| (fx / dfx).abs() <= 1e-14 * x.abs() || fx == 0.0,
            400,
        )
        .map_err(|e| Error::numeric(format!("cannot invert h at t = {t}: {e}")))
    }

    /// `psi(t)`, `psi'(t) = 1/h'(psi)` and `psi''(t) = -h''(psi) psi'^3`.
    pub fn psi_values(&self, t: f64) -> Result<PsiValues> {
        let psi = self.psi(t)?;
        let d1 = 1.0 / self.h_prime(psi);
        let d2 = -self.h_second(psi) * d1 * d1 * d1;
        Ok(PsiValues { psi, d1, d2 })
    }

    /// Local coordinates for integrals of `e^{tx} p(x)`: centred at the mode
    /// `psi(t)` (or the support edge when `t` is below the range of `h`) with
    /// width `1/sqrt(h'(mode))`.
    pub(crate) fn tilt_frame(&self, t: f64) -> TiltFrame<'_> {
        let mut center = if t > self.h_floor() {
            self.psi(t).unwrap_or(self.support_lo)
        } else {
            self.support_lo
        };
        let hp = self.h_prime(center);
        let scale = if hp > 0.0 && hp.is_finite() {
            1.0 / hp.sqrt()
        } else {
            1.0
        };
        // Keep the reference point where the log density is finite.
        let mut step = scale;
        while !self.log_density_unchecked(center).is_finite() && step.is_finite() {
            center = self.support_lo + step;
            step *= 2.0;
        }
        let hc = self.h(center);
        // At the mode t - h(c) is pure rounding; keeping it would inject an
        // error of order eps * t into the exponent.
        let mut slope = t - hc;
        if slope.abs() <= 64.0 * f64::EPSILON * t.abs().max(hc.abs()) {
            slope = 0.0;
        }
        TiltFrame {
            model: self,
            t,
            center,
            scale,
            slope,
            qc: self.q(center),
        }
    }

    /// `ln ∫ e^{tx - g(x) + q(x)} dx`, i.e. the log MGF before normalization.
    pub(crate) fn log_partition_unnormalized(&self, t: f64) -> Result<f64> {
        let tf = self.tilt_frame(t);
        let f = |d: f64| [tf.weight(d)];
        let est = integrate_panels(&f, &tf.local_frame(), &QuadTol::default())?;
        tf.log_partition(est.value[0])
    }

    /// Samples the density-class conditions at the probe points.
    pub fn check_invariants(&self) -> Vec<InvariantCheck> {
        let mut out = Vec::new();
        let probes: Vec<f64> = self
            .probes
            .iter()
            .copied()
            .filter(|&x| x > self.x0)
            .collect();

        let mass = self
            .log_partition_unnormalized(0.0)
            .map(|v| (v + self.log_norm).exp());
        out.push(InvariantCheck {
            name: "normalization",
            passed: matches!(mass, Ok(m) if (m - 1.0).abs() <= 1e-8),
            detail: format!("mass = {mass:?}"),
        });

        let hs: Vec<f64> = probes.iter().map(|&x| self.h(x)).collect();
        let increasing = hs
            .windows(2)
            .all(|w| w[1] > w[0] || (w[1].is_infinite() && w[1] > 0.0));
        out.push(InvariantCheck {
            name: "h_positive_increasing",
            passed: hs.iter().all(|&v| v > 0.0) && increasing,
            detail: format!("h(probes) = {hs:?}"),
        });

        let ratios: Vec<f64> = probes.iter().map(|&x| self.g(x) / x).collect();
        out.push(InvariantCheck {
            name: "g_superlinear",
            passed: ratios
                .windows(2)
                .all(|w| w[1] > w[0] || (w[1].is_infinite() && w[1] > 0.0)),
            detail: format!("g(x)/x = {ratios:?}"),
        });

        let q_sup = probes.iter().map(|&x| self.q(x).abs()).fold(0.0, f64::max);
        out.push(InvariantCheck {
            name: "q_bounded",
            passed: q_sup.is_finite() && q_sup <= self.q_bound,
            detail: format!("sup |q| = {q_sup}, declared bound {}", self.q_bound),
        });

        out.push(self.check_epsilon());
        out
    }

    fn check_epsilon(&self) -> InvariantCheck {
        let probes = &self.probes;
        let eps = |x: f64| self.epsilon(x);
        let d1 = |x: f64| {
            let h = 1e-4 * x;
            (eps(x + h) - eps(x - h)) / (2.0 * h)
        };
        let d2 = |x: f64| {
            let h = 1e-3 * x;
            (eps(x + h) - 2.0 * eps(x) + eps(x - h)) / (h * h)
        };
        match self.variation.kind {
            VariationKind::RegularRV { .. } => {
                let e: Vec<f64> = probes.iter().map(|&x| eps(x).abs()).collect();
                let a: Vec<f64> = probes.iter().map(|&x| (x * d1(x)).abs()).collect();
                let b: Vec<f64> = probes.iter().map(|&x| (x * x * d2(x)).abs()).collect();
                let decreasing = e.windows(2).all(|w| w[1] <= w[0]);
                let bounded = |v: &[f64]| v.iter().all(|&z| z <= 2.0 * v[0] + 1e-12);
                InvariantCheck {
                    name: "karamata_regular",
                    passed: decreasing && bounded(&a) && bounded(&b),
                    detail: format!("|eps| = {e:?}, |x eps'| = {a:?}, x^2|eps''| = {b:?}"),
                }
            }
            VariationKind::Rapid => {
                let a: Vec<f64> = probes.iter().map(|&t| (t * d1(t) / eps(t)).abs()).collect();
                let b: Vec<f64> = probes
                    .iter()
                    .map(|&t| (t * t * d2(t) / eps(t)).abs())
                    .collect();
                let e: Vec<f64> = probes.iter().map(|&t| eps(t).abs()).collect();
                let dec = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
                InvariantCheck {
                    name: "karamata_rapid",
                    passed: dec(&e) && dec(&a) && dec(&b),
                    detail: format!("|eps| = {e:?}, |t eps'/eps| = {a:?}, |t^2 eps''/eps| = {b:?}"),
                }
            }
        }
    }
}

/// `e^{tx} p(x)` written in the offset `d = x - center`, relative to its
/// value at the centre.
pub(crate) struct TiltFrame<'a> {
    model: &'a DensityModel,
    pub t: f64,
    pub center: f64,
    pub scale: f64,
    slope: f64,
    qc: f64,
}

impl TiltFrame<'_> {
    pub fn log_weight(&self, d: f64) -> f64 {
        let m = self.model;
        let x = self.center + d;
        if !(x >= m.support_lo) {
            return f64::NEG_INFINITY;
        }
        let lw = self.slope * d - m.g_remainder(self.center, d) + (m.q(x) - self.qc);
        if lw.is_nan() {
            f64::NEG_INFINITY
        } else {
            lw
        }
    }

    pub fn weight(&self, d: f64) -> f64 {
        self.log_weight(d).exp()
    }

    /// Panel layout in the offset variable.
    pub fn local_frame(&self) -> Frame {
        Frame {
            center: 0.0,
            scale: self.scale,
            lo: self.model.support_lo - self.center,
            hi: f64::INFINITY,
        }
    }

    /// `ln Φ` (unnormalized) from the integral `z` of [`TiltFrame::weight`].
    pub fn log_partition(&self, z: f64) -> Result<f64> {
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::numeric(format!(
                "partition integral is {z} at t = {}",
                self.t
            )));
        }
        let m = self.model;
        let c = self.center;
        Ok(self.t * c - m.g(c) + self.qc + z.ln())
    }
}

/// `e^x - 1 - x` without cancellation near 0.
pub(crate) fn expm1_minus_x(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let mut term = x * x / 2.0;
        let mut sum = term;
        for n in 3..40 {
            term *= x / n as f64;
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        x.exp_m1() - x
    }
}

/// `ln(1 + x) - x` without cancellation near 0.
pub(crate) fn log1p_minus_x(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let mut pow = x * x;
        let mut sum = 0.0;
        for n in 2..80 {
            let term = pow / n as f64;
            sum += if n % 2 == 0 { -term } else { term };
            if term.abs() <= 1e-17 * sum.abs() {
                break;
            }
            pow *= x;
        }
        sum
    } else {
        x.ln_1p() - x
    }
}

/// Smallest table point beyond which `h' > 0` on a fine scan.
fn mono_threshold(h_prime: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let steps = 2000;
    let mut last_bad = lo;
    for i in 0..=steps {
        let x = lo + (hi - lo) * i as f64 / steps as f64;
        if !(h_prime(x) > 0.0) {
            last_bad = x;
        }
    }
    last_bad
}

fn bisect_root(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;
    use std::f64::consts::{E, PI};

    #[test]
    fn weibull_example_values() {
        let m = DensityModel::weibull(2.0).unwrap();
        assert_eq!(m.h(1.0), 1.0);
        assert!((m.epsilon(10.0) - 2.0 / 199.0).abs() < 1e-16);
        assert!((m.x0() - 0.5_f64.sqrt()).abs() < 1e-15);
        assert!(matches!(m.variation().kind, VariationKind::RegularRV { beta } if beta == 1.0));
    }

    #[test]
    fn weibull_rejects_heavy_shapes() {
        assert!(DensityModel::weibull(1.0).is_err());
        assert!(DensityModel::weibull(0.5).is_err());
        assert!(DensityModel::weibull(f64::NAN).is_err());
    }

    #[test]
    fn exp_exponential_example_values() {
        let m = DensityModel::exp_exponential();
        assert_eq!(m.psi(1.0).unwrap(), 1.0);
        assert!((m.epsilon(E) - 0.5).abs() < 1e-15);
        assert_eq!(m.h(1.0), 1.0);
        assert!(m.psi(0.2).is_err());
    }

    #[test]
    fn log_density_examples() {
        let w = DensityModel::weibull(2.0).unwrap();
        assert!((w.eval_log_density(1.0).unwrap() - (2.0 / E).ln()).abs() < 1e-15);
        assert!((w.eval_log_density(2.0).unwrap() - (4.0 * (-4.0_f64).exp()).ln()).abs() < 1e-14);
        let hg = DensityModel::half_gaussian();
        assert!((hg.eval_log_density(0.0).unwrap() - (2.0 / PI).sqrt().ln()).abs() < 1e-15);
        assert!(matches!(hg.eval_log_density(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn normalization_by_quadrature() {
        for m in [
            DensityModel::weibull(2.0).unwrap(),
            DensityModel::weibull(1.5).unwrap(),
            DensityModel::weibull(3.0).unwrap(),
            DensityModel::exp_exponential(),
            DensityModel::half_gaussian(),
        ] {
            let mass = (m.log_partition_unnormalized(0.0).unwrap() + m.log_norm()).exp();
            assert!((mass - 1.0).abs() < 1e-8, "{}: {mass}", m.name());
        }
        // Independent plain integration on a truncated range.
        let w = DensityModel::weibull(2.0).unwrap();
        let v = integrate(|x| w.density(x), 0.0, 12.0, &QuadTol::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn psi_inverts_h() {
        let models = [
            DensityModel::weibull(2.0).unwrap(),
            DensityModel::weibull(2.5).unwrap(),
            DensityModel::exp_exponential(),
            DensityModel::half_gaussian(),
        ];
        for m in &models {
            for &t in &[1.0, 10.0, 100.0, 1000.0] {
                let x = m.psi(t).unwrap();
                assert!(((m.h(x) - t) / t).abs() < 1e-10, "{} t={t}", m.name());
            }
        }
        let w = &models[0];
        for &t in &[-50.0, -1.0, 0.0, 3.0, 77.0] {
            let x = w.psi(t).unwrap();
            let quad = (t + (t * t + 8.0_f64).sqrt()) / 4.0;
            assert!(((x - quad) / quad).abs() < 1e-12);
            assert!((2.0 * x * x - t * x - 1.0).abs() < 1e-9 * (1.0 + t.abs() * x));
        }
        assert_eq!(models[3].psi(5.0).unwrap(), 5.0);
    }

    #[test]
    fn psi_derivatives_match_finite_differences() {
        let w = DensityModel::weibull(2.5).unwrap();
        let t = 20.0;
        let p = w.psi_values(t).unwrap();
        let e = 1e-4;
        let d1 = (w.psi(t + e).unwrap() - w.psi(t - e).unwrap()) / (2.0 * e);
        let d2 = (w.psi(t + e).unwrap() - 2.0 * p.psi + w.psi(t - e).unwrap()) / (e * e);
        assert!((p.d1 - d1).abs() < 1e-8 * d1.abs());
        assert!((p.d2 - d2).abs() < 1e-4 * d2.abs());
    }

    #[test]
    fn builtin_invariants_hold() {
        for m in [
            DensityModel::weibull(2.0).unwrap(),
            DensityModel::exp_exponential(),
            DensityModel::half_gaussian(),
        ] {
            for c in m.check_invariants() {
                assert!(c.passed, "{}: {} failed: {}", m.name(), c.name, c.detail);
            }
        }
    }

    #[test]
    fn g_increment_matches_difference() {
        let models = [
            DensityModel::weibull(2.0).unwrap(),
            DensityModel::weibull(3.5).unwrap(),
            DensityModel::exp_exponential(),
            DensityModel::half_gaussian(),
        ];
        for m in &models {
            for &(c, d) in &[(1.5, 0.3), (4.0, -1.0), (2.0, 1e-6)] {
                let a = m.g_increment(c, d);
                let b = m.g(c + d) - m.g(c);
                assert!(
                    (a - b).abs() < 1e-9 * (1.0 + b.abs()),
                    "{} c={c} d={d}: {a} vs {b}",
                    m.name()
                );
            }
        }
    }

    #[test]
    fn g_remainder_matches_difference() {
        let models = [
            DensityModel::weibull(2.0).unwrap(),
            DensityModel::weibull(3.5).unwrap(),
            DensityModel::exp_exponential(),
            DensityModel::half_gaussian(),
        ];
        for m in &models {
            for &(c, d) in &[(1.5, 0.3), (4.0, -1.0), (2.0, 0.9), (3.0, 2e-3)] {
                let a = m.g_remainder(c, d);
                let b = m.g(c + d) - m.g(c) - m.h(c) * d;
                assert!(
                    (a - b).abs() < 1e-9 * (1.0 + b.abs()),
                    "{} c={c} d={d}: {a} vs {b}",
                    m.name()
                );
            }
        }
        assert!((expm1_minus_x(1e-3) - 5.001_667_083_416_68e-7).abs() < 1e-21);
        assert!((log1p_minus_x(-0.4) - ((0.6_f64).ln() + 0.4)).abs() < 1e-15);
    }

    #[test]
    fn tabulated_weibull_matches_analytic() {
        let rows: Vec<(f64, f64, f64)> = (1..=400)
            .map(|i| {
                let x = i as f64 * 0.02;
                (x, x * x - x.ln(), 0.0)
            })
            .collect();
        let t =
            DensityModel::tabulated(&rows, VariationKind::RegularRV { beta: 1.0 }, 0.0).unwrap();
        let w = DensityModel::weibull(2.0).unwrap();
        // Missing mass on (0, 0.02) shifts the normalizer slightly.
        assert!(
            (t.log_norm() - w.log_norm()).abs() < 1e-3,
            "{}",
            t.log_norm()
        );
        for &x in &[0.5, 1.0, 3.0, 7.5] {
            assert!(
                (t.h(x) - w.h(x)).abs() < 1e-3 * w.h(x).abs().max(1.0),
                "x={x}"
            );
        }
        assert!((t.psi(5.0).unwrap() - w.psi(5.0).unwrap()).abs() < 1e-3);
    }

    #[test]
    fn tabulated_rejects_undeclared_q() {
        let rows: Vec<(f64, f64, f64)> = (0..20).map(|i| (i as f64, (i * i) as f64, 0.5)).collect();
        assert!(
            DensityModel::tabulated(&rows, VariationKind::RegularRV { beta: 1.0 }, 0.1).is_err()
        );
        assert!(
            DensityModel::tabulated(&rows, VariationKind::RegularRV { beta: 1.0 }, 0.5).is_ok()
        );
    }

    #[test]
    fn custom_model_from_closures() {
        // g(x) = x^3/3 + x, q(x) = 0.1 sin x.
        let fns = CustomFns {
            g: Arc::new(|x: f64| x * x * x / 3.0 + x),
            q: Arc::new(|x: f64| 0.1 * x.sin()),
            h: Arc::new(|x: f64| x * x + 1.0),
            h_prime: Arc::new(|x: f64| 2.0 * x),
            h_second: Arc::new(|_| 2.0),
            epsilon: None,
        };
        let m = DensityModel::custom(
            "cubic",
            fns,
            VariationKind::RegularRV { beta: 2.0 },
            0.0,
            0.0,
            0.1,
        )
        .unwrap();
        let mass = integrate(|x| m.density(x), 0.0, 10.0, &QuadTol::default()).unwrap();
        assert!((mass - 1.0).abs() < 1e-9);
        assert!((m.psi(10.0).unwrap() - 3.0).abs() < 1e-12);
        assert!(m
            .check_invariants()
            .iter()
            .all(|c| c.passed || c.name == "karamata_regular"));
    }
}
