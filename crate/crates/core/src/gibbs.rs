//! Approximations of the law of `X_1` (and of short blocks) given
//! `S_n = n a_n`: the tilted density, the Gaussian-modulated density of the
//! fast regime, block products and conditioning on `Σ f(X_i) = n a_n`.

use crate::error::{Error, Result};
use crate::model::DensityModel;
use crate::quad::{integrate_panels, peak_frame, Frame, QuadTol};
use crate::special::normal_log_pdf;
use crate::tilt::{solve_tilt, tilted_density, TiltParams, SOLVE_REL_TOL};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

/// Growth class of `a_n` relative to `s √n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeKind {
    Moderate,
    Fast,
    OutOfScope,
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegimeKind::Moderate => "moderate",
            RegimeKind::Fast => "fast",
            RegimeKind::OutOfScope => "out_of_scope",
        })
    }
}

impl std::str::FromStr for RegimeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "moderate" => Ok(RegimeKind::Moderate),
            "fast" => Ok(RegimeKind::Fast),
            "out_of_scope" | "outofscope" => Ok(RegimeKind::OutOfScope),
            _ => Err(Error::Config(format!(
                "unknown regime `{s}` (moderate, fast, out_of_scope)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub kind: RegimeKind,
    /// `a_n / (s √n)`.
    pub ratio: f64,
}

/// Cut-offs on `a_n / (s √n)` separating the regimes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds {
    pub lo: f64,
    pub hi: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        RegimeThresholds { lo: 0.1, hi: 10.0 }
    }
}

impl RegimeThresholds {
    pub fn classify(&self, ratio: f64) -> RegimeKind {
        if ratio < self.lo {
            RegimeKind::Moderate
        } else if ratio <= self.hi {
            RegimeKind::Fast
        } else {
            RegimeKind::OutOfScope
        }
    }
}

/// Regime of `(n, a_n)` under the default thresholds.
pub fn classify_regime(model: &DensityModel, n: usize, a: f64) -> Result<Regime> {
    classify_regime_with(model, n, a, &RegimeThresholds::default())
}

pub fn classify_regime_with(
    model: &DensityModel,
    n: usize,
    a: f64,
    th: &RegimeThresholds,
) -> Result<Regime> {
    check_n(n)?;
    let tp = solve_tilt(model, a)?;
    Ok(regime_from_tilt(&tp, n, th))
}

/// Regime from an already solved tilt.
pub fn regime_from_tilt(tp: &TiltParams, n: usize, th: &RegimeThresholds) -> Regime {
    let ratio = tp.a / (tp.s() * (n as f64).sqrt());
    Regime {
        kind: th.classify(ratio),
        ratio,
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::domain(format!(
            "row size must be at least 2, got {n}"
        )));
    }
    Ok(())
}

/// `π^{a_n}(y)`: the density tilted to mean `a_n`. Zero below the support.
/// The regime is not checked; use [`classify_regime`] to see whether it applies.
pub fn tilted_approx(model: &DensityModel, n: usize, a: f64, y: f64) -> Result<f64> {
    check_n(n)?;
    let tp = solve_tilt(model, a)?;
    Ok(tilted_density(model, &tp, y))
}

/// `g(y) = C p(y) 𝔫(αβ + a_n, β, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FastGrowthParams {
    pub alpha: f64,
    pub beta: f64,
    /// `ln C`.
    pub log_c: f64,
    pub n: usize,
    /// Tilt at the factor's own level (`a_n` for the marginal).
    pub tp: TiltParams,
    /// The `a_n` added to the mean of the normal factor.
    pub shift: f64,
    // ln ∫ of the integrand scaled by its value at tp.a.
    log_z: f64,
    // Coefficient of the linear term of the exponent about tp.a.
    slope: f64,
}

impl FastGrowthParams {
    /// Mean `αβ + a_n` of the normal factor.
    pub fn normal_mean(&self) -> f64 {
        self.alpha * self.beta + self.shift
    }

    fn log_ratio(&self, model: &DensityModel, y: f64) -> f64 {
        let c = self.tp.a;
        let lo = model.support_lo();
        if y < lo || (y == lo && model.log_density_unchecked(y) == f64::NEG_INFINITY) {
            return f64::NEG_INFINITY;
        }
        let d = y - c;
        self.slope * d - model.g_remainder(c, d) - d * d / (2.0 * self.beta) + model.q(y)
            - model.q(c)
    }

    pub fn log_density(&self, model: &DensityModel, y: f64) -> f64 {
        self.log_ratio(model, y) - self.log_z
    }
}

/// Builds the factor with `β = count s²(tp)`, normal mean `αβ + shift`, and
/// its normalizing constant by quadrature about `tp.a`.
fn fast_factor(
    model: &DensityModel,
    tp: TiltParams,
    count: f64,
    shift: f64,
    n: usize,
) -> Result<FastGrowthParams> {
    let beta = count * tp.s2;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::numeric(format!(
            "normal variance beta = {beta} is not positive"
        )));
    }
    let delta = tp.mu3 / (2.0 * count * tp.s2);
    let alpha = tp.t + delta;
    let c = tp.a;
    let slope = (tp.t - model.h(c)) + delta + (shift - c) / beta;
    let mut p = FastGrowthParams {
        alpha,
        beta,
        log_c: 0.0,
        n,
        tp,
        shift,
        log_z: 0.0,
        slope,
    };
    let frame = Frame {
        center: 0.0,
        scale: tp.s(),
        lo: model.support_lo() - c,
        hi: f64::INFINITY,
    };
    let f = |d: f64| [p.log_ratio(model, c + d).exp()];
    let z = integrate_panels(&f, &frame, &QuadTol::default())
        .map_err(|e| Error::numeric(format!("normalizing the fast-growth density failed: {e}")))?
        .value[0];
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::numeric(format!(
            "fast-growth normalizer {z} is not positive"
        )));
    }
    p.log_z = z.ln();
    let l0 = model.log_density_unchecked(c) + normal_log_pdf(p.normal_mean(), beta, c);
    p.log_c = -p.log_z - l0;
    Ok(p)
}

/// `α = t + μ3/(2(n-1)s²)`, `β = (n-1)s²` at the tilt solving `m(t) = a_n`,
/// and the normalizing constant.
pub fn fast_growth_params(model: &DensityModel, n: usize, a: f64) -> Result<FastGrowthParams> {
    check_n(n)?;
    let tp = solve_tilt(model, a)?;
    fast_growth_params_with_tilt(model, n, &tp)
}

pub fn fast_growth_params_with_tilt(
    model: &DensityModel,
    n: usize,
    tp: &TiltParams,
) -> Result<FastGrowthParams> {
    check_n(n)?;
    fast_factor(model, *tp, (n - 1) as f64, tp.a, n)
}

/// `g_{a_n}(y)`; zero below the support.
pub fn fast_growth_approx(params: &FastGrowthParams, model: &DensityModel, y: f64) -> f64 {
    params.log_density(model, y).exp()
}

/// Tilts used for the factors of the moderate-regime block product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JointMode {
    /// `π^{m_i}(y_i)` with `m_i = (n a_n - y_1 - ... - y_i)/(n - i)`.
    PerIndexTilt,
    /// `π^{a_n}(y_i)` for every factor.
    CommonTilt,
}

/// Which product a [`JointApprox`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JointKind {
    Moderate(JointMode),
    /// `∏ g_i(y_i)` with `m_i = (n a_n - y_1 - ... - y_{i-1})/(n - i + 1)`.
    Fast,
}

/// Block-product approximation with per-level solves cached, for repeated
/// evaluation on grids. Safe to share across threads.
#[derive(Debug)]
pub struct JointApprox<'m> {
    model: &'m DensityModel,
    n: usize,
    a: f64,
    kind: JointKind,
    common: TiltParams,
    tilts: RwLock<HashMap<u64, TiltParams>>,
    fast: RwLock<HashMap<(u64, usize), FastGrowthParams>>,
}

impl<'m> JointApprox<'m> {
    pub fn new(model: &'m DensityModel, n: usize, a: f64, kind: JointKind) -> Result<Self> {
        check_n(n)?;
        let common = solve_tilt(model, a)?;
        Ok(JointApprox {
            model,
            n,
            a,
            kind,
            common,
            tilts: RwLock::new(HashMap::new()),
            fast: RwLock::new(HashMap::new()),
        })
    }

    fn check_block(&self, k: usize) -> Result<()> {
        if k == 0 || 4 * k > self.n {
            return Err(Error::domain(format!(
                "block length k = {k} must satisfy 1 <= k <= n/4 (n = {})",
                self.n
            )));
        }
        Ok(())
    }

    fn tilt_at(&self, m: f64) -> Result<TiltParams> {
        if m == self.a {
            return Ok(self.common);
        }
        if let Some(tp) = self.tilts.read().unwrap().get(&m.to_bits()) {
            return Ok(*tp);
        }
        if m <= self.model.support_lo() {
            return Err(Error::domain(format!(
                "level m = {m} is outside the range of m"
            )));
        }
        let tp = solve_tilt(self.model, m)?;
        self.tilts.write().unwrap().insert(m.to_bits(), tp);
        Ok(tp)
    }

    fn fast_at(&self, m: f64, i: usize) -> Result<FastGrowthParams> {
        let key = (m.to_bits(), i);
        if let Some(p) = self.fast.read().unwrap().get(&key) {
            return Ok(*p);
        }
        let tp = self.tilt_at(m)?;
        let p = fast_factor(self.model, tp, (self.n - i + 1) as f64, self.a, self.n)?;
        self.fast.write().unwrap().insert(key, p);
        Ok(p)
    }

    /// Joint density of `(y_1, ..., y_k)`.
    pub fn eval(&self, ys: &[f64]) -> Result<f64> {
        self.check_block(ys.len())?;
        if ys.iter().any(|&y| y < self.model.support_lo()) {
            return Ok(0.0);
        }
        let n = self.n as f64;
        let total = n * self.a;
        let mut prefix = 0.0;
        let mut out = 1.0;
        for (idx, &y) in ys.iter().enumerate() {
            let i = idx + 1;
            let factor = match self.kind {
                JointKind::Moderate(JointMode::CommonTilt) => {
                    tilted_density(self.model, &self.common, y)
                }
                JointKind::Moderate(JointMode::PerIndexTilt) => {
                    let m = (total - (prefix + y)) / (n - i as f64);
                    tilted_density(self.model, &self.tilt_at(m)?, y)
                }
                JointKind::Fast => {
                    let m = (total - prefix) / (n - i as f64 + 1.0);
                    fast_growth_approx(&self.fast_at(m, i)?, self.model, y)
                }
            };
            out *= factor;
            prefix += y;
        }
        Ok(out)
    }

    /// Parameters of the fast factor `i` (1-based) given the earlier coordinates.
    pub fn fast_factor(&self, i: usize, earlier: &[f64]) -> Result<FastGrowthParams> {
        if i == 0 || earlier.len() + 1 != i {
            return Err(Error::domain(
                "factor index must be one more than the number of earlier coordinates",
            ));
        }
        self.check_block(i)?;
        let n = self.n as f64;
        let m = (n * self.a - earlier.iter().sum::<f64>()) / (n - i as f64 + 1.0);
        self.fast_at(m, i)
    }
}

/// Block product of tilted densities; `k = ys.len()` must not exceed `n/4`.
pub fn joint_moderate_approx(
    model: &DensityModel,
    n: usize,
    a: f64,
    ys: &[f64],
    mode: JointMode,
) -> Result<f64> {
    JointApprox::new(model, n, a, JointKind::Moderate(mode))?.eval(ys)
}

/// Block product `∏ g_i(y_i)`. With one coordinate it is the marginal
/// fast-growth density for a row of `n + 1`.
pub fn joint_fast_approx(model: &DensityModel, n: usize, a: f64, ys: &[f64]) -> Result<f64> {
    JointApprox::new(model, n, a, JointKind::Fast)?.eval(ys)
}

/// Predicted location and scale `(a_n, s)` of `X_1` given `S_n = n a_n`.
pub fn concentration_summary(model: &DensityModel, n: usize, a: f64) -> Result<(f64, f64)> {
    check_n(n)?;
    let tp = solve_tilt(model, a)?;
    Ok((a, tp.s()))
}

/// `z_i = (m_i - y_{i+1}) / (s_i √(n-i-1))` for `i = 0..k`, with
/// `m_i = (n a_n - y_1 - ... - y_i)/(n - i)` and `s_i = s` at level `m_i`.
pub fn z_statistics(model: &DensityModel, n: usize, a: f64, ys: &[f64]) -> Result<Vec<f64>> {
    check_n(n)?;
    if ys.len() + 1 > n {
        return Err(Error::domain("need fewer than n - 1 coordinates"));
    }
    let nf = n as f64;
    let mut prefix = 0.0;
    let mut out = Vec::with_capacity(ys.len());
    for (i, &y) in ys.iter().enumerate() {
        let m = (nf * a - prefix) / (nf - i as f64);
        let s = solve_tilt(model, m)?.s();
        out.push((m - y) / (s * (nf - i as f64 - 1.0).sqrt()));
        prefix += y;
    }
    Ok(out)
}

/// Exponent `ρ` in `V(x) ~ x^{2ρ}`, from a least-squares fit of `ln V`
/// against `ln x` over `xs`.
pub fn variance_rho_fit(model: &DensityModel, xs: &[f64]) -> Result<f64> {
    if xs.len() < 2 {
        return Err(Error::domain(
            "need at least two points to fit the variance function",
        ));
    }
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .map(|&x| Ok((x.ln(), solve_tilt(model, x)?.s2.ln())))
        .collect::<Result<_>>()?;
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::domain("fit points must be distinct"));
    }
    Ok(0.5 * sxy / sxx)
}

/// `c n^{1/(1+ρ)}`, the fast-regime level.
pub fn fast_level(n: usize, rho: f64, c: f64) -> f64 {
    c * (n as f64).powf(1.0 / (1.0 + rho))
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The function whose empirical mean is conditioned on.
#[derive(Clone)]
pub enum MeanFunction {
    /// Conditioning on the sum itself; delegates to the tilt routines.
    Identity,
    Square,
    Custom {
        name: String,
        f: ScalarFn,
    },
}

impl fmt::Debug for MeanFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl MeanFunction {
    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        MeanFunction::Custom {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            MeanFunction::Identity => x,
            MeanFunction::Square => x * x,
            MeanFunction::Custom { f, .. } => f(x),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            MeanFunction::Identity => "identity",
            MeanFunction::Square => "square",
            MeanFunction::Custom { name, .. } => name,
        }
    }
}

/// Solution of `m_f(λ) = a` with the moments of `f(X)` under `e^{λ f} p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FTiltParams {
    pub lambda: f64,
    /// `m_f(λ)`.
    pub a: f64,
    pub s2: f64,
    pub mu3: f64,
    /// `ln Φ_f(λ)`.
    pub log_phi: f64,
    /// Maximizer of `λ f(x) + ln p(x)`.
    pub center: f64,
}

impl FTiltParams {
    pub fn s(&self) -> f64 {
        self.s2.sqrt()
    }

    fn from_tilt(tp: &TiltParams) -> Self {
        FTiltParams {
            lambda: tp.t,
            a: tp.a,
            s2: tp.s2,
            mu3: tp.mu3,
            log_phi: tp.log_phi,
            center: tp.a,
        }
    }
}

/// `ln Φ_f(λ)` and the moments of `f(X)` under the `f`-tilt, by quadrature
/// around the peak of `λ f(x) + ln p(x)`.
pub fn f_tilt_moments(
    model: &DensityModel,
    f: &MeanFunction,
    lambda: f64,
    start: f64,
) -> Result<FTiltParams> {
    if let MeanFunction::Identity = f {
        return Ok(FTiltParams::from_tilt(&crate::tilt::tilt_moments(
            model, lambda,
        )?));
    }
    let divergent = |e: Error| {
        Error::domain(format!(
            "Φ_f diverges or cannot be integrated at λ = {lambda}: {e}"
        ))
    };
    let l = |x: f64| lambda * f.eval(x) + model.log_density_unchecked(x);
    let lo = model.support_lo();
    let start = if start > lo {
        start
    } else {
        model.x0().max(lo)
    };
    let (frame, lmax) = peak_frame(&l, lo, start).map_err(divergent)?;
    let fc = f.eval(frame.center);
    let w = |x: f64| {
        let v = (l(x) - lmax).exp();
        let u = f.eval(x) - fc;
        [v, u * v, u * u * v, u * u * u * v]
    };
    let tol = QuadTol {
        rel: 1e-12,
        ..QuadTol::default()
    };
    let e = integrate_panels(&w, &frame, &tol).map_err(divergent)?;
    let z = e.value[0];
    let (m1, m2, m3) = (e.value[1] / z, e.value[2] / z, e.value[3] / z);
    let s2 = m2 - m1 * m1;
    if !(z > 0.0 && s2 > 0.0 && z.is_finite() && lmax.is_finite()) {
        return Err(Error::domain(format!(
            "Φ_f is not finite or degenerate at λ = {lambda}"
        )));
    }
    Ok(FTiltParams {
        lambda,
        a: fc + m1,
        s2,
        mu3: m3 - 3.0 * m1 * m2 + 2.0 * m1 * m1 * m1,
        log_phi: lmax + z.ln(),
        center: frame.center,
    })
}

/// Solves `m_f(λ) = a` by Newton steps, falling back to bisection where
/// `Φ_f` diverges or a step leaves the bracket.
pub fn solve_f_tilt(model: &DensityModel, f: &MeanFunction, a: f64) -> Result<FTiltParams> {
    if let MeanFunction::Identity = f {
        return Ok(FTiltParams::from_tilt(&solve_tilt(model, a)?));
    }
    if !a.is_finite() {
        return Err(Error::domain(format!(
            "target mean must be finite, got {a}"
        )));
    }
    let mut cur = f_tilt_moments(model, f, 0.0, model.x0())?;
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let tol = 0.1 * SOLVE_REL_TOL * a.abs().max(cur.s());
    for _ in 0..200 {
        let r = cur.a - a;
        if r.abs() <= tol {
            return Ok(cur);
        }
        if r < 0.0 {
            lo = cur.lambda;
        } else {
            hi = cur.lambda;
        }
        if lo.is_finite()
            && hi.is_finite()
            && hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs())
        {
            return Ok(cur);
        }
        let mut next = cur.lambda - r / cur.s2;
        if !(next > lo && next < hi) {
            next = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => cur.lambda + 2.0 * (cur.lambda - lo).abs().max(1.0),
                _ => cur.lambda - 2.0 * (hi - cur.lambda).abs().max(1.0),
            };
        }
        let mut tries = 0;
        cur = loop {
            match f_tilt_moments(model, f, next, cur.center) {
                Ok(v) => break v,
                Err(Error::Domain(msg)) => {
                    tries += 1;
                    if tries > 80 {
                        return Err(Error::domain(format!(
                            "no finite Φ_f reaches m_f = {a}: {msg}"
                        )));
                    }
                    if next > cur.lambda {
                        hi = next;
                    } else {
                        lo = next;
                    }
                    next = 0.5 * (cur.lambda + next);
                }
                Err(e) => return Err(e),
            }
        };
    }
    Err(Error::numeric(format!(
        "solving m_f(λ) = {a} did not converge"
    )))
}

/// `_fπ(x) = e^{λ f(x)} p(x) / Φ_f(λ)` at a solved `f`-tilt.
pub fn f_tilted_density(model: &DensityModel, f: &MeanFunction, ftp: &FTiltParams, x: f64) -> f64 {
    if let MeanFunction::Identity = f {
        return (ftp.lambda * x + model.log_density_unchecked(x) - ftp.log_phi).exp();
    }
    (ftp.lambda * f.eval(x) + model.log_density_unchecked(x) - ftp.log_phi).exp()
}

/// Approximate density of `X_1` at `x` given `Σ f(X_i) = n a_n`. For the
/// identity this is exactly [`tilted_approx`].
pub fn f_tilted_approx(
    model: &DensityModel,
    f: &MeanFunction,
    n: usize,
    a: f64,
    x: f64,
) -> Result<f64> {
    if let MeanFunction::Identity = f {
        return tilted_approx(model, n, a, x);
    }
    check_n(n)?;
    let ftp = solve_f_tilt(model, f, a)?;
    Ok(f_tilted_density(model, f, &ftp, x))
}

/// Fast-regime `f`-mean density `C p(x) 𝔫(α_f β_f + a_n, β_f, f(x))` with
/// `α_f = λ + μ3_f/(2(n-1)s_f²)` and `β_f = (n-1)s_f²`.
#[derive(Debug, Clone)]
pub struct FastFMean {
    pub f: MeanFunction,
    pub ftp: FTiltParams,
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub shift: f64,
    inner: Option<FastGrowthParams>,
    log_z: f64,
    reference: f64,
}

impl FastFMean {
    pub fn new(model: &DensityModel, f: MeanFunction, n: usize, a: f64) -> Result<Self> {
        check_n(n)?;
        if let MeanFunction::Identity = f {
            let p = fast_growth_params(model, n, a)?;
            return Ok(FastFMean {
                f,
                ftp: FTiltParams::from_tilt(&p.tp),
                alpha: p.alpha,
                beta: p.beta,
                n,
                shift: a,
                inner: Some(p),
                log_z: 0.0,
                reference: a,
            });
        }
        let ftp = solve_f_tilt(model, &f, a)?;
        let count = (n - 1) as f64;
        let beta = count * ftp.s2;
        let alpha = ftp.lambda + ftp.mu3 / (2.0 * count * ftp.s2);
        let mut out = FastFMean {
            f,
            ftp,
            alpha,
            beta,
            n,
            shift: a,
            inner: None,
            log_z: 0.0,
            reference: ftp.center,
        };
        let l = |x: f64| out.log_ratio(model, x);
        let lo = model.support_lo();
        let (frame, lmax) = peak_frame(&l, lo, ftp.center)?;
        let w = |x: f64| [(l(x) - lmax).exp()];
        let z = integrate_panels(&w, &frame, &QuadTol::default())?.value[0];
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::numeric("fast f-mean normalizer is not positive"));
        }
        out.log_z = lmax + z.ln();
        Ok(out)
    }

    pub fn normal_mean(&self) -> f64 {
        self.alpha * self.beta + self.shift
    }

    // ln of the unnormalized density relative to its value at the reference point.
    fn log_ratio(&self, model: &DensityModel, x: f64) -> f64 {
        if x < model.support_lo() {
            return f64::NEG_INFINITY;
        }
        let r = self.reference;
        let fr = self.f.eval(r);
        let u = self.f.eval(x) - fr;
        let lp = model.log_density_unchecked(x) - model.log_density_unchecked(r);
        lp + u * (2.0 * (self.normal_mean() - fr) - u) / (2.0 * self.beta)
    }

    pub fn density(&self, model: &DensityModel, x: f64) -> f64 {
        match &self.inner {
            Some(p) => fast_growth_approx(p, model, x),
            None => (self.log_ratio(model, x) - self.log_z).exp(),
        }
    }
}
