//! Exact conditional densities from grid convolutions.
//!
//! Conditional laws given `S_n = n a` (or `S_n ≥ n a`) do not change when
//! every summand is tilted, so all convolutions are run on the density tilted
//! to mean `a`. The sums then sit at their centres and nothing underflows,
//! however large `n I(a)` is. The base grid is the lattice `a + j h`, which
//! puts `n a` on a node of every `k`-fold grid.

use super::grid::{convolve, discretize, self_convolve, GridDensity};
use crate::error::{Error, Result};
use crate::model::DensityModel;
use crate::tilt::{solve_tilt, tilted_density, TiltParams};
use rayon::prelude::*;

/// Grid layout for the oracles, in units of the tilted standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Grid step as a fraction of `s`.
    pub step_rel: f64,
    /// Half-width of the base grid, in units of `s`.
    pub half_width: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            step_rel: 2e-3,
            half_width: 12.0,
        }
    }
}

/// Largest block length the joint oracle supports.
pub const MAX_BLOCK: usize = 3;

/// Grid convolutions of a density tilted to mean `a`, ready for conditional
/// evaluations given `S_n = n a` or `S_n ≥ n a`.
#[derive(Debug, Clone)]
pub struct ConditionalOracle {
    n: usize,
    a: f64,
    /// Tilt parameter of the base (needed for exceedance kernels).
    t: f64,
    /// `ln Φ(t) - t a` per summand, when known.
    log_phi_minus_ta: Option<f64>,
    base: GridDensity,
    /// `sums[k]` is the density of `S_{n-k}` under the tilt, for `k = 0..=k_max`.
    sums: Vec<GridDensity>,
}

/// A 2-D grid of joint conditional values on the lattice `lo + i * step`.
#[derive(Debug, Clone)]
pub struct JointGrid {
    pub lo: f64,
    pub step: f64,
    pub count: usize,
    /// Row-major values `f(y_i, y_j)`.
    pub values: Vec<f64>,
}

impl JointGrid {
    pub fn y(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step
    }
}

fn exp_cell_weights(x: f64) -> (f64, f64) {
    // ∫_0^1 e^{-x u} du and ∫_0^1 u e^{-x u} du.
    if x.abs() < 1e-3 {
        (
            1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0,
            0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0,
        )
    } else {
        let e = (-x).exp();
        ((-(-x).exp_m1()) / x, (-(-x).exp_m1() - x * e) / (x * x))
    }
}

/// `T(x_i) = ∫_{x_i}^∞ e^{-t(s - x_i)} f(s) ds` on every node, with `f`
/// linear between nodes and zero past the grid.
fn exponential_tail(d: &GridDensity, t: f64) -> Vec<f64> {
    let h = d.step;
    let (w0, w1) = exp_cell_weights(t * h);
    let decay = (-t * h).exp();
    let mut out = vec![0.0; d.len()];
    for i in (0..d.len() - 1).rev() {
        let (f0, f1) = (d.values[i], d.values[i + 1]);
        out[i] = h * (w0 * f0 + w1 * (f1 - f0)) + decay * out[i + 1];
    }
    out
}

fn tail_at(d: &GridDensity, tail: &[f64], t: f64, c: f64) -> f64 {
    if c < d.lo {
        return (-t * (d.lo - c)).exp() * tail[0];
    }
    let r = (c - d.lo) / d.step;
    let i = r.floor() as usize;
    if i + 1 >= tail.len() {
        return 0.0;
    }
    let w = r - i as f64;
    tail[i] * (1.0 - w) + tail[i + 1] * w
}

impl ConditionalOracle {
    /// Oracle for `model`, tilted to mean `a`, able to condition blocks of up
    /// to `k_max` coordinates.
    pub fn new(
        model: &DensityModel,
        n: usize,
        a: f64,
        k_max: usize,
        opts: &OracleOptions,
    ) -> Result<Self> {
        let tp = solve_tilt(model, a)?;
        Self::with_tilt(model, n, &tp, k_max, opts)
    }

    /// As [`ConditionalOracle::new`] with an already solved tilt.
    pub fn with_tilt(
        model: &DensityModel,
        n: usize,
        tp: &TiltParams,
        k_max: usize,
        opts: &OracleOptions,
    ) -> Result<Self> {
        let mut o = Self::from_tilted(
            |x| tilted_density(model, tp, x),
            tp.a,
            tp.s(),
            tp.t,
            model.support_lo(),
            n,
            k_max,
            opts,
        )?;
        o.log_phi_minus_ta = Some(tp.log_phi - tp.t * tp.a);
        Ok(o)
    }

    /// Oracle over an arbitrary density `f` with mean `a` and standard
    /// deviation `s`, supported on `[support_lo, ∞)`. `t` is the tilt that
    /// produced `f`, used by the exceedance kernels.
    #[allow(clippy::too_many_arguments)]
    pub fn from_tilted<F>(
        f: F,
        a: f64,
        s: f64,
        t: f64,
        support_lo: f64,
        n: usize,
        k_max: usize,
        opts: &OracleOptions,
    ) -> Result<Self>
    where
        F: Fn(f64) -> f64,
    {
        if k_max == 0 || k_max > MAX_BLOCK || k_max >= n {
            return Err(Error::domain(format!(
                "block length must satisfy 1 <= k <= {MAX_BLOCK} and k < n (k = {k_max}, n = {n})"
            )));
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::domain(format!("scale must be positive, got {s}")));
        }
        let h = s * opts.step_rel;
        let mut width = opts.half_width * s;
        let base = loop {
            let below = ((a - support_lo).min(width) / h).ceil();
            let above = (width / h).ceil();
            let lo = a - below * h;
            let hi = a + above * h;
            match discretize(&f, lo, hi, h, 1.0) {
                Ok(g) => break g,
                Err(Error::Range(_)) if width < 100.0 * s => width *= 1.5,
                Err(e) => return Err(e),
            }
        };
        let mut sums = Vec::with_capacity(k_max + 1);
        let mut cur = self_convolve(&base, n - k_max)?;
        sums.push(cur.clone());
        for _ in 0..k_max {
            cur = convolve(&cur, &base)?;
            sums.push(cur.clone());
        }
        sums.reverse();
        Ok(ConditionalOracle {
            n,
            a,
            t,
            log_phi_minus_ta: None,
            base,
            sums,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// The tilted summand density on its grid.
    pub fn base(&self) -> &GridDensity {
        &self.base
    }

    /// Tilted density of `S_{n-k}`.
    pub fn sum_grid(&self, k: usize) -> &GridDensity {
        &self.sums[k]
    }

    fn target(&self) -> f64 {
        self.n as f64 * self.a
    }

    fn denominator(&self) -> Result<f64> {
        let v = self.sums[0].eval(self.target());
        if !(v > 0.0) {
            return Err(Error::numeric("the n-fold density vanishes at n a"));
        }
        Ok(v)
    }

    /// Conditional density of `X_1` given `S_n = n a`, on the base grid
    /// (not renormalized; its mass measures the oracle's consistency).
    pub fn marginal(&self) -> Result<GridDensity> {
        let den = self.denominator()?;
        let rest = &self.sums[1];
        let na = self.target();
        let values = (0..self.base.len())
            .map(|i| self.base.values[i] * rest.eval(na - self.base.x(i)) / den)
            .collect();
        GridDensity::new(self.base.lo, self.base.step, values)
    }

    /// Joint conditional density of `(X_1, …, X_k)` at `ys`, `k = ys.len()`.
    /// Points off the grids are interpolated; outside them the value is 0.
    pub fn point(&self, ys: &[f64]) -> Result<f64> {
        let k = ys.len();
        if k == 0 || k >= self.sums.len() {
            return Err(Error::domain(format!(
                "block length {k} not prepared by this oracle"
            )));
        }
        let den = self.denominator()?;
        let prod: f64 = ys.iter().map(|&y| self.base.eval(y)).product();
        let rest = self.sums[k].eval(self.target() - ys.iter().sum::<f64>());
        Ok(prod * rest / den)
    }

    /// Joint conditional density of `(X_1, X_2)` on the sub-lattice taking
    /// every `stride`-th base node (aligned so that `n a` stays on a node).
    pub fn joint2(&self, stride: usize) -> Result<JointGrid> {
        if self.sums.len() < 3 {
            return Err(Error::domain("oracle was not prepared for blocks of two"));
        }
        let stride = stride.max(1);
        let den = self.denominator()?;
        let ia = self.base.node(self.a).expect("a is a base node");
        let first = ia % stride;
        let idx: Vec<usize> = (first..self.base.len()).step_by(stride).collect();
        let count = idx.len();
        let rest = &self.sums[2];
        let na = self.target();
        let values: Vec<f64> = (0..count * count)
            .into_par_iter()
            .map(|p| {
                let (i, j) = (idx[p / count], idx[p % count]);
                let (yi, yj) = (self.base.x(i), self.base.x(j));
                self.base.values[i] * self.base.values[j] * rest.eval(na - yi - yj) / den
            })
            .collect();
        Ok(JointGrid {
            lo: self.base.x(first),
            step: self.base.step * stride as f64,
            count,
            values,
        })
    }

    /// Conditional density of `X_1` given `S_n ≥ n a`, on the base grid.
    pub fn exceedance(&self) -> Result<GridDensity> {
        let t = self.t;
        let tail_n = exponential_tail(&self.sums[0], t);
        let tail_rest = exponential_tail(&self.sums[1], t);
        let na = self.target();
        let den = tail_at(&self.sums[0], &tail_n, t, na);
        if !(den > 0.0) {
            return Err(Error::numeric("exceedance normalizer vanishes"));
        }
        let values = (0..self.base.len())
            .map(|i| {
                self.base.values[i] * tail_at(&self.sums[1], &tail_rest, t, na - self.base.x(i))
                    / den
            })
            .collect();
        GridDensity::new(self.base.lo, self.base.step, values)
    }

    /// `ln P(S_n ≥ n a) = -n I(a) + ln ∫_{na}^∞ e^{-t(s - na)} π_n(s) ds`.
    pub fn log_tail_probability(&self) -> Result<f64> {
        let lpa = self
            .log_phi_minus_ta
            .ok_or_else(|| Error::domain("tail probabilities need a model-based oracle"))?;
        let tail = exponential_tail(&self.sums[0], self.t);
        let v = tail_at(&self.sums[0], &tail, self.t, self.target());
        Ok(self.n as f64 * lpa + v.ln())
    }

    /// Log density of the untilted `S_n` at `x`.
    pub fn log_sum_density(&self, x: f64) -> Result<f64> {
        let lpa = self
            .log_phi_minus_ta
            .ok_or_else(|| Error::domain("sum densities need a model-based oracle"))?;
        let n = self.n as f64;
        // f_n(x) = Φ^n e^{-t x} π_n(x) = e^{n(ln Φ - t a)} e^{-t(x - n a)} π_n(x).
        Ok(n * lpa - self.t * (x - n * self.a) + self.sums[0].eval(x).ln())
    }
}

/// Exact conditional density of `(X_1, …, X_k)` given `S_n = n a` at `ys`.
pub fn exact_conditional(model: &DensityModel, n: usize, a: f64, ys: &[f64]) -> Result<f64> {
    let o = ConditionalOracle::new(model, n, a, ys.len(), &OracleOptions::default())?;
    o.point(ys)
}

/// Exact conditional density of `X_1` given `S_n ≥ n a`, at `y`.
pub fn exact_exceedance_conditional(model: &DensityModel, n: usize, a: f64, y: f64) -> Result<f64> {
    let o = ConditionalOracle::new(model, n, a, 1, &OracleOptions::default())?;
    Ok(o.exceedance()?.eval(y))
}

/// Density of `(S_n - n m)/(s √n)` for summands drawn from the tilt `tp`,
/// on its grid.
pub fn standardized_sum_density(
    model: &DensityModel,
    tp: &TiltParams,
    n: usize,
    opts: &OracleOptions,
) -> Result<GridDensity> {
    let s = tp.s();
    let h = s * opts.step_rel;
    let below = ((tp.a - model.support_lo()).min(opts.half_width * s) / h).ceil();
    let above = (opts.half_width * s / h).ceil();
    let base = discretize(
        |x| tilted_density(model, tp, x),
        tp.a - below * h,
        tp.a + above * h,
        h,
        1.0,
    )?;
    let sum = self_convolve(&base, n)?;
    let scale = s * (n as f64).sqrt();
    let center = n as f64 * tp.a;
    let values = sum.values.iter().map(|v| v * scale).collect();
    let mut out = GridDensity::new((sum.lo - center) / scale, h / scale, values)?;
    out.clipped = sum.clipped;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::grid::discretize;
    use crate::tilt::tilt_moments;

    fn w2() -> DensityModel {
        DensityModel::weibull(2.0).unwrap()
    }

    #[test]
    fn two_summands_by_direct_bayes() {
        // p(y | S_2 = 2a) = p(y) p(2a - y) / f_2(2a), with f_2 from a plain grid.
        let m = w2();
        let a = 1.5;
        let o = ConditionalOracle::new(&m, 2, a, 1, &OracleOptions::default()).unwrap();
        let g = discretize(|x| m.density(x), 0.0, 10.0, 1e-3, 1.0).unwrap();
        let f2 = crate::oracle::grid::self_convolve(&g, 2)
            .unwrap()
            .eval(2.0 * a);
        for &y in &[0.8, 1.5, 2.2] {
            let direct = m.density(y) * m.density(2.0 * a - y) / f2;
            let v = o.point(&[y]).unwrap();
            assert!(
                ((v - direct) / direct).abs() < 1e-4,
                "y={y}: {v} vs {direct}"
            );
            let mirror = o.point(&[2.0 * a - y]).unwrap();
            assert!(((v - mirror) / v).abs() < 1e-6);
        }
    }

    #[test]
    fn marginal_and_exceedance_are_normalized() {
        let m = w2();
        let o = ConditionalOracle::new(&m, 16, 3.0, 2, &OracleOptions::default()).unwrap();
        let marg = o.marginal().unwrap();
        assert!((marg.mass - 1.0).abs() < 1e-5, "{}", marg.mass);
        let exc = o.exceedance().unwrap();
        assert!((exc.mass - 1.0).abs() < 1e-5, "{}", exc.mass);
        let j = o.joint2(10).unwrap();
        let mass: f64 = j.values.iter().sum::<f64>() * j.step * j.step;
        assert!((mass - 1.0).abs() < 1e-4, "{mass}");
    }

    #[test]
    fn exceedance_far_beyond_support_vanishes() {
        let m = w2();
        let o = ConditionalOracle::new(&m, 8, 2.0, 1, &OracleOptions::default()).unwrap();
        assert_eq!(o.exceedance().unwrap().eval(1e3), 0.0);
        assert_eq!(o.point(&[1e3]).unwrap(), 0.0);
    }

    #[test]
    fn exponential_tail_of_uniform() {
        // f = 1 on [0, 1]: T(0) = (1 - e^{-t}) / t.
        let g = GridDensity::new(0.0, 1e-3, vec![1.0; 1001]).unwrap();
        for &t in &[0.0, 1e-5, 2.0, -1.5] {
            let tail = exponential_tail(&g, t);
            let exact = if t == 0.0 { 1.0 } else { -(-t).exp_m1() / t };
            assert!(
                (tail[0] - exact).abs() < 1e-12,
                "t={t}: {} vs {exact}",
                tail[0]
            );
        }
    }

    #[test]
    fn tail_probability_of_two_half_normals() {
        // S_2 of half-normals: P(S_2 ≥ c) = 2 ∫_c^∞ φ(z/√2)(2Φ(z/√2) - 1)·2/√2 dz,
        // evaluated here by quadrature of the closed-form 2-fold density.
        let m = DensityModel::half_gaussian();
        let o = ConditionalOracle::new(&m, 2, 3.0, 1, &OracleOptions::default()).unwrap();
        let r2 = std::f64::consts::SQRT_2;
        let dens = |z: f64| {
            4.0 * crate::special::std_normal_pdf(z / r2) / r2
                * (2.0 * crate::special::std_normal_cdf(z / r2) - 1.0)
        };
        let exact =
            crate::quad::integrate(dens, 6.0, 40.0, &crate::quad::QuadTol::default()).unwrap();
        let v = o.log_tail_probability().unwrap().exp();
        assert!(((v - exact) / exact).abs() < 1e-5, "{v} vs {exact}");
    }

    #[test]
    fn standardized_sum_has_unit_variance() {
        let m = w2();
        let tp = tilt_moments(&m, 10.0).unwrap();
        let d = standardized_sum_density(&m, &tp, 16, &OracleOptions::default()).unwrap();
        let (mu, var, _) = d.moments();
        assert!(mu.abs() < 1e-5 && (var - 1.0).abs() < 1e-5, "{mu} {var}");
    }

    #[test]
    fn block_length_is_checked() {
        let m = w2();
        assert!(ConditionalOracle::new(&m, 3, 2.0, 3, &OracleOptions::default()).is_err());
        assert!(ConditionalOracle::new(&m, 10, 2.0, 4, &OracleOptions::default()).is_err());
    }
}
