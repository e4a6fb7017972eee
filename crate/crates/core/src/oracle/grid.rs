//! Densities tabulated on uniform grids, and their FFT convolutions.

use crate::error::{Error, Result};
use crate::quad::{integrate, QuadTol};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use std::io::Write;

/// Largest grid the convolution routines will allocate.
pub const MAX_NODES: usize = 1 << 26;

/// Clipped-mass limit for [`discretize`].
pub const MAX_CLIPPED: f64 = 1e-6;

/// A density sampled at `lo + i * step`, `i = 0..values.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    pub lo: f64,
    pub step: f64,
    pub values: Vec<f64>,
    /// Trapezoid mass of `values`.
    pub mass: f64,
    /// Mass lost outside the grid (by truncation or trimming).
    pub clipped: f64,
}

fn trapezoid_weight(i: usize, len: usize) -> f64 {
    if len > 1 && (i == 0 || i == len - 1) {
        0.5
    } else {
        1.0
    }
}

fn trapezoid_mass(values: &[f64], step: f64) -> f64 {
    let len = values.len();
    values
        .iter()
        .enumerate()
        .map(|(i, v)| trapezoid_weight(i, len) * v)
        .sum::<f64>()
        * step
}

impl GridDensity {
    /// Builds a grid and records its trapezoid mass.
    pub fn new(lo: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0 && step.is_finite() && lo.is_finite()) {
            return Err(Error::domain(format!(
                "invalid grid: lo = {lo}, step = {step}"
            )));
        }
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("grid values must be finite and nonempty"));
        }
        let mass = trapezoid_mass(&values, step);
        Ok(GridDensity {
            lo,
            step,
            values,
            mass,
            clipped: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn hi(&self) -> f64 {
        self.x(self.values.len() - 1)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step
    }

    /// Index of the node nearest to `x`, if inside the grid.
    pub fn node(&self, x: f64) -> Option<usize> {
        let r = ((x - self.lo) / self.step).round();
        if r >= 0.0 && (r as usize) < self.values.len() {
            Some(r as usize)
        } else {
            None
        }
    }

    /// Linear interpolation; zero outside the grid.
    pub fn eval(&self, x: f64) -> f64 {
        let r = (x - self.lo) / self.step;
        if !(r >= 0.0) || r > (self.values.len() - 1) as f64 {
            return 0.0;
        }
        let i = (r.floor() as usize).min(self.values.len() - 1);
        if i + 1 == self.values.len() {
            return self.values[i];
        }
        let w = r - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// Node masses `step * w_i * f_i` with trapezoid weights.
    pub fn masses(&self) -> Vec<f64> {
        let len = self.values.len();
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| v * trapezoid_weight(i, len) * self.step)
            .collect()
    }

    fn from_masses(lo: f64, step: f64, masses: &[f64]) -> Result<Self> {
        let len = masses.len();
        let values = masses
            .iter()
            .enumerate()
            .map(|(i, m)| m.max(0.0) / (trapezoid_weight(i, len) * step))
            .collect();
        GridDensity::new(lo, step, values)
    }

    /// Rescales to unit trapezoid mass.
    pub fn normalize(&mut self) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(Error::numeric("cannot normalize a grid with no mass"));
        }
        let f = 1.0 / self.mass;
        for v in &mut self.values {
            *v *= f;
        }
        self.mass = 1.0;
        Ok(())
    }

    /// Mean, variance and third central moment under the trapezoid masses.
    pub fn moments(&self) -> (f64, f64, f64) {
        let ms = self.masses();
        let total: f64 = ms.iter().sum();
        // Moments about the grid midpoint keep the sums well scaled.
        let c = 0.5 * (self.lo + self.hi());
        let mut m = [0.0; 3];
        for (i, w) in ms.iter().enumerate() {
            let d = self.x(i) - c;
            m[0] += w * d;
            m[1] += w * d * d;
            m[2] += w * d * d * d;
        }
        let (m1, m2, m3) = (m[0] / total, m[1] / total, m[2] / total);
        (
            c + m1,
            m2 - m1 * m1,
            m3 - 3.0 * m1 * m2 + 2.0 * m1 * m1 * m1,
        )
    }

    pub fn mean(&self) -> f64 {
        self.moments().0
    }

    pub fn variance(&self) -> f64 {
        self.moments().1
    }

    /// Drops end nodes whose cumulative mass is below `tol` (as a fraction of
    /// the total), adding it to `clipped`.
    pub fn trim(&mut self, tol: f64) {
        let ms = self.masses();
        let total: f64 = ms.iter().sum();
        let budget = tol * total;
        let mut acc = 0.0;
        let mut start = 0;
        while start + 2 < ms.len() && acc + ms[start] <= 0.5 * budget {
            acc += ms[start];
            start += 1;
        }
        let mut end = ms.len();
        let mut acc_hi = 0.0;
        while end > start + 2 && acc_hi + ms[end - 1] <= 0.5 * budget {
            acc_hi += ms[end - 1];
            end -= 1;
        }
        if start == 0 && end == ms.len() {
            return;
        }
        self.lo += start as f64 * self.step;
        self.values = self.values[start..end].to_vec();
        self.mass = trapezoid_mass(&self.values, self.step);
        self.clipped += (acc + acc_hi) / total;
    }

    /// Writes `x,density` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,density")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{:.16e},{:.16e}", self.x(i), v)?;
        }
        Ok(())
    }
}

/// Tabulates `f` on `lo + i * step` up to `hi`, records the mass outside the
/// grid relative to `total_mass` and renormalizes.
pub fn discretize<F>(f: F, lo: f64, hi: f64, step: f64, total_mass: f64) -> Result<GridDensity>
where
    F: Fn(f64) -> f64,
{
    if !(hi > lo) || !(step > 0.0) {
        return Err(Error::domain(format!(
            "need hi > lo and step > 0 (lo = {lo}, hi = {hi}, step = {step})"
        )));
    }
    let count = ((hi - lo) / step).round() as usize + 1;
    if count > MAX_NODES {
        return Err(Error::Resource(format!(
            "{count} grid nodes exceed the limit of {MAX_NODES}; use a coarser step"
        )));
    }
    let values: Vec<f64> = (0..count)
        .map(|i| {
            let v = f(lo + i as f64 * step);
            if v.is_nan() {
                0.0
            } else {
                v
            }
        })
        .collect();
    let mut g = GridDensity::new(lo, step, values)?;
    let top = g.hi();
    // Mass inside the grid by adaptive quadrature on a few sub-intervals.
    let pieces = 64;
    let width = (top - lo) / pieces as f64;
    let tol = QuadTol {
        rel: 1e-12,
        ..QuadTol::default()
    };
    let mut inside = 0.0;
    for k in 0..pieces {
        let a = lo + k as f64 * width;
        inside += integrate(&f, a, a + width, &tol)?;
    }
    let clipped = (total_mass - inside) / total_mass;
    if clipped > MAX_CLIPPED {
        return Err(Error::Range(format!(
            "grid [{lo}, {top}] misses mass {clipped:e}; widen the bounds"
        )));
    }
    g.clipped = clipped.max(0.0);
    g.normalize()?;
    Ok(g)
}

fn guard(len: usize) -> Result<()> {
    if len > MAX_NODES {
        return Err(Error::Resource(format!(
            "a convolution of {len} nodes exceeds the limit of {MAX_NODES}; use a coarser step"
        )));
    }
    Ok(())
}

/// Convolution of two grids with the same step, via FFT on the node masses.
/// The result is renormalized and negative round-off is clipped.
pub fn convolve(f: &GridDensity, g: &GridDensity) -> Result<GridDensity> {
    if ((f.step - g.step) / f.step).abs() > 1e-12 {
        return Err(Error::domain("convolved grids must share a step"));
    }
    let len = f.len() + g.len() - 1;
    guard(len)?;
    let size = len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let load = |d: &GridDensity| {
        let mut buf = vec![Complex::new(0.0, 0.0); size];
        for (b, m) in buf.iter_mut().zip(d.masses()) {
            b.re = m;
        }
        buf
    };
    let mut a = load(f);
    let mut b = load(g);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    inv.process(&mut a);
    let scale = 1.0 / size as f64;
    let masses: Vec<f64> = a[..len].iter().map(|c| c.re * scale).collect();
    let mut out = GridDensity::from_masses(f.lo + g.lo, f.step, &masses)?;
    out.clipped = f.clipped + g.clipped;
    out.trim(1e-18);
    out.normalize()?;
    Ok(out)
}

/// Density of the sum of `n` independent copies, by binary powering.
pub fn self_convolve(d: &GridDensity, n: usize) -> Result<GridDensity> {
    if n == 0 {
        return Err(Error::domain("self_convolve needs n >= 1"));
    }
    let mut result: Option<GridDensity> = None;
    let mut power = d.clone();
    let mut k = n;
    loop {
        if k & 1 == 1 {
            result = Some(match result {
                None => power.clone(),
                Some(r) => convolve(&r, &power)?,
            });
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        power = convolve(&power, &power)?;
    }
    Ok(result.expect("n >= 1"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DensityModel;
    use crate::special::{std_normal_cdf, std_normal_pdf};
    use crate::tilt::tilt_moments;

    #[test]
    fn half_gaussian_grid() {
        let m = DensityModel::half_gaussian();
        let g = discretize(|x| m.density(x), 0.0, 12.0, 1e-3, 1.0).unwrap();
        assert!(g.clipped < 1e-12);
        assert!((g.mass - 1.0).abs() < 1e-15);
        assert_eq!(g.len(), 12001);
    }

    #[test]
    fn weibull_grid_mean_matches_quadrature() {
        let m = DensityModel::weibull(2.0).unwrap();
        let g = discretize(|x| m.density(x), 0.0, 8.0, 1e-3, 1.0).unwrap();
        let exact = tilt_moments(&m, 0.0).unwrap().a;
        assert!((g.mean() - exact).abs() < 1e-5);
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let m = DensityModel::half_gaussian();
        let e = discretize(|x| m.density(x), 0.0, 3.0, 1e-3, 1.0).unwrap_err();
        assert!(matches!(e, Error::Range(_)));
    }

    #[test]
    fn two_fold_half_gaussian_matches_closed_form() {
        // (p * p)(z) = 4 φ(z/√2)/√2 (2Φ(z/√2) - 1) for two half-normals.
        let m = DensityModel::half_gaussian();
        let g = discretize(|x| m.density(x), 0.0, 12.0, 1e-3, 1.0).unwrap();
        let c = self_convolve(&g, 2).unwrap();
        let r2 = std::f64::consts::SQRT_2;
        for &z in &[0.5, 1.0, 2.0, 3.5] {
            let exact = 4.0 * std_normal_pdf(z / r2) / r2 * (2.0 * std_normal_cdf(z / r2) - 1.0);
            let i = c.node(z).unwrap();
            assert!(
                (c.values[i] - exact).abs() < 1e-6,
                "z={z}: {} vs {exact}",
                c.values[i]
            );
        }
    }

    #[test]
    fn convolution_adds_means_and_variances() {
        let m = DensityModel::weibull(2.0).unwrap();
        let g = discretize(|x| m.density(x), 0.0, 8.0, 2e-3, 1.0).unwrap();
        let (mu, var, _) = g.moments();
        assert_eq!(self_convolve(&g, 1).unwrap(), g);
        for n in [2usize, 5, 16] {
            let c = self_convolve(&g, n).unwrap();
            let (cm, cv, _) = c.moments();
            assert!(((cm - n as f64 * mu) / (n as f64 * mu)).abs() < 1e-4);
            assert!(
                ((cv - n as f64 * var) / (n as f64 * var)).abs() < 1e-4,
                "n={n}: {cv}"
            );
        }
    }

    #[test]
    fn memory_guard() {
        assert!(guard(MAX_NODES).is_ok());
        assert!(matches!(guard(MAX_NODES + 1), Err(Error::Resource(_))));
        let e = discretize(|_| 1.0, 0.0, 1.0, 1e-9, 1.0).unwrap_err();
        assert!(matches!(e, Error::Resource(_)));
    }

    #[test]
    fn interpolation_and_nodes() {
        let g = GridDensity::new(1.0, 0.5, vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(g.eval(1.25), 0.5);
        assert_eq!(g.eval(0.9), 0.0);
        assert_eq!(g.node(1.49), Some(1));
        assert_eq!(g.node(3.0), None);
        assert!((g.mass - 0.5).abs() < 1e-15);
    }
}
