//! Total-variation and sup-norm comparisons on common grids.

use super::grid::GridDensity;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Outcome of comparing two densities on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvReport {
    /// Half the L¹ distance after both sides are scaled to unit mass.
    pub tv: f64,
    /// Largest pointwise gap, before renormalization.
    pub sup_gap: f64,
    /// Mass of the negative parts of each side (signed approximations).
    pub neg_mass: (f64, f64),
}

/// Compares node values `f` and `g` sampled on the same grid of spacing
/// `cell` (a cell volume for multi-dimensional grids). Masses are plain
/// Riemann sums.
pub fn tv_values(f: &[f64], g: &[f64], cell: f64) -> Result<TvReport> {
    if f.len() != g.len() || f.is_empty() {
        return Err(Error::domain(
            "tv_values needs two nonempty arrays of equal length",
        ));
    }
    let sum = |v: &[f64]| v.iter().sum::<f64>() * cell;
    let neg = |v: &[f64]| v.iter().filter(|x| **x < 0.0).map(|x| -x).sum::<f64>() * cell;
    let (mf, mg) = (sum(f), sum(g));
    if !(mf > 0.0 && mg > 0.0) {
        return Err(Error::numeric(format!(
            "cannot compare densities with masses {mf} and {mg}"
        )));
    }
    let mut l1 = 0.0;
    let mut sup: f64 = 0.0;
    for (a, b) in f.iter().zip(g) {
        l1 += (a / mf - b / mg).abs();
        sup = sup.max((a - b).abs());
    }
    Ok(TvReport {
        tv: (0.5 * l1 * cell).min(1.0),
        sup_gap: sup,
        neg_mass: (neg(f), neg(g)),
    })
}

/// Compares a grid density with a function evaluated at its nodes.
pub fn tv_grid_fn<F: Fn(f64) -> f64>(d: &GridDensity, g: F) -> Result<TvReport> {
    let other: Vec<f64> = (0..d.len()).map(|i| g(d.x(i))).collect();
    tv_values(&d.values, &other, d.step)
}

/// Compares two functions on `lo + i * step`, `i = 0..count`.
pub fn tv_distance<F, G>(f: F, g: G, lo: f64, step: f64, count: usize) -> Result<TvReport>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let xs = (0..count).map(|i| lo + i as f64 * step);
    let a: Vec<f64> = xs.clone().map(&f).collect();
    let b: Vec<f64> = xs.map(&g).collect();
    tv_values(&a, &b, step)
}

/// TV between the histogram of `samples` and bin masses of a density,
/// both as discrete laws over the bins `lo + [i, i+1) * width`. Samples
/// outside the bins count as mismatch.
pub fn histogram_tv(samples: &[f64], bin_mass: &[f64], lo: f64, width: f64) -> Result<f64> {
    if samples.is_empty() || bin_mass.is_empty() {
        return Err(Error::domain("histogram_tv needs samples and bins"));
    }
    let mut counts = vec![0.0; bin_mass.len()];
    let mut outside = 0.0;
    for &x in samples {
        let r = ((x - lo) / width).floor();
        if r >= 0.0 && (r as usize) < counts.len() {
            counts[r as usize] += 1.0;
        } else {
            outside += 1.0;
        }
    }
    let n = samples.len() as f64;
    let total: f64 = bin_mass.iter().sum();
    let l1: f64 = counts
        .iter()
        .zip(bin_mass)
        .map(|(c, m)| (c / n - m / total).abs())
        .sum();
    Ok((0.5 * (l1 + outside / n)).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{std_normal_cdf, std_normal_pdf};

    #[test]
    fn identical_and_disjoint() {
        let f = |x: f64| std_normal_pdf(x);
        let r = tv_distance(f, f, -8.0, 1e-3, 16001).unwrap();
        assert_eq!(r.tv, 0.0);
        let a = |x: f64| if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 };
        let b = |x: f64| if (2.0..3.0).contains(&x) { 1.0 } else { 0.0 };
        let r = tv_distance(a, b, -1.0, 1e-3, 5000).unwrap();
        assert!((r.tv - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shifted_normals() {
        let r = tv_distance(
            std_normal_pdf,
            |x| std_normal_pdf(x - 0.1),
            -10.0,
            1e-3,
            20001,
        )
        .unwrap();
        let exact = 2.0 * std_normal_cdf(0.05) - 1.0;
        assert!((r.tv - exact).abs() < 1e-6, "{} vs {exact}", r.tv);
        assert!((exact - 0.0399).abs() < 1e-4);
    }

    #[test]
    fn negative_parts_are_reported() {
        let r = tv_values(&[1.0, -0.5, 1.0], &[1.0, 0.0, 1.0], 1.0).unwrap();
        assert_eq!(r.neg_mass, (0.5, 0.0));
    }

    #[test]
    fn histogram_of_exact_quantiles() {
        let samples: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let tv = histogram_tv(&samples, &[1.0; 10], 0.0, 0.1).unwrap();
        assert!(tv < 1e-12);
        let tv = histogram_tv(&samples, &[1.0; 5], 0.0, 0.1).unwrap();
        assert!((tv - 0.5).abs() < 1e-12);
    }
}
