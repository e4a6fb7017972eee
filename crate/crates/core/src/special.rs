//! Standard normal helpers shared by the tilt, Edgeworth and oracle code.

use libm::erfc;
use std::f64::consts::{PI, SQRT_2};

/// ln √(2π).
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density φ(x).
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// Standard normal distribution function Φ(x).
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// ln Φ(x), accurate in both tails.
pub fn std_normal_log_cdf(x: f64) -> f64 {
    if x > 0.0 {
        (-0.5 * erfc(x / SQRT_2)).ln_1p()
    } else if x > -30.0 {
        (0.5 * erfc(-x / SQRT_2)).ln()
    } else {
        // Mills ratio asymptotics: Φ(x) ≈ φ(x)/|x| (1 - 1/x² + 3/x⁴).
        let x2 = x * x;
        -0.5 * x2 - LN_SQRT_2PI - (-x).ln() + (-1.0 / x2 + 3.0 / (x2 * x2)).ln_1p()
    }
}

/// Inverse Mills ratio φ(x)/Φ(x).
pub fn mills_ratio(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI - std_normal_log_cdf(x)).exp()
}

/// Log density of N(mean, var) at x.
pub fn normal_log_pdf(mean: f64, var: f64, x: f64) -> f64 {
    let d = x - mean;
    -0.5 * d * d / var - 0.5 * (2.0 * PI * var).ln()
}

/// i-th raw moment of the standard normal law: 0 for odd i, (i-1)!! for even i.
pub fn std_normal_moment(i: u32) -> f64 {
    if i % 2 == 1 {
        return 0.0;
    }
    let mut acc = 1.0;
    let mut k = i as i64 - 1;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    acc
}

/// Kolmogorov–Smirnov distance between an empirical sample and Φ.
pub fn ks_distance_std_normal(sample: &[f64]) -> f64 {
    let mut xs: Vec<f64> = sample.iter().copied().filter(|x| x.is_finite()).collect();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = std_normal_cdf(x);
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            (f - lo).abs().max((hi - f).abs())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_of_standard_normal() {
        assert_eq!(std_normal_moment(1), 0.0);
        assert_eq!(std_normal_moment(2), 1.0);
        assert_eq!(std_normal_moment(4), 3.0);
        assert_eq!(std_normal_moment(8), 105.0);
        assert_eq!(std_normal_moment(7), 0.0);
    }

    #[test]
    fn log_cdf_matches_direct_evaluation() {
        for &x in &[-5.0, -1.0, 0.0, 0.5, 3.0, 8.0] {
            let direct = std_normal_cdf(x).ln();
            assert!((std_normal_log_cdf(x) - direct).abs() < 1e-13, "x={x}");
        }
        // Deep left tail stays finite and close to the asymptotic series.
        let v = std_normal_log_cdf(-40.0);
        assert!(
            v.is_finite() && (v - (-804.608_442_013_754)).abs() < 1e-6,
            "{v}"
        );
        let w = std_normal_log_cdf(-29.9);
        let z = std_normal_log_cdf(-30.1);
        assert!(w > z);
    }

    #[test]
    fn cdf_symmetry_and_known_value() {
        assert!((std_normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((std_normal_cdf(1.96) - 0.975_002_104_851_780).abs() < 1e-12);
        assert!((std_normal_cdf(-1.3) + std_normal_cdf(1.3) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn normal_log_pdf_reduces_to_standard() {
        for &x in &[-2.0, 0.0, 1.5] {
            assert!((normal_log_pdf(0.0, 1.0, x).exp() - std_normal_pdf(x)).abs() < 1e-15);
        }
    }
}
