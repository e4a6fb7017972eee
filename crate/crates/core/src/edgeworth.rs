//! Third-order Edgeworth density for sums of tilted summands.

use crate::error::{Error, Result};
use crate::model::DensityModel;
use crate::oracle::{standardized_sum_density, OracleOptions};
use crate::special::std_normal_pdf;
use crate::tilt::{tilt_moments, TiltParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Row size and summand tilt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeworthSpec {
    pub n: usize,
    pub tp: TiltParams,
}

impl EdgeworthSpec {
    pub fn new(n: usize, tp: TiltParams) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(format!(
                "Edgeworth row size must be at least 2, got {n}"
            )));
        }
        Ok(EdgeworthSpec { n, tp })
    }

    /// Coefficient of the Hermite term, `mu3 / (6 √n s³)`.
    pub fn skew_coefficient(&self) -> f64 {
        self.tp.skewness() / (6.0 * (self.n as f64).sqrt())
    }
}

/// `(x³ - 3x) φ(x)`.
pub fn hermite3_factor(x: f64) -> f64 {
    (x * x * x - 3.0 * x) * std_normal_pdf(x)
}

/// `φ(x) (1 + mu3/(6 √n s³) (x³ - 3x))`. The value can be negative in the
/// far tails; it is returned unclipped.
pub fn edgeworth_density(spec: &EdgeworthSpec, x: f64) -> f64 {
    std_normal_pdf(x) + spec.skew_coefficient() * hermite3_factor(x)
}

/// As [`edgeworth_density`], also flagging negative values.
pub fn edgeworth_density_flagged(spec: &EdgeworthSpec, x: f64) -> (f64, bool) {
    let v = edgeworth_density(spec, x);
    (v, v < 0.0)
}

/// Sup-norm gaps on `[-4, 4]` to the convolution oracle for one row size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeworthGap {
    pub n: usize,
    pub sup_gap_edgeworth: f64,
    pub sup_gap_gaussian: f64,
    /// Whether the Edgeworth density went negative on the window.
    pub negative: bool,
}

/// Range on which sup-norm gaps are measured.
pub const GAP_WINDOW: f64 = 4.0;

/// Compares the Edgeworth and plain Gaussian densities with the standardized
/// `n`-fold convolution of the tilt at `t`, for each `n`.
pub fn edgeworth_error_curve(
    model: &DensityModel,
    t: f64,
    ns: &[usize],
) -> Result<Vec<EdgeworthGap>> {
    edgeworth_error_curve_with(model, t, ns, &OracleOptions::default())
}

pub fn edgeworth_error_curve_with(
    model: &DensityModel,
    t: f64,
    ns: &[usize],
    opts: &OracleOptions,
) -> Result<Vec<EdgeworthGap>> {
    if ns.is_empty() {
        return Err(Error::domain("need at least one row size"));
    }
    let tp = tilt_moments(model, t)?;
    ns.par_iter()
        .map(|&n| {
            let spec = EdgeworthSpec::new(n, tp)?;
            let rho = standardized_sum_density(model, &tp, n, opts)?;
            let mut ge: f64 = 0.0;
            let mut gg: f64 = 0.0;
            let mut negative = false;
            for (i, &v) in rho.values.iter().enumerate() {
                let x = rho.x(i);
                if x.abs() > GAP_WINDOW {
                    continue;
                }
                let (e, neg) = edgeworth_density_flagged(&spec, x);
                negative |= neg;
                ge = ge.max((e - v).abs());
                gg = gg.max((std_normal_pdf(x) - v).abs());
            }
            Ok(EdgeworthGap {
                n,
                sup_gap_edgeworth: ge,
                sup_gap_gaussian: gg,
                negative,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, QuadTol};

    fn spec(mu3: f64, n: usize) -> EdgeworthSpec {
        let tp = TiltParams {
            t: 1.0,
            a: 1.0,
            s2: 1.0,
            mu3,
            log_phi: 0.0,
            psi_val: f64::NAN,
            psi_d1: f64::NAN,
            psi_d2: f64::NAN,
        };
        EdgeworthSpec::new(n, tp).unwrap()
    }

    #[test]
    fn hermite_values() {
        assert_eq!(hermite3_factor(0.0), 0.0);
        assert!((hermite3_factor(1.0) + 2.0 * std_normal_pdf(1.0)).abs() < 1e-16);
        assert!((hermite3_factor(2.0) - 2.0 * std_normal_pdf(2.0)).abs() < 1e-16);
    }

    #[test]
    fn reduces_to_gaussian() {
        let s = spec(0.0, 10);
        assert_eq!(edgeworth_density(&s, 0.7), std_normal_pdf(0.7));
        let s = spec(0.8, 10);
        let r3 = 3.0_f64.sqrt();
        assert!((edgeworth_density(&s, r3) - std_normal_pdf(r3)).abs() < 1e-15);
        assert!(EdgeworthSpec::new(1, s.tp).is_err());
    }

    #[test]
    fn correction_preserves_first_two_moments() {
        let s = spec(1.3, 4);
        let tol = QuadTol::default();
        for (k, target) in [(0, 1.0), (1, 0.0), (2, 1.0)] {
            let v = integrate(|x| x.powi(k) * edgeworth_density(&s, x), -40.0, 40.0, &tol).unwrap();
            assert!((v - target).abs() < 1e-9, "moment {k}: {v}");
        }
    }

    #[test]
    fn strong_skew_goes_negative_and_is_flagged() {
        let s = spec(5.0, 2);
        let (v, neg) = edgeworth_density_flagged(&s, -4.0);
        assert!(v < 0.0 && neg);
    }

    #[test]
    fn near_gaussian_summands() {
        let m = DensityModel::half_gaussian();
        let gaps = edgeworth_error_curve(&m, 30.0, &[16]).unwrap();
        assert!(gaps[0].sup_gap_edgeworth < 1e-2 && gaps[0].sup_gap_gaussian < 1e-2);
    }
}
