use crate::error::{Error, Result};

/// Cubic spline through (x, y) with prescribed second derivatives at both ends.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    /// End curvatures are extrapolated from the four nearest samples at each end.
    pub fn new(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n < 4 || ys.len() != n {
            return Err(Error::Model(
                "a tabulated function needs at least 4 points".into(),
            ));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Model(
                "table abscissae must be strictly increasing".into(),
            ));
        }
        let second_diff = |i: usize| {
            let (h0, h1) = (xs[i + 1] - xs[i], xs[i + 2] - xs[i + 1]);
            2.0 * ((ys[i + 2] - ys[i + 1]) / h1 - (ys[i + 1] - ys[i]) / h0) / (h0 + h1)
        };
        // A second divided difference equals f'' at the centroid of its nodes
        // for cubics; extrapolate linearly from the two nearest to each end.
        let centroid = |i: usize| (xs[i] + xs[i + 1] + xs[i + 2]) / 3.0;
        let end_curvature = |i: usize, j: usize, x: f64| {
            let (ci, cj) = (centroid(i), centroid(j));
            let (si, sj) = (second_diff(i), second_diff(j));
            si + (x - ci) * (sj - si) / (cj - ci)
        };
        let m0 = end_curvature(0, 1, xs[0]);
        let mn = end_curvature(n - 3, n - 4, xs[n - 1]);

        // Tridiagonal system for interior second derivatives.
        let mut m = vec![0.0; n];
        m[0] = m0;
        m[n - 1] = mn;
        let k = n - 2;
        let mut diag = vec![0.0; k];
        let mut upper = vec![0.0; k];
        let mut lower = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for j in 0..k {
            let i = j + 1;
            let h0 = xs[i] - xs[i - 1];
            let h1 = xs[i + 1] - xs[i];
            lower[j] = h0;
            diag[j] = 2.0 * (h0 + h1);
            upper[j] = h1;
            rhs[j] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
        }
        rhs[0] -= lower[0] * m0;
        rhs[k - 1] -= upper[k - 1] * mn;
        // Thomas algorithm.
        for j in 1..k {
            let w = lower[j] / diag[j - 1];
            diag[j] -= w * upper[j - 1];
            rhs[j] -= w * rhs[j - 1];
        }
        m[k] = rhs[k - 1] / diag[k - 1];
        for j in (0..k - 1).rev() {
            m[j + 1] = (rhs[j] - upper[j] * m[j + 2]) / diag[j];
        }
        Ok(CubicSpline {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            m,
        })
    }

    pub fn first_x(&self) -> f64 {
        self.xs[0]
    }

    pub fn last_x(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.xs.len();
        match self.xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// Value and first three derivatives at x (extrapolating the end cubics).
    pub fn eval_all(&self, x: f64) -> [f64; 4] {
        let i = self.segment(x);
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let (a, b) = (x1 - x, x - x0);
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let v = m0 * a * a * a / (6.0 * h)
            + m1 * b * b * b / (6.0 * h)
            + (y0 / h - m0 * h / 6.0) * a
            + (y1 / h - m1 * h / 6.0) * b;
        let d1 = -m0 * a * a / (2.0 * h) + m1 * b * b / (2.0 * h) - (y0 / h - m0 * h / 6.0)
            + (y1 / h - m1 * h / 6.0);
        let d2 = (m0 * a + m1 * b) / h;
        let d3 = (m1 - m0) / h;
        [v, d1, d2, d3]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubic_polynomial() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 * 0.25).collect();
        let f = |x: f64| 0.5 * x * x * x - x * x + 2.0;
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let s = CubicSpline::new(&xs, &ys).unwrap();
        for &x in &[0.1, 1.3, 4.4, 7.0] {
            let [v, d1, d2, _] = s.eval_all(x);
            assert!((v - f(x)).abs() < 1e-10, "x={x}: {v} vs {}", f(x));
            assert!((d1 - (1.5 * x * x - 2.0 * x)).abs() < 2e-2);
            assert!((d2 - (3.0 * x - 2.0)).abs() < 0.2);
        }
    }

    #[test]
    fn rejects_unsorted_table() {
        assert!(CubicSpline::new(&[0.0, 2.0, 1.0, 3.0], &[0.0; 4]).is_err());
        assert!(CubicSpline::new(&[0.0, 1.0], &[0.0; 2]).is_err());
    }
}
