//! Safeguarded Newton iteration for increasing functions.

use crate::error::{Error, Result};

/// Finds the zero of an increasing function.
///
/// `fdf` returns the value and derivative at a point. Newton steps are taken
/// while they stay inside the bracket learned so far; otherwise the iteration
/// bisects (both ends known) or expands geometrically (one end unknown).
/// `done` decides convergence from the current point, residual and derivative.
pub fn solve_increasing<F, D>(
    mut fdf: F,
    x0: f64,
    bracket: (f64, f64),
    done: D,
    max_iter: usize,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
    D: Fn(f64, f64, f64) -> bool,
{
    let (mut lo, mut hi) = bracket;
    let mut x = x0.clamp(next_up(lo), next_down(hi));
    let mut expand = 1.0_f64;
    for _ in 0..max_iter {
        let (fx, dfx) = fdf(x)?;
        if !fx.is_finite() {
            return Err(Error::numeric(format!("residual is not finite at {x}")));
        }
        if done(x, fx, dfx) {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if lo.is_finite()
            && hi.is_finite()
            && (hi - lo) <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs())
        {
            return Ok(x);
        }
        let mut next = x - fx / dfx;
        let inside = next.is_finite() && next > lo && next < hi;
        if !inside {
            next = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => {
                    expand *= 2.0;
                    lo + expand * lo.abs().max(1.0)
                }
                (false, true) => {
                    expand *= 2.0;
                    hi - expand * hi.abs().max(1.0)
                }
                (false, false) => return Err(Error::numeric("no bracket for root")),
            };
        }
        x = next;
    }
    Err(Error::numeric(format!(
        "root finder did not converge in {max_iter} iterations (bracket [{lo}, {hi}])"
    )))
}

fn next_up(x: f64) -> f64 {
    if x.is_finite() {
        x + f64::EPSILON * x.abs().max(f64::MIN_POSITIVE)
    } else {
        x
    }
}

fn next_down(x: f64) -> f64 {
    if x.is_finite() {
        x - f64::EPSILON * x.abs().max(f64::MIN_POSITIVE)
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_finds_cube_root() {
        let r = solve_increasing(
            |x| Ok((x * x * x - 2.0, 3.0 * x * x)),
            1.0,
            (0.0, f64::INFINITY),
            |_, fx, _| fx.abs() < 1e-15,
            100,
        )
        .unwrap();
        assert!((r - 2.0_f64.cbrt()).abs() < 1e-15);
    }

    #[test]
    fn recovers_from_bad_derivative() {
        // atan has a flat derivative far from the root; Newton overshoots.
        let r = solve_increasing(
            |x: f64| Ok((x.atan() - 0.5, 1.0 / (1.0 + x * x))),
            10.0,
            (f64::NEG_INFINITY, f64::INFINITY),
            |_, fx, _| fx.abs() < 1e-14,
            200,
        )
        .unwrap();
        assert!((r - 0.5_f64.tan()).abs() < 1e-12);
    }

    #[test]
    fn unbounded_expansion() {
        let r = solve_increasing(
            |x: f64| Ok((x - 1e6, 1e-9)),
            0.0,
            (f64::NEG_INFINITY, f64::INFINITY),
            |_, fx, _| fx.abs() < 1e-6,
            200,
        )
        .unwrap();
        assert!((r - 1e6).abs() < 1e-6);
    }
}
