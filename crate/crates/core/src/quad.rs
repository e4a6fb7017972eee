//! Quadrature: adaptive Gauss–Kronrod (21 points) for vector-valued
//! integrands, a panel scheme that marches outward from a Laplace centre, and
//! Gauss–Legendre rules.

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_183_043,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the nodes XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Tolerances for the adaptive integrators.
#[derive(Debug, Clone, Copy)]
pub struct QuadTol {
    pub rel: f64,
    pub abs: f64,
    pub max_subdivisions: usize,
    /// A panel is negligible once its absolute mass is below `tail` times the running total.
    pub tail: f64,
}

impl Default for QuadTol {
    fn default() -> Self {
        QuadTol {
            rel: 1e-13,
            abs: 0.0,
            max_subdivisions: 400,
            tail: 1e-17,
        }
    }
}

/// Result of a vector-valued integration.
#[derive(Debug, Clone, Copy)]
pub struct Estimate<const N: usize> {
    pub value: [f64; N],
    /// Integral of the absolute value of each component.
    pub abs: [f64; N],
    pub err: [f64; N],
    pub converged: bool,
}

impl<const N: usize> Estimate<N> {
    fn zero() -> Self {
        Estimate {
            value: [0.0; N],
            abs: [0.0; N],
            err: [0.0; N],
            converged: true,
        }
    }

    fn add(&mut self, other: &Estimate<N>) {
        for j in 0..N {
            self.value[j] += other.value[j];
            self.abs[j] += other.abs[j];
            self.err[j] += other.err[j];
        }
        self.converged &= other.converged;
    }
}

struct Piece<const N: usize> {
    a: f64,
    b: f64,
    est: Estimate<N>,
    key: f64,
}

impl<const N: usize> PartialEq for Piece<N> {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}
impl<const N: usize> Eq for Piece<N> {}
impl<const N: usize> PartialOrd for Piece<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Piece<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key)
    }
}

fn gk21<const N: usize, F>(f: &F, a: f64, b: f64) -> Result<Estimate<N>>
where
    F: Fn(f64) -> [f64; N],
{
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let mut kron = [0.0; N];
    let mut gauss = [0.0; N];
    let mut absk = [0.0; N];
    for (i, (&x, &w)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let pts: &[f64] = if x == 0.0 { &[0.0] } else { &[-1.0, 1.0] };
        for &sgn in pts {
            let v = f(c + sgn * hl * x);
            for j in 0..N {
                if !v[j].is_finite() {
                    return Err(Error::numeric(format!(
                        "non-finite integrand value at x = {}",
                        c + sgn * hl * x
                    )));
                }
                kron[j] += w * v[j];
                absk[j] += w * v[j].abs();
                if i % 2 == 1 {
                    gauss[j] += WG[i / 2] * v[j];
                }
            }
        }
    }
    let mut est = Estimate::zero();
    for j in 0..N {
        est.value[j] = kron[j] * hl;
        est.abs[j] = absk[j] * hl.abs();
        est.err[j] = ((kron[j] - gauss[j]) * hl).abs();
    }
    Ok(est)
}

/// Globally adaptive Gauss–Kronrod integration of a vector-valued integrand on a finite interval.
///
/// Convergence requires every component to satisfy `err ≤ max(tol.abs, tol.rel · ∫|f_j|)`.
pub fn integrate_vec<const N: usize, F>(f: &F, a: f64, b: f64, tol: &QuadTol) -> Result<Estimate<N>>
where
    F: Fn(f64) -> [f64; N],
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("integration bounds must be finite"));
    }
    if a == b {
        return Ok(Estimate::zero());
    }
    let key = |e: &Estimate<N>| {
        (0..N)
            .map(|j| e.err[j] / tol.abs.max(tol.rel * e.abs[j]).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    };
    let first = gk21(f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Piece {
        a,
        b,
        key: key(&first),
        est: first,
    });
    let mut total = first;
    let done = |t: &Estimate<N>| (0..N).all(|j| t.err[j] <= tol.abs.max(tol.rel * t.abs[j]));
    let mut splits = 0;
    while !done(&total) {
        if splits >= tol.max_subdivisions {
            total.converged = false;
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in floating point.
            heap.push(worst);
            total.converged = false;
            break;
        }
        let left = gk21(f, worst.a, mid)?;
        let right = gk21(f, mid, worst.b)?;
        for j in 0..N {
            total.value[j] += left.value[j] + right.value[j] - worst.est.value[j];
            total.abs[j] += left.abs[j] + right.abs[j] - worst.est.abs[j];
            total.err[j] += left.err[j] + right.err[j] - worst.est.err[j];
        }
        heap.push(Piece {
            a: worst.a,
            b: mid,
            key: key(&left),
            est: left,
        });
        heap.push(Piece {
            a: mid,
            b: worst.b,
            key: key(&right),
            est: right,
        });
        splits += 1;
    }
    // Re-sum from the leaves to shed the drift of the running updates.
    let mut resummed = Estimate::zero();
    resummed.converged = total.converged;
    let mut pieces: Vec<_> = heap.into_vec();
    pieces.sort_by(|p, q| p.a.total_cmp(&q.a));
    for p in &pieces {
        resummed.add(&p.est);
    }
    resummed.converged = total.converged;
    Ok(resummed)
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<F>(f: F, a: f64, b: f64, tol: &QuadTol) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let g = |x: f64| [f(x)];
    Ok(integrate_vec(&g, a, b, tol)?.value[0])
}

/// Placement of the panels: they grow geometrically outward from `center` in
/// units of `scale`, clipped to `[lo, hi]` (either bound may be infinite).
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub center: f64,
    pub scale: f64,
    pub lo: f64,
    pub hi: f64,
}

const MAX_PANELS_PER_SIDE: usize = 160;

/// Integrates `f` over `[frame.lo, frame.hi]` by marching panels away from the
/// centre until the last panel on each side is negligible (judged on every
/// component's absolute mass).
pub fn integrate_panels<const N: usize, F>(
    f: &F,
    frame: &Frame,
    tol: &QuadTol,
) -> Result<Estimate<N>>
where
    F: Fn(f64) -> [f64; N],
{
    if !(frame.scale > 0.0 && frame.scale.is_finite()) {
        return Err(Error::numeric(format!(
            "panel scale must be positive, got {}",
            frame.scale
        )));
    }
    if !(frame.center >= frame.lo && frame.center <= frame.hi) {
        return Err(Error::numeric(format!(
            "panel centre {} outside [{}, {}]",
            frame.center, frame.lo, frame.hi
        )));
    }
    let mut total = Estimate::<N>::zero();
    for dir in [1.0_f64, -1.0] {
        let bound = if dir > 0.0 { frame.hi } else { frame.lo };
        let mut x0 = frame.center;
        let mut k = 0usize;
        loop {
            if x0 == bound {
                break;
            }
            if k >= MAX_PANELS_PER_SIDE {
                return Err(Error::numeric(
                    "panel integration did not reach a negligible tail (integral may diverge)",
                ));
            }
            let width = frame.scale * f64::powi(2.0, (k / 2) as i32);
            let mut x1 = x0 + dir * width;
            if (dir > 0.0 && x1 > bound) || (dir < 0.0 && x1 < bound) {
                x1 = bound;
            }
            let (a, b) = if dir > 0.0 { (x0, x1) } else { (x1, x0) };
            let local = QuadTol {
                abs: tol.abs.max(tol.rel * 1e-3 * total.abs[0]),
                ..*tol
            };
            let est = integrate_vec(f, a, b, &local)?;
            total.add(&est);
            k += 1;
            let negligible = (0..N).all(|j| est.abs[j] <= tol.tail * total.abs[j]);
            if k >= 2 && negligible {
                break;
            }
            x0 = x1;
        }
    }
    Ok(total)
}

/// Locates the maximum of a unimodal log-integrand `l` on `[lo, ∞)` and a
/// width over which it drops by one half. Returns the frame together with
/// `l` at the peak. `start` is any point of the support.
pub fn peak_frame<F>(l: &F, lo: f64, start: f64) -> Result<(Frame, f64)>
where
    F: Fn(f64) -> f64,
{
    let clamp = |x: f64| x.max(lo);
    let mut x = clamp(start);
    let lx = l(x);
    if !lx.is_finite() {
        return Err(Error::numeric(format!(
            "log-integrand is not finite at the start point {x}"
        )));
    }
    let mut step = 1e-2 * x.abs().max(1.0);
    // March uphill with doubling steps until the value stops increasing.
    let dir = if l(clamp(x + step)) >= lx { 1.0 } else { -1.0 };
    let mut prev = clamp(x - dir * step);
    let mut lcur = lx;
    let (mut a, mut b) = loop {
        let next = clamp(x + dir * step);
        let ln = l(next);
        if ln == f64::INFINITY {
            return Err(Error::numeric(
                "log-integrand is unbounded (integral diverges)",
            ));
        }
        if next == x || !(ln > lcur) {
            break (prev.min(next), prev.max(next));
        }
        prev = x;
        x = next;
        lcur = ln;
        step *= 2.0;
        if !step.is_finite() {
            return Err(Error::numeric(
                "log-integrand has no maximum (integral diverges)",
            ));
        }
    };
    // Golden-section refinement on [a, b].
    let g = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut lc, mut ld) = (l(c), l(d));
    for _ in 0..200 {
        if (b - a) <= 1e-12 * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        if lc >= ld {
            b = d;
            d = c;
            ld = lc;
            c = b - g * (b - a);
            lc = l(c);
        } else {
            a = c;
            c = d;
            lc = ld;
            d = a + g * (b - a);
            ld = l(d);
        }
    }
    let (mut center, mut lmax) = if lc >= ld { (c, lc) } else { (d, ld) };
    if l(lo) > lmax {
        center = lo;
        lmax = l(lo);
    }
    let half = |dir: f64| -> f64 {
        let mut w = 1e-3 * center.abs().max(1e-3);
        loop {
            let y = center + dir * w;
            if y < lo {
                return f64::INFINITY;
            }
            if !(l(y) > lmax - 0.5) || w > 1e300 {
                break;
            }
            w *= 2.0;
        }
        let (mut p, mut q) = (0.0, w);
        for _ in 0..60 {
            let m = 0.5 * (p + q);
            if l(center + dir * m) > lmax - 0.5 {
                p = m;
            } else {
                q = m;
            }
        }
        q
    };
    let scale = half(1.0).min(half(-1.0));
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::numeric(
            "could not size the integration frame around the peak",
        ));
    }
    Ok((
        Frame {
            center,
            scale,
            lo,
            hi: f64::INFINITY,
        },
        lmax,
    ))
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            dp = nf * (x * pn - p0) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_kronrod_polynomial_and_exponential() {
        let tol = QuadTol::default();
        let v = integrate(|x| x * x, 0.0, 3.0, &tol).unwrap();
        assert!((v - 9.0).abs() < 1e-13);
        let e = integrate(|x: f64| (-x).exp(), 0.0, 40.0, &tol).unwrap();
        assert!((e - (1.0 - (-40.0_f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let tol = QuadTol::default();
        let v = integrate(|x: f64| x.sqrt(), 0.0, 1.0, &tol).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn panels_integrate_gaussian_on_half_line() {
        let frame = Frame {
            center: 2.0,
            scale: 1.0,
            lo: 0.0,
            hi: f64::INFINITY,
        };
        let f = |x: f64| [(-0.5 * (x - 2.0) * (x - 2.0)).exp()];
        let est = integrate_panels(&f, &frame, &QuadTol::default()).unwrap();
        let exact = (2.0 * std::f64::consts::PI).sqrt() * crate::special::std_normal_cdf(2.0);
        assert!(
            (est.value[0] - exact).abs() < 1e-13,
            "{} vs {exact}",
            est.value[0]
        );
    }

    #[test]
    fn panels_report_divergence() {
        let frame = Frame {
            center: 0.0,
            scale: 1.0,
            lo: 0.0,
            hi: f64::INFINITY,
        };
        let f = |x: f64| [x.exp()];
        assert!(integrate_panels(&f, &frame, &QuadTol::default()).is_err());
    }

    #[test]
    fn gauss_legendre_integrates_high_degree_polynomials() {
        let (x, w) = gauss_legendre(32);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(62)).sum();
        assert!((v - 2.0 / 63.0).abs() < 1e-14);
        let (x5, w5) = gauss_legendre(5);
        assert!((x5[2]).abs() < 1e-15);
        assert!((w5[2] - 128.0 / 225.0).abs() < 1e-14);
    }

    #[test]
    fn peak_frame_finds_gaussian_mode_and_width() {
        let l = |x: f64| -0.5 * ((x - 7.0) / 0.3).powi(2);
        let (fr, lmax) = peak_frame(&l, 0.0, 1.0).unwrap();
        assert!((fr.center - 7.0).abs() < 1e-6, "{}", fr.center);
        assert!(lmax.abs() < 1e-12);
        assert!((fr.scale - 0.3).abs() < 1e-9, "{}", fr.scale);
        // Downhill start and a boundary maximum.
        let (fr, _) = peak_frame(&l, 0.0, 50.0).unwrap();
        assert!((fr.center - 7.0).abs() < 1e-6);
        let (fr, _) = peak_frame(&|x: f64| -x, 0.0, 3.0).unwrap();
        assert_eq!(fr.center, 0.0);
        assert!((fr.scale - 0.5).abs() < 1e-9);
        assert!(peak_frame(&|x: f64| x, 0.0, 1.0).is_err());
    }
}
