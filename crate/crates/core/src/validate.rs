//! The validation suite: each check measures one property against an oracle
//! and compares it with a threshold. `tolerance_scale` multiplies every
//! threshold (values below 1 tighten, 0 makes every bounded check fail).

use crate::edgeworth::edgeworth_error_curve_with;
use crate::error::{Error, Result};
use crate::exceedance::{
    eta_window, tail_probability, window_tail_ratio, ExceedanceApprox, ExceedanceOptions,
};
use crate::gibbs::{
    classify_regime, f_tilted_approx, f_tilted_density, fast_growth_approx, fast_growth_params,
    fast_level, solve_f_tilt, tilted_approx, variance_rho_fit, MeanFunction,
};
use crate::model::DensityModel;
use crate::oracle::{
    histogram_tv, mc_conditional_sample, tv_distance, tv_grid_fn, tv_values, ConditionalOracle,
    McOptions, OracleOptions,
};
use crate::quad::{integrate, QuadTol};
use crate::special::ks_distance_std_normal;
use crate::tilt::{solve_tilt, tilt_moments, tilted_density};
use serde::{Deserialize, Serialize};
use std::time::Instant;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A named measured value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    pub name: String,
    pub value: f64,
}

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: Vec<Measure>,
    pub detail: String,
    pub runtime_ms: f64,
    /// Wall-clock budget; exceeding it fails the check.
    pub budget_ms: f64,
}

impl Check {
    /// Looks up a measured value by name.
    pub fn get(&self, name: &str) -> Option<f64> {
        self.measured
            .iter()
            .find(|m| m.name == name)
            .map(|m| m.value)
    }

    /// All measured values whose names start with `prefix`, in order.
    pub fn series(&self, prefix: &str) -> Vec<f64> {
        self.measured
            .iter()
            .filter(|m| m.name.starts_with(prefix))
            .map(|m| m.value)
            .collect()
    }
}

/// Summary written by `validate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub version: String,
    pub tolerance_scale: f64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

struct Probe {
    measured: Vec<Measure>,
    failures: Vec<String>,
}

impl Probe {
    fn new() -> Self {
        Probe {
            measured: Vec::new(),
            failures: Vec::new(),
        }
    }

    fn record(&mut self, name: impl Into<String>, value: f64) {
        self.measured.push(Measure {
            name: name.into(),
            value,
        });
    }

    fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }
}

fn run_check<F>(name: &str, budget_s: f64, body: F) -> Check
where
    F: FnOnce(&mut Probe) -> Result<()>,
{
    let start = Instant::now();
    let mut p = Probe::new();
    let res = body(&mut p);
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    let budget_ms = budget_s * 1e3;
    if let Err(e) = res {
        p.failures.push(format!("error: {e}"));
    }
    if runtime_ms > budget_ms {
        p.failures.push(format!(
            "runtime {runtime_ms:.0} ms exceeds {budget_ms:.0} ms"
        ));
    }
    Check {
        name: name.to_string(),
        passed: p.failures.is_empty(),
        detail: if p.failures.is_empty() {
            "ok".into()
        } else {
            p.failures.join("; ")
        },
        measured: p.measured,
        runtime_ms,
        budget_ms,
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// The built-in models.
pub fn builtin_models() -> Vec<DensityModel> {
    vec![
        DensityModel::weibull(2.0).expect("weibull(2) is valid"),
        DensityModel::exp_exponential(),
        DensityModel::half_gaussian(),
    ]
}

fn weibull2() -> DensityModel {
    DensityModel::weibull(2.0).expect("weibull(2) is valid")
}

/// Largest level used in the solver round trip.
pub fn roundtrip_upper(model: &DensityModel) -> f64 {
    if model.name() == "exp_exponential" {
        500.0
    } else {
        1e3
    }
}

/// Criterion 1: `|m(solve_tilt(a)) - a| / a` over 20 log-spaced levels per built-in.
pub fn solver_roundtrip(scale: f64) -> Check {
    run_check("solver_roundtrip", 10.0, |p| {
        for model in builtin_models() {
            let m0 = tilt_moments(&model, 0.0)?.a;
            let (lo, hi) = ((2.0 * m0).ln(), roundtrip_upper(&model).ln());
            let mut worst: f64 = 0.0;
            for i in 0..20 {
                let a = (lo + (hi - lo) * i as f64 / 19.0).exp();
                let tp = solve_tilt(&model, a)?;
                let back = tilt_moments(&model, tp.t)?.a;
                worst = worst.max((back - a).abs() / a);
            }
            p.record(format!("max_rel_err:{}", model.name()), worst);
            p.require(
                worst <= 1e-9 * scale,
                format!("{} round trip error {worst:e}", model.name()),
            );
        }
        Ok(())
    })
}

/// Criterion 2: Half-normal log-MGF, mean and variance against their closed forms.
pub fn closed_form(scale: f64) -> Check {
    run_check("closed_form", 5.0, |p| {
        let model = DensityModel::half_gaussian();
        let cf = model
            .closed_forms()
            .ok_or_else(|| Error::numeric("half_gaussian has no closed forms"))?;
        let mut worst: f64 = 0.0;
        for t in [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0] {
            let tp = tilt_moments(&model, t)?;
            worst = worst
                .max((tp.log_phi - (cf.log_mgf)(t)).abs())
                .max((tp.a - (cf.mean)(t)).abs())
                .max((tp.s2 - (cf.variance)(t)).abs());
        }
        p.record("max_abs_err", worst);
        p.require(
            worst <= 1e-8 * scale,
            format!("closed-form error {worst:e}"),
        );
        Ok(())
    })
}

/// Probe tilts for the moment-ratio checks.
pub const RATIO_PROBES: [f64; 3] = [10.0, 100.0, 1000.0];

/// Criterion 3: `m/ψ`, `s²/ψ'`, `μ3/ψ''` approach 1 over the probe tilts.
pub fn moment_ratios(scale: f64) -> Check {
    run_check("moment_ratios", 30.0, |p| {
        for model in [weibull2(), DensityModel::exp_exponential()] {
            let mut devs = [Vec::new(), Vec::new(), Vec::new()];
            for t in RATIO_PROBES {
                let tp = tilt_moments(&model, t)?;
                let ps = model.psi_values(t)?;
                let r = [tp.a / ps.psi, tp.s2 / ps.d1, tp.mu3 / ps.d2];
                for (j, label) in ["m", "s2", "mu3"].iter().enumerate() {
                    p.record(format!("ratio_{label}:{}:t={t}", model.name()), r[j]);
                    devs[j].push((r[j] - 1.0).abs());
                }
            }
            for (j, label) in ["m", "s2", "mu3"].iter().enumerate() {
                let last = *devs[j].last().unwrap_or(&f64::NAN);
                p.require(
                    last <= 0.15 * scale,
                    format!(
                        "{} {label} ratio off by {last:.3e} at t = 1e3",
                        model.name()
                    ),
                );
                p.require(
                    strictly_decreasing(&devs[j]),
                    format!(
                        "{} {label} ratio not approaching 1 monotonically",
                        model.name()
                    ),
                );
            }
        }
        Ok(())
    })
}

/// Criterion 4: `|μ3 / s³|` strictly decreasing over the probe tilts.
pub fn skewness_decay(_scale: f64) -> Check {
    run_check("skewness_decay", 30.0, |p| {
        for model in [weibull2(), DensityModel::exp_exponential()] {
            let mut v = Vec::new();
            for t in RATIO_PROBES {
                let k = tilt_moments(&model, t)?.skewness().abs();
                p.record(format!("abs_skew:{}:t={t}", model.name()), k);
                v.push(k);
            }
            p.require(
                strictly_decreasing(&v),
                format!("{} skewness not decreasing", model.name()),
            );
        }
        Ok(())
    })
}

/// Criterion 5: Edgeworth vs Gaussian sup-norm gaps to the standardized convolution.
pub fn edgeworth_gap(scale: f64) -> Check {
    run_check("edgeworth_gap", 120.0, |p| {
        let opts = OracleOptions {
            step_rel: 1e-3,
            ..OracleOptions::default()
        };
        let gaps = edgeworth_error_curve_with(&weibull2(), 10.0, &[16, 64], &opts)?;
        for g in &gaps {
            p.record(format!("gap_edgeworth:n={}", g.n), g.sup_gap_edgeworth);
            p.record(format!("gap_gaussian:n={}", g.n), g.sup_gap_gaussian);
            p.require(
                g.sup_gap_edgeworth <= 1.05 * scale * g.sup_gap_gaussian,
                format!("n = {}: Edgeworth gap above 1.05 x Gaussian gap", g.n),
            );
        }
        p.require(
            gaps[1].sup_gap_edgeworth < gaps[0].sup_gap_edgeworth,
            "Edgeworth gap did not shrink from n = 16 to 64",
        );
        Ok(())
    })
}

/// Criterion 6: `TV(exact, π^{a})` at `a = 3` over `n ∈ {8, 16, 32, 64}`.
pub fn gibbs_moderate(scale: f64) -> Check {
    run_check("gibbs_moderate", 180.0, |p| {
        let model = weibull2();
        let tvs = moderate_tvs(&model, 3.0, &[8, 16, 32, 64])?;
        for (n, tv) in [8, 16, 32, 64].iter().zip(&tvs) {
            p.record(format!("tv:n={n}"), *tv);
            p.record(
                format!("ratio:n={n}"),
                classify_regime(&model, *n, 3.0)?.ratio,
            );
        }
        p.require(strictly_decreasing(&tvs), "TV not strictly decreasing in n");
        p.require(tvs[3] <= 0.5 * scale * tvs[0], "TV(64) above TV(8)/2");
        Ok(())
    })
}

/// `TV(exact marginal, π^{a})` for each `n`.
pub fn moderate_tvs(model: &DensityModel, a: f64, ns: &[usize]) -> Result<Vec<f64>> {
    let tp = solve_tilt(model, a)?;
    ns.iter()
        .map(|&n| {
            let o = ConditionalOracle::with_tilt(model, n, &tp, 1, &OracleOptions::default())?;
            Ok(tv_grid_fn(&o.marginal()?, |y| tilted_density(model, &tp, y))?.tv)
        })
        .collect()
}

/// Levels used to fit the variance-function exponent.
pub fn rho_fit_levels() -> Vec<f64> {
    (0..8).map(|i| 2.0 * 2f64.powi(i)).collect()
}

/// Criterion 7: Fast regime: `g` is at least as close as `π` to the exact law; in the
/// moderate regime `g ≈ π`.
pub fn fast_regime(scale: f64) -> Check {
    run_check("fast_regime", 120.0, |p| {
        let model = weibull2();
        let rho = variance_rho_fit(&model, &rho_fit_levels())?;
        let n = 32;
        let a = fast_level(n, rho, 1.0);
        p.record("rho", rho);
        p.record("a", a);
        p.record("ratio", classify_regime(&model, n, a)?.ratio);
        let tp = solve_tilt(&model, a)?;
        let o = ConditionalOracle::with_tilt(&model, n, &tp, 1, &OracleOptions::default())?;
        let marg = o.marginal()?;
        let g = fast_growth_params(&model, n, a)?;
        let tv_pi = tv_grid_fn(&marg, |y| tilted_density(&model, &tp, y))?.tv;
        let tv_g = tv_grid_fn(&marg, |y| fast_growth_approx(&g, &model, y))?.tv;
        p.record("tv_pi", tv_pi);
        p.record("tv_g", tv_g);
        p.require(
            tv_g <= tv_pi + 0.01 * scale,
            "TV(exact, g) above TV(exact, π) + 0.01",
        );
        let tp2 = solve_tilt(&model, 2.0)?;
        let g2 = fast_growth_params(&model, 64, 2.0)?;
        let s = tp2.s();
        let lo = (2.0 - 12.0 * s).max(0.0);
        let h = 1e-3 * s;
        let count = ((2.0 + 12.0 * s - lo) / h).ceil() as usize + 1;
        let tv_mod = tv_distance(
            |y| fast_growth_approx(&g2, &model, y),
            |y| tilted_density(&model, &tp2, y),
            lo,
            h,
            count,
        )?
        .tv;
        p.record("tv_g_pi_moderate", tv_mod);
        p.require(
            tv_mod < 0.05 * scale,
            "TV(g, π) at n = 64, a = 2 not below 0.05",
        );
        Ok(())
    })
}

/// Criterion 8: Two-coordinate block against `π^{a} ⊗ π^{a}`, `a = 3`.
pub fn joint_independence(_scale: f64) -> Check {
    run_check("joint_independence", 180.0, |p| {
        let model = weibull2();
        let tp = solve_tilt(&model, 3.0)?;
        let mut tvs = Vec::new();
        for n in [8, 16, 32] {
            let o = ConditionalOracle::with_tilt(&model, n, &tp, 2, &OracleOptions::default())?;
            let j = o.joint2(4)?;
            let marg: Vec<f64> = (0..j.count)
                .map(|i| tilted_density(&model, &tp, j.y(i)))
                .collect();
            let prod: Vec<f64> = (0..j.count * j.count)
                .map(|idx| marg[idx / j.count] * marg[idx % j.count])
                .collect();
            let tv = tv_values(&j.values, &prod, j.step * j.step)?.tv;
            p.record(format!("tv:n={n}"), tv);
            tvs.push(tv);
        }
        p.require(
            strictly_decreasing(&tvs),
            "joint TV not strictly decreasing",
        );
        Ok(())
    })
}

/// Criterion 9: Tail formula against the convolution tail at `a = 2`.
pub fn tail_formula(scale: f64) -> Check {
    run_check("tail_formula", 120.0, |p| {
        let model = weibull2();
        let tp = solve_tilt(&model, 2.0)?;
        let mut devs = Vec::new();
        let mut last = f64::NAN;
        for n in [16, 32, 64] {
            let o = ConditionalOracle::with_tilt(&model, n, &tp, 1, &OracleOptions::default())?;
            let r = (tail_probability(&model, n, 2.0)? - o.log_tail_probability()?).exp();
            p.record(format!("ratio:n={n}"), r);
            devs.push((r - 1.0).abs());
            last = r;
        }
        p.require(
            (1.0 - 0.3 * scale..=1.0 + 0.4 * scale).contains(&last),
            format!("ratio {last} outside [0.7, 1.4] at n = 64"),
        );
        p.require(
            strictly_decreasing(&devs),
            "tail ratio not approaching 1 monotonically",
        );
        Ok(())
    })
}

/// Criterion 10: Exceedance mixture against the exact law given `S_n ≥ n a`, `a = 2`.
pub fn exceedance(scale: f64) -> Check {
    run_check("exceedance", 120.0, |p| {
        let model = weibull2();
        let tp = solve_tilt(&model, 2.0)?;
        let mut tvs = Vec::new();
        for n in [8, 16, 32] {
            let o = ConditionalOracle::with_tilt(&model, n, &tp, 1, &OracleOptions::default())?;
            let ex = o.exceedance()?;
            let ap = ExceedanceApprox::new(&model, n, 2.0, &ExceedanceOptions::default())?;
            let tv = tv_grid_fn(&ex, |y| ap.density(&model, y))?.tv;
            p.record(format!("tv:n={n}"), tv);
            p.record(
                format!("prefactor_discrepancy:n={n}"),
                ap.prefactor_discrepancy,
            );
            tvs.push(tv);
        }
        p.require(
            strictly_decreasing(&tvs),
            "exceedance TV not strictly decreasing",
        );
        let eta = eta_window(&model, 64, 2.0)?;
        let r = window_tail_ratio(&model, 64, 2.0, eta)?;
        p.record("window_tail_ratio:n=64", r);
        p.require(r < 0.01 * scale, format!("P2/P1 = {r:e} not below 1%"));
        Ok(())
    })
}

/// Half-width of the Monte Carlo conditioning window on `S_n / n`.
pub fn mc_window(s: f64, n: usize) -> f64 {
    s / (2.0 * (n as f64).sqrt())
}

/// Criterion 11: Standardized accepted draws of `X_1` are close to normal.
pub fn concentration(scale: f64, seed: u64) -> Check {
    run_check("concentration", 60.0, |p| {
        let model = weibull2();
        let (n, a) = (64, 3.0);
        let tp = solve_tilt(&model, a)?;
        let r = mc_conditional_sample(
            &model,
            n,
            a,
            mc_window(tp.s(), n),
            10_000,
            seed,
            &McOptions::default(),
        )?;
        let z: Vec<f64> = r.samples.iter().map(|x| (x - a) / tp.s()).collect();
        let ks = ks_distance_std_normal(&z);
        p.record("ks", ks);
        p.record("accepted", z.len() as f64);
        p.record("acceptance_rate", r.acceptance_rate);
        p.require(
            ks < 0.05 * scale,
            format!("KS distance {ks} not below 0.05"),
        );
        Ok(())
    })
}

/// TV between a Monte Carlo histogram and the exact marginal, on bins of
/// width `s/10` over `a ± 6s`.
pub fn mc_vs_exact_tv(
    model: &DensityModel,
    n: usize,
    a: f64,
    samples: usize,
    seed: u64,
    opts: &OracleOptions,
) -> Result<(f64, f64)> {
    let tp = solve_tilt(model, a)?;
    let s = tp.s();
    let r = mc_conditional_sample(
        model,
        n,
        a,
        mc_window(s, n),
        samples,
        seed,
        &McOptions::default(),
    )?;
    let o = ConditionalOracle::with_tilt(model, n, &tp, 1, opts)?;
    let marg = o.marginal()?;
    let width = s / 10.0;
    let lo = (a - 6.0 * s).max(model.support_lo());
    let nb = ((a + 6.0 * s - lo) / width).ceil() as usize;
    let tol = QuadTol {
        rel: 1e-10,
        ..QuadTol::default()
    };
    let bins: Vec<f64> = (0..nb)
        .map(|i| {
            let x0 = lo + i as f64 * width;
            integrate(|x| marg.eval(x), x0, x0 + width, &tol)
        })
        .collect::<Result<_>>()?;
    Ok((
        histogram_tv(&r.samples, &bins, lo, width)?,
        r.acceptance_rate,
    ))
}

/// Criterion 12: Monte Carlo and convolution oracles agree.
pub fn cross_oracle(scale: f64, seed: u64) -> Check {
    run_check("cross_oracle", 60.0, |p| {
        let (tv, rate) = mc_vs_exact_tv(
            &weibull2(),
            32,
            3.0,
            100_000,
            seed,
            &OracleOptions::default(),
        )?;
        p.record("tv", tv);
        p.record("acceptance_rate", rate);
        p.require(
            tv < 0.05 * scale,
            format!("histogram TV {tv} not below 0.05"),
        );
        Ok(())
    })
}

/// Criterion 13: Conditioning on the mean of `f(X)`: the identity reproduces the
/// tilted approximation exactly; for `f(x) = x²` the exact conditional mass
/// lies in `[√a - 3 s_f, √a + 3 s_f]`.
pub fn f_mean(scale: f64) -> Check {
    run_check("f_mean", 60.0, |p| {
        let model = weibull2();
        let (n, a) = (32, 3.0);
        // Identity: pointwise and TV equality with the criterion-6 path.
        let tp = solve_tilt(&model, a)?;
        let o = ConditionalOracle::with_tilt(&model, n, &tp, 1, &OracleOptions::default())?;
        let marg = o.marginal()?;
        let id = MeanFunction::Identity;
        let ys: Vec<f64> = (0..marg.len()).step_by(97).map(|i| marg.x(i)).collect();
        let mut identical = true;
        for &y in &ys {
            identical &= f_tilted_approx(&model, &id, n, a, y)?.to_bits()
                == tilted_approx(&model, n, a, y)?.to_bits();
        }
        let tv_id = tv_grid_fn(&marg, |y| {
            f_tilted_approx(&model, &id, n, a, y).unwrap_or(f64::NAN)
        })?
        .tv;
        let tv_tilt = tv_grid_fn(&marg, |y| tilted_density(&model, &tp, y))?.tv;
        let bitwise = identical && tv_id.to_bits() == tv_tilt.to_bits();
        p.record("identity_bitwise", if bitwise { 1.0 } else { 0.0 });
        p.record("identity_tv", tv_id);
        p.record("tilted_tv", tv_tilt);
        p.require(bitwise, "identity f-mean differs from the tilt path");

        // f(x) = x²: U = X² is Exp(1) under weibull(2), tilted to mean a.
        let f = MeanFunction::Square;
        let ftp = solve_f_tilt(&model, &f, a)?;
        let lam = ftp.lambda;
        let ou = ConditionalOracle::from_tilted(
            |u: f64| {
                if u < 0.0 {
                    0.0
                } else {
                    (1.0 - lam) * (-(1.0 - lam) * u).exp()
                }
            },
            a,
            a,
            lam,
            0.0,
            n,
            1,
            &OracleOptions::default(),
        )?;
        let mu = ou.marginal()?;
        let approx_u = |u: f64| {
            if u <= 0.0 {
                0.0
            } else {
                f_tilted_density(&model, &f, &ftp, u.sqrt()) / (2.0 * u.sqrt())
            }
        };
        let tv_sq = tv_grid_fn(&mu, approx_u)?.tv;
        let lo = (a.sqrt() - 3.0 * ftp.s()).max(0.0);
        let hi = a.sqrt() + 3.0 * ftp.s();
        let masses = mu.masses();
        let total: f64 = masses.iter().sum();
        let inside: f64 = (0..mu.len())
            .filter(|&i| {
                let x = mu.x(i).max(0.0).sqrt();
                x >= lo && x <= hi
            })
            .map(|i| masses[i])
            .sum();
        let frac = inside / total;
        p.record("lambda", lam);
        p.record("s_f", ftp.s());
        p.record("square_tv", tv_sq);
        p.record("mass_in_interval", frac);
        p.require(
            frac >= 0.95 / scale.max(f64::MIN_POSITIVE),
            format!("mass {frac} below 0.95"),
        );
        p.require(
            tv_sq < 0.1 * scale,
            format!("f-mean TV {tv_sq} not below 0.1"),
        );
        Ok(())
    })
}

/// Density-class invariants of every built-in model.
pub fn model_invariants(_scale: f64) -> Check {
    run_check("model_invariants", 30.0, |p| {
        for model in builtin_models() {
            for c in model.check_invariants() {
                p.record(
                    format!("{}:{}", model.name(), c.name),
                    if c.passed { 1.0 } else { 0.0 },
                );
                p.require(
                    c.passed,
                    format!("{} {}: {}", model.name(), c.name, c.detail),
                );
            }
        }
        Ok(())
    })
}

/// Runs every check in order.
pub fn run_all(scale: f64, seed: u64) -> Summary {
    let checks = vec![
        model_invariants(scale),
        solver_roundtrip(scale),
        closed_form(scale),
        moment_ratios(scale),
        skewness_decay(scale),
        edgeworth_gap(scale),
        gibbs_moderate(scale),
        fast_regime(scale),
        joint_independence(scale),
        tail_formula(scale),
        exceedance(scale),
        concentration(scale, seed),
        cross_oracle(scale, seed),
        f_mean(scale),
    ];
    Summary {
        version: VERSION.to_string(),
        tolerance_scale: scale,
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cheap_checks_pass_and_zero_scale_fails() {
        let c = closed_form(1.0);
        assert!(c.passed, "{}", c.detail);
        assert!(c.get("max_abs_err").unwrap() < 1e-8);
        let c = closed_form(0.0);
        assert!(!c.passed);
        assert!(c.detail.contains("closed-form error"));
        let c = skewness_decay(1.0);
        assert!(c.passed, "{}", c.detail);
        assert_eq!(c.series("abs_skew:weibull").len(), 3);
    }

    #[test]
    fn errors_become_failures() {
        let c = run_check("boom", 10.0, |_| Err(Error::numeric("nope")));
        assert!(!c.passed && c.detail.contains("nope"));
    }
}
