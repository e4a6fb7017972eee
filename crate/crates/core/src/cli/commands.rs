//! Subcommand bodies. Each returns its rows; writing is left to the caller.

use super::config::{ExperimentConfig, RegimeChoice};
use super::report::{ApproxReport, Curve, TiltRow};
use crate::error::{Error, Result};
use crate::exceedance::{
    eta_window_with, tail_probability, window_tail_ratio, ExceedanceApprox, ExceedanceOptions,
};
use crate::gibbs::{
    classify_regime, fast_growth_approx, fast_growth_params_with_tilt, z_statistics, JointApprox,
    JointKind, JointMode,
};
use crate::model::DensityModel;
use crate::oracle::{
    tv_grid_fn, tv_values, ConditionalOracle, GridDensity, OracleOptions, TvReport,
};
use crate::tilt::{solve_tilt, tilted_density, TiltParams};
use crate::validate::{mc_vs_exact_tv, run_all, Summary};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::time::Instant;

/// Points between curve samples.
pub const CURVE_STRIDE: usize = 10;
/// Stride used when tabulating two-coordinate oracle blocks.
pub const JOINT_STRIDE: usize = 4;

fn oracle_options(cfg: &ExperimentConfig) -> OracleOptions {
    OracleOptions {
        step_rel: cfg.grid_step,
        half_width: cfg.half_width,
    }
}

fn model_label(cfg: &ExperimentConfig) -> String {
    cfg.model_spec()
        .ok()
        .and_then(|m| m.short_name())
        .unwrap_or_else(|| cfg.model.clone())
}

/// Tilt table over `a_grid`; failed solves become rows with a status.
pub fn cmd_tilt(cfg: &ExperimentConfig) -> Result<Vec<TiltRow>> {
    let model = cfg.model_spec()?.build()?;
    Ok(cfg
        .a_grid
        .par_iter()
        .map(|&a| match solve_tilt(&model, a) {
            Ok(tp) => TiltRow {
                a,
                t: Some(tp.t),
                m: Some(tp.a),
                s2: Some(tp.s2),
                mu3: Some(tp.mu3),
                skew_ratio: Some(tp.skewness()),
                psi: Some(tp.psi_val),
                psi_d1: Some(tp.psi_d1),
                v: Some(tp.s2),
                status: "ok".into(),
            },
            Err(e) => TiltRow {
                a,
                t: None,
                m: None,
                s2: None,
                mu3: None,
                skew_ratio: None,
                psi: None,
                psi_d1: None,
                v: None,
                status: format!("error: {e}"),
            },
        })
        .collect())
}

struct RowCtx<'a> {
    model: &'a DensityModel,
    label: String,
    regime: String,
    ratio: f64,
    n: usize,
    a: f64,
}

impl RowCtx<'_> {
    fn report(
        &self,
        name: &str,
        start: Instant,
        tv: Result<TvReport>,
        mut diag: BTreeMap<String, f64>,
    ) -> ApproxReport {
        diag.insert("regime_ratio".into(), self.ratio);
        match tv {
            Ok(r) => ApproxReport {
                approximation: name.into(),
                model: self.label.clone(),
                regime: self.regime.clone(),
                n: self.n,
                a: self.a,
                tv: r.tv,
                sup_gap: r.sup_gap,
                neg_mass: r.neg_mass.1,
                runtime_ms: start.elapsed().as_secs_f64() * 1e3,
                diagnostics: diag,
                status: "ok".into(),
            },
            Err(e) => {
                let mut r = ApproxReport::failed(name, &self.label, self.n, self.a, e.to_string());
                r.regime = self.regime.clone();
                r.diagnostics = diag;
                r
            }
        }
    }
}

fn curve(name: &str, n: usize, a: f64, marg: &GridDensity, g: impl Fn(f64) -> f64) -> Curve {
    let idx: Vec<usize> = (0..marg.len()).step_by(CURVE_STRIDE).collect();
    Curve {
        approximation: name.into(),
        n,
        a,
        x: idx.iter().map(|&i| marg.x(i)).collect(),
        exact: idx.iter().map(|&i| marg.values[i]).collect(),
        approx: idx.iter().map(|&i| g(marg.x(i))).collect(),
    }
}

/// TV of a block approximation against the exact marginal (`k = 1`) or the
/// exact two-coordinate block (`k = 2`).
fn joint_tv(
    o: &ConditionalOracle,
    marg: &GridDensity,
    ja: &JointApprox,
    k: usize,
) -> Result<TvReport> {
    match k {
        1 => {
            let vals: Vec<f64> = (0..marg.len())
                .map(|i| ja.eval(&[marg.x(i)]))
                .collect::<Result<_>>()?;
            tv_values(&marg.values, &vals, marg.step)
        }
        2 => {
            let j = o.joint2(JOINT_STRIDE)?;
            let vals: Vec<f64> = (0..j.count * j.count)
                .into_par_iter()
                .map(|idx| ja.eval(&[j.y(idx / j.count), j.y(idx % j.count)]))
                .collect::<Result<_>>()?;
            tv_values(&j.values, &vals, j.step * j.step)
        }
        _ => Err(Error::domain(format!(
            "exact blocks are tabulated for k <= 2, got k = {k}"
        ))),
    }
}

fn gibbs_row(
    cfg: &ExperimentConfig,
    model: &DensityModel,
    n: usize,
    a: f64,
) -> (Vec<ApproxReport>, Vec<Curve>) {
    let label = model_label(cfg);
    let setup = (|| -> Result<(TiltParams, f64, ConditionalOracle, GridDensity)> {
        let tp = solve_tilt(model, a)?;
        let ratio = classify_regime(model, n, a)?.ratio;
        let o =
            ConditionalOracle::with_tilt(model, n, &tp, cfg.block.min(2), &oracle_options(cfg))?;
        let marg = o.marginal()?;
        Ok((tp, ratio, o, marg))
    })();
    let (tp, ratio, o, marg) = match setup {
        Ok(v) => v,
        Err(e) => {
            return (
                vec![ApproxReport::failed("oracle", &label, n, a, e.to_string())],
                vec![],
            )
        }
    };
    let regime = match cfg.regime {
        RegimeChoice::Auto => classify_regime(model, n, a)
            .map(|r| r.kind.to_string())
            .unwrap_or_default(),
        RegimeChoice::Moderate => "moderate".into(),
        RegimeChoice::Fast => "fast".into(),
    };
    let ctx = RowCtx {
        model,
        label,
        regime,
        ratio,
        n,
        a,
    };
    let with_fast = cfg.regime != RegimeChoice::Moderate;
    let mut rows = Vec::new();
    let mut curves = Vec::new();

    let start = Instant::now();
    let pi = |y: f64| tilted_density(model, &tp, y);
    rows.push(ctx.report("tilted", start, tv_grid_fn(&marg, pi), BTreeMap::new()));
    curves.push(curve("tilted", n, a, &marg, pi));

    if with_fast {
        let start = Instant::now();
        match fast_growth_params_with_tilt(model, n, &tp) {
            Ok(g) => {
                let gf = |y: f64| fast_growth_approx(&g, model, y);
                rows.push(ctx.report("fast_growth", start, tv_grid_fn(&marg, gf), BTreeMap::new()));
                curves.push(curve("fast_growth", n, a, &marg, gf));
            }
            Err(e) => rows.push(ctx.report("fast_growth", start, Err(e), BTreeMap::new())),
        }
    }

    let k = cfg.block;
    let z_max = z_statistics(ctx.model, n, a, &vec![a + tp.s(); k])
        .ok()
        .and_then(|z| z.into_iter().map(f64::abs).reduce(f64::max));
    let mut kinds = vec![
        ("joint_common", JointKind::Moderate(JointMode::CommonTilt)),
        (
            "joint_per_index",
            JointKind::Moderate(JointMode::PerIndexTilt),
        ),
    ];
    if with_fast {
        kinds.push(("joint_fast", JointKind::Fast));
    }
    for (name, kind) in kinds {
        let start = Instant::now();
        let tv = JointApprox::new(model, n, a, kind).and_then(|ja| joint_tv(&o, &marg, &ja, k));
        let mut diag = BTreeMap::new();
        if let Some(z) = z_max {
            diag.insert("z_max".into(), z);
        }
        rows.push(ctx.report(&format!("{name}_k{k}"), start, tv, diag));
    }

    if cfg.mc_samples > 0 {
        let start = Instant::now();
        let mut diag = BTreeMap::new();
        let tv = mc_vs_exact_tv(model, n, a, cfg.mc_samples, cfg.seed, &oracle_options(cfg)).map(
            |(tv, rate)| {
                diag.insert("acceptance_rate".into(), rate);
                TvReport {
                    tv,
                    sup_gap: f64::NAN,
                    neg_mass: (0.0, 0.0),
                }
            },
        );
        rows.push(ctx.report("mc_histogram", start, tv, diag));
    }
    (rows, curves)
}

/// Approximations against the exact conditional law, one block of rows per `n`.
pub fn cmd_gibbs(cfg: &ExperimentConfig) -> Result<(Vec<ApproxReport>, Vec<Curve>)> {
    let model = cfg.model_spec()?.build()?;
    let levels = cfg.a.levels(&model, &cfg.n)?;
    let parts: Vec<_> = cfg
        .n
        .par_iter()
        .zip(levels.par_iter())
        .map(|(&n, &a)| gibbs_row(cfg, &model, n, a))
        .collect();
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for (r, c) in parts {
        rows.extend(r);
        curves.extend(c);
    }
    Ok((rows, curves))
}

fn exceed_rows(
    cfg: &ExperimentConfig,
    model: &DensityModel,
    n: usize,
    a: f64,
) -> Vec<ApproxReport> {
    let label = model_label(cfg);
    let setup = (|| -> Result<(f64, ConditionalOracle)> {
        let tp = solve_tilt(model, a)?;
        let ratio = classify_regime(model, n, a)?.ratio;
        let o = ConditionalOracle::with_tilt(model, n, &tp, 1, &oracle_options(cfg))?;
        Ok((ratio, o))
    })();
    let (ratio, o) = match setup {
        Ok(v) => v,
        Err(e) => return vec![ApproxReport::failed("oracle", &label, n, a, e.to_string())],
    };
    let ctx = RowCtx {
        model,
        label,
        regime: classify_regime(model, n, a)
            .map(|r| r.kind.to_string())
            .unwrap_or_default(),
        ratio,
        n,
        a,
    };
    let mut rows = Vec::new();

    // Tail probability, compared as two-point laws {S ≥ na, S < na}.
    let start = Instant::now();
    let mut diag = BTreeMap::new();
    let tv = tail_probability(model, n, a).and_then(|lp| {
        let exact = o.log_tail_probability()?;
        diag.insert("tail_ratio".into(), (lp - exact).exp());
        let gap = (lp.exp() - exact.exp()).abs();
        Ok(TvReport {
            tv: gap,
            sup_gap: gap,
            neg_mass: (0.0, 0.0),
        })
    });
    rows.push(ctx.report("tail", start, tv, diag));

    let start = Instant::now();
    let mut diag = BTreeMap::new();
    let opts = ExceedanceOptions {
        kernel: cfg.kernel,
        eta_scale: cfg.eta_scale,
        ..ExceedanceOptions::default()
    };
    let tv = ExceedanceApprox::new(model, n, a, &opts).and_then(|ap| {
        diag.insert("prefactor_discrepancy".into(), ap.prefactor_discrepancy);
        diag.insert("eta".into(), ap.eta);
        tv_grid_fn(&o.exceedance()?, |y| ap.density(model, y))
    });
    let name = match cfg.kernel {
        crate::exceedance::ExceedanceKernel::Tilted => "exceedance_tilted",
        crate::exceedance::ExceedanceKernel::FastGrowth => "exceedance_fast",
    };
    rows.push(ctx.report(name, start, tv, diag));

    // Mass of the sum law beyond the window, relative to the whole tail.
    let start = Instant::now();
    let mut diag = BTreeMap::new();
    let tv = eta_window_with(model, n, a, cfg.eta_scale)
        .and_then(|eta| {
            diag.insert("eta".into(), eta);
            window_tail_ratio(model, n, a, eta)
        })
        .map(|r| {
            diag.insert("window_tail_ratio".into(), r);
            TvReport {
                tv: r,
                sup_gap: f64::NAN,
                neg_mass: (0.0, 0.0),
            }
        });
    rows.push(ctx.report("window", start, tv, diag));
    rows
}

/// Tail formula, exceedance mixture and window diagnostics per `n`.
pub fn cmd_exceed(cfg: &ExperimentConfig) -> Result<Vec<ApproxReport>> {
    let model = cfg.model_spec()?.build()?;
    let levels = cfg.a.levels(&model, &cfg.n)?;
    let parts: Vec<_> = cfg
        .n
        .par_iter()
        .zip(levels.par_iter())
        .map(|(&n, &a)| exceed_rows(cfg, &model, n, a))
        .collect();
    Ok(parts.into_iter().flatten().collect())
}

pub fn cmd_validate(cfg: &ExperimentConfig) -> Summary {
    run_all(cfg.tolerance_scale, cfg.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text).unwrap()
    }

    #[test]
    fn tilt_rows_keep_going_after_errors() {
        let rows = cmd_tilt(&cfg("model = exp_exponential\na_grid = 3, 800, 5\n")).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].status, "ok");
        assert!(rows[1].status.starts_with("error") && rows[1].t.is_none());
        assert_eq!(rows[2].status, "ok");
    }

    #[test]
    fn half_gaussian_at_its_mean_has_zero_tilt() {
        let m0 = (2.0 / std::f64::consts::PI).sqrt();
        let rows = cmd_tilt(&cfg(&format!("model = half_gaussian\na_grid = {m0:?}\n"))).unwrap();
        assert!(rows[0].t.unwrap().abs() < 1e-9);
    }

    #[test]
    fn single_coordinate_blocks_match_marginal_rows() {
        let (rows, curves) = cmd_gibbs(&cfg("n = 16\nblock = 1\n")).unwrap();
        let tv = |name: &str| rows.iter().find(|r| r.approximation == name).unwrap().tv;
        assert!((tv("joint_common_k1") - tv("tilted")).abs() < 1e-12);
        assert!(rows.iter().all(|r| r.status == "ok"), "{rows:?}");
        assert_eq!(curves.len(), 2);
    }
}
