use extreme_gibbs::exceedance::{ExceedanceApprox, ExceedanceOptions};
use extreme_gibbs::gibbs::{
    fast_growth_approx, fast_growth_params, z_statistics, JointApprox, JointKind, JointMode,
};
use extreme_gibbs::oracle::{
    mc_conditional_sample, tv_distance, tv_grid_fn, tv_values, ConditionalOracle, McOptions,
    OracleOptions,
};
use extreme_gibbs::quad::{integrate, QuadTol};
use extreme_gibbs::tilt::{solve_tilt, tilted_density};
use extreme_gibbs::DensityModel;

fn weibull2() -> DensityModel {
    DensityModel::weibull(2.0).unwrap()
}

fn mass(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    integrate(f, lo, hi, &QuadTol::default()).unwrap()
}

#[test]
fn approximating_densities_are_normalized() {
    for model in [
        weibull2(),
        DensityModel::exp_exponential(),
        DensityModel::half_gaussian(),
    ] {
        for (n, a) in [(16, 3.0), (64, 5.0)] {
            let tp = solve_tilt(&model, a).unwrap();
            let (lo, hi) = (
                (a - 30.0 * tp.s()).max(model.support_lo()),
                a + 30.0 * tp.s(),
            );
            let pi = mass(|y| tilted_density(&model, &tp, y), lo, hi);
            assert!((pi - 1.0).abs() < 1e-8, "{} pi mass {pi}", model.name());
            let g = fast_growth_params(&model, n, a).unwrap();
            let gm = mass(|y| fast_growth_approx(&g, &model, y), lo, hi);
            assert!((gm - 1.0).abs() < 1e-8, "{} g mass {gm}", model.name());
        }
    }
}

#[test]
fn exceedance_mixture_is_normalized() {
    let m = weibull2();
    let ap = ExceedanceApprox::new(&m, 32, 2.0, &ExceedanceOptions::default()).unwrap();
    let v = mass(|y| ap.density(&m, y), 0.0, 8.0);
    assert!((v - 1.0).abs() < 1e-6, "{v}");
}

#[test]
fn moderate_consistency_trend() {
    let m = weibull2();
    let a = 2.0;
    let tp = solve_tilt(&m, a).unwrap();
    let s = tp.s();
    let lo = (a - 12.0 * s).max(0.0);
    let h = 1e-3 * s;
    let count = ((a + 12.0 * s - lo) / h) as usize;
    let tvs: Vec<f64> = [8, 16, 32, 64]
        .iter()
        .map(|&n| {
            let g = fast_growth_params(&m, n, a).unwrap();
            tv_distance(
                |y| fast_growth_approx(&g, &m, y),
                |y| tilted_density(&m, &tp, y),
                lo,
                h,
                count,
            )
            .unwrap()
            .tv
        })
        .collect();
    assert!(tvs.windows(2).all(|w| w[1] < w[0]), "{tvs:?}");
}

#[test]
fn exp_exponential_conditional_converges() {
    let m = DensityModel::exp_exponential();
    let tp = solve_tilt(&m, 3.0).unwrap();
    let tvs: Vec<f64> = [8, 16, 32, 64]
        .iter()
        .map(|&n| {
            let o = ConditionalOracle::with_tilt(&m, n, &tp, 1, &OracleOptions::default()).unwrap();
            tv_grid_fn(&o.marginal().unwrap(), |y| tilted_density(&m, &tp, y))
                .unwrap()
                .tv
        })
        .collect();
    assert!(tvs.windows(2).all(|w| w[1] < w[0]), "{tvs:?}");
}

#[test]
fn exact_conditional_is_normalized() {
    let m = weibull2();
    for (n, a) in [(8, 3.0), (32, 2.0), (64, 3.0)] {
        let o = ConditionalOracle::new(&m, n, a, 1, &OracleOptions::default()).unwrap();
        let marg = o.marginal().unwrap();
        let total: f64 = marg.masses().iter().sum();
        assert!((total - 1.0).abs() < 1e-5, "n = {n}: {total}");
    }
}

#[test]
fn fast_block_product_is_no_worse_than_common_tilt() {
    let m = weibull2();
    let (n, a) = (32, 3.0);
    let o = ConditionalOracle::new(&m, n, a, 2, &OracleOptions::default()).unwrap();
    let j = o.joint2(4).unwrap();
    let tv = |kind| {
        let ja = JointApprox::new(&m, n, a, kind).unwrap();
        let vals: Vec<f64> = (0..j.count * j.count)
            .map(|i| ja.eval(&[j.y(i / j.count), j.y(i % j.count)]).unwrap())
            .collect();
        tv_values(&j.values, &vals, j.step * j.step).unwrap().tv
    };
    let fast = tv(JointKind::Fast);
    let common = tv(JointKind::Moderate(JointMode::CommonTilt));
    assert!(fast <= common + 0.01, "fast {fast}, common {common}");
}

#[test]
fn z_statistics_small_on_the_diagonal() {
    let m = weibull2();
    let n = 64;
    let z = z_statistics(&m, n, 3.0, &[3.0; 4]).unwrap();
    let worst = z.iter().map(|z| z * z).fold(0.0, f64::max);
    assert!(worst < 1.0 / (n as f64).sqrt());
}

#[test]
fn seeded_samples_are_reproducible() {
    let m = weibull2();
    let opts = McOptions::default();
    let a = mc_conditional_sample(&m, 16, 3.0, 0.05, 2000, 42, &opts).unwrap();
    let b = mc_conditional_sample(&m, 16, 3.0, 0.05, 2000, 42, &opts).unwrap();
    let c = mc_conditional_sample(&m, 16, 3.0, 0.05, 2000, 43, &opts).unwrap();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.samples), bits(&b.samples));
    assert_ne!(bits(&a.samples), bits(&c.samples));
}
