use extreme_gibbs::cli::config::{ExperimentConfig, LevelRule};
use extreme_gibbs::cli::report::num;
use extreme_gibbs::edgeworth::{edgeworth_density, EdgeworthSpec};
use extreme_gibbs::exceedance::rate_function;
use extreme_gibbs::gibbs::classify_regime;
use extreme_gibbs::quad::{integrate, QuadTol};
use extreme_gibbs::tilt::{solve_tilt, tilt_moments};
use extreme_gibbs::DensityModel;
use proptest::prelude::*;

fn models() -> Vec<DensityModel> {
    vec![
        DensityModel::weibull(2.0).unwrap(),
        DensityModel::exp_exponential(),
        DensityModel::half_gaussian(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solver_round_trip(which in 0usize..3, u in 0.0f64..1.0) {
        let m = &models()[which];
        let m0 = tilt_moments(m, 0.0).unwrap().a;
        let hi = if which == 1 { 500.0 } else { 1e3 };
        let a = (2.0 * m0) * (hi / (2.0 * m0)).powf(u);
        let tp = solve_tilt(m, a).unwrap();
        prop_assert!((tilt_moments(m, tp.t).unwrap().a - a).abs() <= 1e-9 * a);
    }

    #[test]
    fn weibull_shapes_round_trip(k in 1.2f64..4.0, u in 0.0f64..1.0) {
        let m = DensityModel::weibull(k).unwrap();
        let m0 = tilt_moments(&m, 0.0).unwrap().a;
        let a = 2.0 * m0 * (50.0f64).powf(u);
        let tp = solve_tilt(&m, a).unwrap();
        prop_assert!((tp.a - a).abs() <= 1e-9 * a, "k = {k}, a = {a}, m = {}", tp.a);
    }

    #[test]
    fn variance_is_derivative_of_mean(which in 0usize..3, lt in 0.0f64..3.0) {
        let m = &models()[which];
        let t = 10f64.powf(lt);
        let h = 1e-4 * t;
        let d = (tilt_moments(m, t + h).unwrap().a - tilt_moments(m, t - h).unwrap().a) / (2.0 * h);
        let s2 = tilt_moments(m, t).unwrap().s2;
        prop_assert!((d - s2).abs() <= 1e-5 * s2, "t = {t}: {d} vs {s2}");
    }

    #[test]
    fn rate_function_is_convex(which in 0usize..3, x1 in 1.0f64..20.0, x2 in 1.0f64..20.0) {
        let m = &models()[which];
        let m0 = tilt_moments(m, 0.0).unwrap().a;
        let (x1, x2) = (m0 + x1, m0 + x2);
        let i = |x: f64| rate_function(m, x).unwrap().rate;
        let mid = i(0.5 * (x1 + x2));
        prop_assert!(mid <= 0.5 * (i(x1) + i(x2)) + 1e-9 * (1.0 + mid.abs()));
    }

    #[test]
    fn regime_ratio_nondecreasing_in_level(n in 2usize..500, a in 1.2f64..50.0, da in 0.0f64..20.0) {
        let m = DensityModel::weibull(2.0).unwrap();
        let r1 = classify_regime(&m, n, a).unwrap().ratio;
        let r2 = classify_regime(&m, n, a + da).unwrap().ratio;
        prop_assert!(r2 >= r1 * (1.0 - 1e-12));
    }

    #[test]
    fn edgeworth_is_mean_and_variance_neutral(mu3 in -3.0f64..3.0, n in 2usize..100) {
        let tp = tilt_moments(&DensityModel::half_gaussian(), 1.0).unwrap();
        let tp = extreme_gibbs::tilt::TiltParams { mu3: mu3 * tp.s2.powf(1.5), ..tp };
        let spec = EdgeworthSpec::new(n, tp).unwrap();
        let tol = QuadTol::default();
        for (k, target) in [(0, 1.0), (1, 0.0), (2, 1.0)] {
            let v = integrate(|x| x.powi(k) * edgeworth_density(&spec, x), -40.0, 40.0, &tol).unwrap();
            prop_assert!((v - target).abs() < 1e-9);
        }
    }

    #[test]
    fn numbers_serialize_exactly(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(num(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn config_round_trips(
        ns in proptest::collection::vec(2usize..1000, 1..5),
        a in 0.01f64..1e3,
        delta in -1.0f64..1.0,
        rule in 0usize..3,
        seed in any::<u64>(),
        step in 1e-4f64..0.1,
        block in 1usize..4,
    ) {
        let mut c = ExperimentConfig::default();
        c.n = ns;
        c.a = match rule {
            0 => LevelRule::Fixed(a),
            1 => LevelRule::Power { c: a, delta },
            _ => LevelRule::Fast { c: a },
        };
        c.seed = seed;
        c.grid_step = step;
        c.block = block;
        let text = c.to_canonical();
        let back = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_canonical(), text);
    }
}
