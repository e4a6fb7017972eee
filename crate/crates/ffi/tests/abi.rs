use extreme_gibbs_ffi::*;
use std::ffi::c_char;
use std::ptr;

fn model(spec: &std::ffi::CStr) -> *mut EgModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { eg_model_new(spec.as_ptr(), &mut m) }, EgStatus::Ok);
    m
}

#[test]
fn oracle_and_approximations_agree_through_the_abi() {
    let m = model(c"weibull:2");
    let (n, a) = (32, 3.0);
    let mut o = ptr::null_mut();
    assert_eq!(unsafe { eg_oracle_new(m, n, a, &mut o) }, EgStatus::Ok);
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { eg_fast_growth_new(m, n, a, &mut g) }, EgStatus::Ok);
    let (mut exact, mut pi, mut fast) = (0.0, 0.0, 0.0);
    for y in [2.5, 3.0, 3.5] {
        unsafe {
            assert_eq!(eg_oracle_conditional(o, y, &mut exact), EgStatus::Ok);
            assert_eq!(eg_tilted_approx(m, n, a, y, &mut pi), EgStatus::Ok);
            assert_eq!(eg_fast_growth_density(g, y, &mut fast), EgStatus::Ok);
        }
        assert!((pi / exact - 1.0).abs() < 0.1, "y = {y}: {pi} vs {exact}");
        assert!(
            (fast / exact - 1.0).abs() < 0.01,
            "y = {y}: {fast} vs {exact}"
        );
    }
    let (mut lt_exact, mut lt) = (0.0, 0.0);
    unsafe {
        assert_eq!(eg_oracle_log_tail(o, &mut lt_exact), EgStatus::Ok);
        assert_eq!(eg_log_tail_probability(m, n, a, &mut lt), EgStatus::Ok);
    }
    assert!((lt - lt_exact).abs() < 0.05);

    let mut e = ptr::null_mut();
    assert_eq!(unsafe { eg_exceedance_new(m, n, a, &mut e) }, EgStatus::Ok);
    let (mut ex, mut ap) = (0.0, 0.0);
    unsafe {
        assert_eq!(eg_oracle_exceedance(o, 3.0, &mut ex), EgStatus::Ok);
        assert_eq!(eg_exceedance_density(e, 3.0, &mut ap), EgStatus::Ok);
        eg_exceedance_free(e);
        eg_fast_growth_free(g);
        eg_oracle_free(o);
        eg_model_free(m);
    }
    assert!((ap / ex - 1.0).abs() < 0.1, "{ap} vs {ex}");
}

#[test]
fn null_out_pointers_are_reported() {
    let m = model(c"half_gaussian");
    assert_eq!(
        unsafe { eg_tilt_moments(m, 1.0, ptr::null_mut()) },
        EgStatus::NullPointer
    );
    let mut buf = [0 as c_char; 64];
    let len = unsafe { eg_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(len > 0);
    let mut tp = EgTilt::default();
    assert_eq!(unsafe { eg_tilt_moments(m, 0.0, &mut tp) }, EgStatus::Ok);
    assert!((tp.m - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-12);
    unsafe { eg_model_free(m) };
}

#[test]
fn header_declares_every_export() {
    let h = include_str!("../include/extreme_gibbs.h");
    for f in [
        "eg_version",
        "eg_last_error_message",
        "eg_model_new",
        "eg_model_free",
        "eg_model_log_density",
        "eg_tilt_moments",
        "eg_tilt_solve",
        "eg_tilted_approx",
        "eg_log_tail_probability",
        "eg_fast_growth_new",
        "eg_fast_growth_density",
        "eg_fast_growth_free",
        "eg_exceedance_new",
        "eg_exceedance_density",
        "eg_exceedance_free",
        "eg_oracle_new",
        "eg_oracle_conditional",
        "eg_oracle_exceedance",
        "eg_oracle_log_tail",
        "eg_oracle_free",
    ] {
        let declared = h
            .lines()
            .filter(|l| !l.trim_start().starts_with('*'))
            .any(|l| l.contains(&format!(" {f}(")) || l.contains(&format!("*{f}(")));
        assert!(declared, "{f} missing from header");
    }
    assert!(h.contains("typedef struct EgModel EgModel;"));
}

#[test]
fn header_compiles_as_c() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"extreme_gibbs.h\"\nint main(void) { EgModel *m = 0; EgTilt t;\n\
         EgStatus s = eg_model_new(\"weibull:2\", &m);\n\
         if (s == EG_STATUS_OK) s = eg_tilt_solve(m, 3.0, &t);\n\
         eg_model_free(m); return (int)s; }\n",
    )
    .unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let out = match std::process::Command::new(&cc)
        .args([
            "-std=c99",
            "-Wall",
            "-Werror",
            "-fsyntax-only",
            "-I",
            include,
        ])
        .arg(&src)
        .output()
    {
        Ok(o) => o,
        Err(_) => return, // no C compiler available
    };
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
