use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_extreme-gibbs"))
}

fn stdout(args: &[&str]) -> String {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn malformed_config_fails_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.cfg");
    std::fs::write(&p, "model = weibull:2\nwidth_of_things = 3\n").unwrap();
    let out = bin()
        .args(["tilt", "--config", p.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("width_of_things"));

    let out = bin()
        .args(["gibbs", "--regime", "sideways"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("regime"));
}

#[test]
fn tilt_table_layout() {
    let text = stdout(&["tilt", "--model", "weibull:2", "--a-grid", "1.5,3,6,12"]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# extreme-gibbs v0.1.0");
    assert_eq!(lines[1], "a,t,m,s2,mu3,skew_ratio,psi,psi_d1,V,status");
    let skew: Vec<f64> = lines[2..]
        .iter()
        .map(|l| l.split(',').nth(5).unwrap().parse().unwrap())
        .collect();
    assert!(skew.windows(2).all(|w| w[1].abs() < w[0].abs()), "{skew:?}");
}

#[test]
fn gibbs_output_is_reproducible_and_ordered() {
    let args = [
        "gibbs",
        "--n",
        "16,8",
        "--a",
        "3",
        "--mc-samples",
        "5000",
        "--seed",
        "9",
    ];
    let a = stdout(&args);
    let b = stdout(&args);
    assert_eq!(a, b);
    let ns: Vec<&str> = a
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(3).unwrap())
        .collect();
    let first8 = ns.iter().position(|&n| n == "8").unwrap();
    assert!(ns[..first8].iter().all(|&n| n == "16"));
    assert!(a.lines().any(|l| l.starts_with("mc_histogram,")));
}

#[test]
fn json_reports() {
    let text = stdout(&["exceed", "--n", "16", "--a", "2", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["version"], "0.1.0");
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for r in rows {
        let tv = r["tv"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&tv));
        assert_eq!(r["status"], "ok");
    }
}

#[test]
fn validate_summary_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("summary.json");
    let ok = bin()
        .args(["validate", "--out", p.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(ok.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    let checks = v["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 14);
    for c in checks {
        assert!(c["name"].is_string() && c["passed"].is_boolean() && c["measured"].is_array());
        assert!(c["runtime_ms"].as_f64().unwrap() <= c["budget_ms"].as_f64().unwrap());
    }

    let out = bin()
        .args([
            "validate",
            "--tolerance-scale",
            "0",
            "--out",
            p.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL closed_form"));
}
