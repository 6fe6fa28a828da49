use std::fs;
use std::path::Path;
use std::process::Command;

use selfsim_cli::run;

fn args(dir: &Path, rest: &[&str]) -> Vec<String> {
    let mut v = vec!["selfsim".to_string()];
    v.extend(rest.iter().map(|s| s.to_string()));
    v.push("--output".into());
    v.push(dir.display().to_string());
    v
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn data_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn constant_kernel_profile_is_exponential() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(args(dir.path(), &["solve-profile", "--kernel", "constant"])), 0);
    let csv = fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 600);
    for r in &rows {
        let exact = (-r[0]).exp();
        assert!((r[1] - exact).abs() <= 1e-6 * exact, "x={} f={} exact={exact}", r[0], r[1]);
    }
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["config"]["kernel"]["family"], "constant");
    assert_eq!(report["report"]["converged"], true);
}

#[test]
fn power_kernel_profile_records_kappa() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(args(
        dir.path(),
        &["solve-profile", "--kernel", "power", "--alpha", "0.25", "--epsilon", "0.1"],
    ));
    assert_eq!(code, 0);
    let report = read_json(&dir.path().join("report.json"));
    let kappa = report["report"]["kappa"].as_f64().unwrap();
    assert!(kappa.is_finite() && kappa < 0.0, "kappa = {kappa}");
    assert_eq!(report["config"]["kernel"]["alpha"], 0.25);
}

#[test]
fn out_of_range_alpha_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(args(dir.path(), &["solve-profile", "--alpha", "0.6"])), 1);
    assert!(!dir.path().join("profile.csv").exists());
}

#[test]
fn unparsable_flags_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(args(dir.path(), &["solve-profile", "--grid-n", "many"])), 1);
    assert_eq!(run(vec!["selfsim", "--no-such-flag", "gamma"]), 1);
    assert_eq!(run(vec!["selfsim"]), 1);
}

#[test]
fn prefactor_constant_and_power() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(args(dir.path(), &["solve-prefactor", "--kernel", "constant"])), 0);
    let rows = data_rows(&fs::read_to_string(dir.path().join("prefactor.csv")).unwrap());
    for r in &rows {
        assert!((r[1] - 1.0).abs() < 1e-12);
    }

    let dir = tempfile::tempdir().unwrap();
    let code = run(args(
        dir.path(),
        &["solve-prefactor", "--alpha", "0.25", "--epsilon", "0.1"],
    ));
    assert_eq!(code, 0);
    // c = 1/(1 + ε ∫₀¹ (s/(1-s))^α ds) with ∫₀¹ s^α(1-s)^{-α} ds = απ/sin(πα).
    let alpha = 0.25f64;
    let target = 1.0 / (1.0 + 0.1 * alpha * std::f64::consts::PI / (std::f64::consts::PI * alpha).sin());
    assert!((target - 0.90002).abs() < 2e-5);
    let rows = data_rows(&fs::read_to_string(dir.path().join("prefactor.csv")).unwrap());
    for r in &rows {
        assert!((r[1] - target).abs() < 1e-6, "{} vs {target}", r[1]);
    }
}

#[test]
fn non_convergence_exits_two_and_keeps_best_iterate() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(args(
        dir.path(),
        &[
            "solve-prefactor",
            "--epsilon",
            "0.4",
            "--damping",
            "1.0",
            "--tol",
            "1e-300",
            "--max-iter",
            "3",
        ],
    ));
    assert_eq!(code, 2);
    assert!(dir.path().join("prefactor.csv").exists());
    let report = read_json(&dir.path().join("prefactor_report.json"));
    assert_eq!(report["report"]["solver"]["converged"], false);
}

#[test]
fn verify_suite_selection() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(args(dir.path(), &["verify", "--suites", ""])), 1);
    assert_eq!(run(args(dir.path(), &["verify", "--suites", "norms,bogus"])), 1);
    assert_eq!(run(args(dir.path(), &["verify", "--suites", "norms,operator"])), 0);
    let evidence = read_json(&dir.path().join("evidence.json"));
    let records = evidence["records"].as_array().unwrap();
    assert!(records.iter().any(|r| r["name"] == "landau_interpolation"));
    assert!(records.iter().any(|r| r["name"] == "lhat_of_mu_bar"));
    assert!(records.iter().all(|r| r["status"] != "fail"));
    let csv = fs::read_to_string(dir.path().join("evidence.csv")).unwrap();
    assert!(csv.starts_with("name,anchor,status,measured,threshold"));
    assert_eq!(csv.lines().count(), records.len() + 1);
}

#[test]
fn verify_kernel_suite_for_given_alpha() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(args(dir.path(), &["verify", "--suites", "kernel", "--alpha", "0.4"])), 0);
    let evidence = read_json(&dir.path().join("evidence.json"));
    let names: Vec<&str> = evidence["records"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["name"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"gamma_repr_residual_a0.4_(1,1)"));
    assert!(names.iter().all(|n| !n.contains("a0.25")));
}

#[test]
fn gamma_table() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(args(dir.path(), &["gamma", "--alpha", "0.25", "--points", "1,2;2,1;0.3,0.3"]));
    assert_eq!(code, 0);
    let text = fs::read_to_string(dir.path().join("gamma.csv")).unwrap();
    let diag: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("# diag_coeff = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((diag - 2f64.sqrt()).abs() < 1e-12);
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][2], rows[1][2]);
    for r in &rows {
        assert!(r[4] < 1e-12 * r[2].abs());
    }
    assert_eq!(run(args(dir.path(), &["gamma", "--points", "1;2"])), 1);
    assert_eq!(run(args(dir.path(), &["gamma", "--kernel", "constant"])), 1);
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert_eq!(run(args(d.path(), &["solve-profile", "--kernel", "constant", "--grid-n", "200"])), 0);
        assert_eq!(run(args(d.path(), &["gamma"])), 0);
    }
    for f in ["profile.csv", "gamma.csv"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# test\nkernel.family = power\nkernel.alpha = 0.1\nrun.seed = 3\n").unwrap();
    let cfg_arg = cfg.display().to_string();
    let code = run(args(dir.path(), &["gamma", "--config", &cfg_arg, "--alpha", "0.4"]));
    assert_eq!(code, 0);
    let text = fs::read_to_string(dir.path().join("gamma.csv")).unwrap();
    assert!(text.starts_with("# alpha = 4.0000000000000002e-1"));

    fs::write(&cfg, "kernel.beta = 1\n").unwrap();
    assert_eq!(run(args(dir.path(), &["gamma", "--config", &cfg_arg])), 1);
}

#[test]
fn norms_of_written_profile() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(args(dir.path(), &["solve-profile", "--kernel", "constant", "--grid-n", "200"])), 0);
    let csv = dir.path().join("profile.csv").display().to_string();
    assert_eq!(run(args(dir.path(), &["norms", &csv, "--kernel", "constant"])), 0);
    assert_eq!(run(args(dir.path(), &["norms", "/nonexistent/profile.csv"])), 1);
}

#[test]
fn binary_reports_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_selfsim");
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(exe)
        .args(["gamma", "--alpha", "0.7", "--output"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let out = Command::new(exe)
        .args(["gamma", "--alpha", "0.25", "--output"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("diag_coeff=1.414214"));
}
