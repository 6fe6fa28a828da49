//! Subcommand implementations. Output files are written atomically.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use selfsim::diagnostics::{self, CheckRecord, CheckStatus};
use selfsim::kernels::{self, KernelSpec};
use selfsim::laplace;
use selfsim::profiles::Profile;
use selfsim::solver;

use crate::config::RunConfig;
use crate::{CliError, Command};

/// Writes `contents` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    fs::write(&tmp, contents)?;
    if let Err(e) = fs::rename(&tmp, &target) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(target)
}

fn to_json(value: &impl Serialize) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Numeric(format!("JSON encoding failed: {e}")))
}

pub fn dispatch(cfg: &RunConfig, command: &Command) -> Result<(), CliError> {
    match command {
        Command::SolveProfile => cmd_solve_profile(cfg),
        Command::SolvePrefactor => cmd_solve_prefactor(cfg),
        Command::Verify { suites } => cmd_verify(cfg, suites),
        Command::Gamma { points } => cmd_gamma(cfg, points.as_deref()),
        Command::Norms { input } => cmd_norms(cfg, input),
    }
}

/// Solves from `2e^{-2x}` and writes `profile.csv` and `report.json`.
pub fn cmd_solve_profile(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = cfg.kernel_spec()?;
    let grid = cfg.grid()?;
    let init = Profile::from_fn(grid, |x| 2.0 * (-2.0 * x).exp())?;
    let (profile, report) = solver::solve_selfsim(&spec, &init, &cfg.solver_options())?;
    let dir = &cfg.output_dir;
    write_atomic(dir, "profile.csv", &profile.to_csv())?;
    let doc = json!({ "config": cfg, "report": report, "profile": profile.meta() });
    write_atomic(dir, "report.json", &to_json(&doc)?)?;
    println!(
        "iterations={} residual={:.3e} kappa={:.6} converged={}",
        report.iterations,
        report.residual_history.last().copied().unwrap_or(f64::NAN),
        report.kappa,
        report.converged
    );
    if report.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!(
            "no convergence after {} iterations; best iterate written to {}",
            report.iterations,
            dir.display()
        )))
    }
}

/// Solves the prefactor equation from `μ ≡ 1` and writes `prefactor.csv`
/// and `prefactor_report.json`.
pub fn cmd_solve_prefactor(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = cfg.kernel_spec()?;
    let grid = cfg.grid()?;
    let init = vec![1.0; grid.n];
    let (mu, report) = solver::solve_prefactor(&spec, &grid, &init, &cfg.solver_options())?;
    let mut csv = String::from("x,mu\n");
    for (x, m) in grid.nodes().iter().zip(&mu) {
        writeln!(csv, "{x:.16e},{m:.16e}").expect("writing to a String");
    }
    let dir = &cfg.output_dir;
    write_atomic(dir, "prefactor.csv", &csv)?;
    let doc = json!({ "config": cfg, "report": report });
    write_atomic(dir, "prefactor_report.json", &to_json(&doc)?)?;
    let mean = mu.iter().sum::<f64>() / mu.len() as f64;
    println!(
        "iterations={} mean_mu={:.10} spread={:.3e} converged={}",
        report.solver.iterations,
        mean,
        report.big_d_star - report.d_star,
        report.solver.converged
    );
    if report.solver.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!(
            "no convergence after {} iterations; best iterate written to {}",
            report.solver.iterations,
            dir.display()
        )))
    }
}

const SUITES: [&str; 4] = ["norms", "operator", "kernel", "uniqueness"];

/// Parses a comma-separated suite list.
pub fn parse_suites(list: &str) -> Result<Vec<String>, CliError> {
    let names: Vec<String> = list
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if names.is_empty() {
        return Err(CliError::Usage("`--suites` must name at least one suite".into()));
    }
    for n in &names {
        if !SUITES.contains(&n.as_str()) {
            return Err(CliError::Usage(format!(
                "unknown suite `{n}` for `--suites`; expected one of {}",
                SUITES.join(", ")
            )));
        }
    }
    Ok(names)
}

/// Runs the selected suites and writes `evidence.json` and `evidence.csv`.
/// Fails with exit code 3 when any record fails.
pub fn cmd_verify(cfg: &RunConfig, suites: &str) -> Result<(), CliError> {
    let names = parse_suites(suites)?;
    let theta = cfg.theta_value();
    let alpha = cfg.kernel.alpha;
    let mut records: Vec<CheckRecord> = Vec::new();
    for name in &names {
        match name.as_str() {
            "norms" => {
                let set = diagnostics::random_test_set(cfg.seed, 20);
                records.extend(diagnostics::run_norm_suite(&set, theta)?);
            }
            "operator" => records.extend(diagnostics::run_operator_suite(theta)?),
            "kernel" => {
                let alphas = if alpha > 0.0 { vec![alpha] } else { vec![0.1, 0.25, 0.4] };
                let theta = cfg.theta.filter(|t| alphas.iter().all(|a| t > a));
                records.extend(diagnostics::run_kernel_suite(&alphas, theta)?);
            }
            "uniqueness" => {
                if alpha <= 0.0 {
                    return Err(CliError::Usage(
                        "the uniqueness suite needs `kernel.alpha` in (0, 1/2)".into(),
                    ));
                }
                let eps = if cfg.kernel.epsilon > 0.0 { cfg.kernel.epsilon } else { 0.1 };
                let list = [eps, eps / 2.0, eps / 4.0, 0.0];
                records.extend(diagnostics::run_uniqueness_suite(
                    alpha,
                    &list,
                    &cfg.grid()?,
                    &cfg.solver_options(),
                )?);
            }
            _ => unreachable!("suite names are validated"),
        }
    }
    let dir = &cfg.output_dir;
    let doc = json!({ "config": cfg, "suites": names, "records": records });
    write_atomic(dir, "evidence.json", &to_json(&doc)?)?;
    write_atomic(dir, "evidence.csv", &diagnostics::records_to_csv(&records)?)?;
    print!("{}", diagnostics::records_summary(&records));
    let failed = records.iter().filter(|r| r.status == CheckStatus::Fail).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Numeric(format!("{failed} check(s) failed")))
    }
}

/// Parses `xi,eta;xi,eta;...`.
pub fn parse_points(text: &str) -> Result<Vec<(f64, f64)>, CliError> {
    let bad = |p: &str| CliError::Usage(format!("invalid point `{p}` in `--points`; expected xi,eta with xi, eta > 0"));
    let mut out = Vec::new();
    for item in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let (a, b) = item.split_once(',').ok_or_else(|| bad(item))?;
        let xi: f64 = a.trim().parse().map_err(|_| bad(item))?;
        let eta: f64 = b.trim().parse().map_err(|_| bad(item))?;
        if !(xi > 0.0 && eta > 0.0) {
            return Err(bad(item));
        }
        out.push((xi, eta));
    }
    if out.is_empty() {
        return Err(CliError::Usage("`--points` is empty".into()));
    }
    Ok(out)
}

/// Tabulates `Γ̃(ξ,η)` by the closed form and by the jump construction and
/// writes `gamma.csv`. The diagonal coefficient goes in a header comment.
pub fn cmd_gamma(cfg: &RunConfig, points: Option<&str>) -> Result<(), CliError> {
    let alpha = cfg.kernel.alpha;
    if !(alpha > 0.0) {
        return Err(CliError::Usage(
            "`kernel.alpha` must lie in (0, 1/2) to tabulate Gamma".into(),
        ));
    }
    let repr = kernels::gamma_closed_form(alpha)?;
    let spec = KernelSpec::power(alpha, cfg.kernel.epsilon.max(f64::MIN_POSITIVE))?;
    let points = match points {
        Some(text) => parse_points(text)?,
        None => {
            let axis = [0.1, 0.5, 1.0, 2.0, 10.0];
            axis.iter()
                .flat_map(|&xi| axis.iter().map(move |&eta| (xi, eta)))
                .collect()
        }
    };
    let mut csv = String::new();
    writeln!(csv, "# alpha = {alpha:.16e}").expect("writing to a String");
    writeln!(csv, "# diag_coeff = {:.16e}", repr.diag_coeff).expect("writing to a String");
    csv.push_str("xi,eta,gamma_regular,gamma_jump,abs_diff\n");
    let mut worst: f64 = 0.0;
    for (xi, eta) in points {
        let closed = repr.regular(xi, eta);
        let jump = kernels::gamma_jump(&spec, xi / eta)? / eta;
        let diff = (closed - jump).abs();
        worst = worst.max(diff / closed.abs().max(f64::MIN_POSITIVE));
        writeln!(csv, "{xi:.16e},{eta:.16e},{closed:.16e},{jump:.16e},{diff:.16e}")
            .expect("writing to a String");
    }
    let path = write_atomic(&cfg.output_dir, "gamma.csv", &csv)?;
    println!(
        "diag_coeff={:.6} max_relative_diff={worst:.3e} written={}",
        repr.diag_coeff,
        path.display()
    );
    Ok(())
}

/// Prints `|f|_{k,θ}` for `k = 0, 1, 2` and `‖μ - μ̄‖₀` of a profile CSV as JSON.
pub fn cmd_norms(cfg: &RunConfig, input: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(input)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", input.display())))?;
    let profile = Profile::from_csv(&text)?;
    let theta = cfg.theta_value();
    let l = laplace::transform(&profile);
    let norms = (0..3)
        .map(|k| laplace::seminorm(&l, k, theta))
        .collect::<selfsim::Result<Vec<_>>>()?;
    let doc = json!({
        "config": cfg,
        "input": input.display().to_string(),
        "seminorms": norms,
        "norm_m": solver::norm_m(&profile, theta)?,
    });
    println!("{}", to_json(&doc)?);
    Ok(())
}
