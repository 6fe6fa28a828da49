//! Fixed-point solvers for the self-similar profile equation
//! `x²μ(x) = ∫₀^x ∫_{x-y}^∞ y K(y,z) μ(y) μ(z) e^{x-y-z} dz dy` and for the
//! prefactor equation `x μ(x) = ½ ∫₀^x K(y, x-y) μ(y) μ(x-y) dy`, plus the
//! two-branch contraction probe and the smallness sweep in `ε`.
//!
//! Each outer iteration of [`solve_selfsim`]:
//! 1. evaluates `B = B_K(μ, μ)` and rescales `μ` by the least-squares
//!    amplitude `s` (the equation is quadratic, so `B(sμ, sμ) = s²B`);
//! 2. stops when `sup_i w_i |μ_i - B_i| < tol` with `w = min(1, x²)`;
//! 3. solves the linear Volterra equation `μ̃ = B_K(μ̃, μ)` by marching
//!    upward from `x_min`, with the second argument frozen;
//! 4. fits the amplitude of `μ̃` to `μ`, damps, clips negatives and
//!    normalizes.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bilinear::{q_nodes, KernelMatrix};
use crate::error::{Error, Result};
use crate::kernels::{KernelPart, KernelSpec};
use crate::laplace::{self, LaplaceEval};
use crate::profiles::{interpolate, log_or_nan, Grid, NearZeroLaw, Profile};

/// Which one-parameter rescaling `a f(a x)` is fixed after every iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Fitted tail decay rate equal to 1.
    DecayRate,
    /// Mass `∫ x f dx` equal to 1.
    Mass,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Threshold for the weighted sup-residual.
    pub tol: f64,
    /// Under-relaxation factor in `(0, 1]`.
    pub damping: f64,
    pub normalization: Normalization,
    /// Norm exponent for reported norms; `None` selects `(α + 1/2)/2`.
    pub theta: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 400,
            tol: 1e-10,
            damping: 0.5,
            normalization: Normalization::DecayRate,
            theta: None,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self, spec: &KernelSpec) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be positive"));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::param("tol", "must be positive"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::param("damping", "must lie in (0, 1]"));
        }
        if let Some(theta) = self.theta {
            if !(theta > spec.alpha && theta < 0.5) {
                return Err(Error::param(
                    "theta",
                    format!("must lie in (alpha, 1/2) = ({}, 0.5)", spec.alpha),
                ));
            }
        }
        Ok(())
    }

    /// The norm exponent in use for `spec`.
    pub fn theta_for(&self, spec: &KernelSpec) -> f64 {
        self.theta.unwrap_or_else(|| laplace::default_theta(spec.alpha))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    /// Ratios `‖Δ_{k+1}‖ / ‖Δ_k‖` of successive weighted update norms.
    pub contraction_history: Vec<f64>,
    /// `‖μ - μ̄‖₀`; for the prefactor equation the sup-node distance to 1.
    pub final_norm_m: f64,
    /// `κ = 2(U(1) - 1)` with `U(1) = ∫ μ e^{-z} dz`; NaN for the prefactor equation.
    pub kappa: f64,
    pub converged: bool,
    pub wall_time_s: f64,
    /// Number of nodal values clipped from negative to zero over the run.
    pub clipped: usize,
    /// `sup_i w_i |x_i² f_i - ∫∫ y K f f| / (x_i² f_i + 1e-12)` at the returned iterate.
    pub equation_residual: f64,
    /// Why the iteration stopped early, if it did.
    pub failure: Option<String>,
}

/// `w(x) = min(1, x²)`.
fn residual_weight(x: f64) -> f64 {
    (x * x).min(1.0)
}

/// Least-squares amplitude `c` minimizing `Σ w (a - c b)²`.
fn ls_factor(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum();
    let den: f64 = w.iter().zip(b).map(|(w, b)| w * b * b).sum();
    num / den
}

fn weighted_sup(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter()
        .zip(a)
        .zip(b)
        .map(|((w, a), b)| w * (a - b).abs())
        .fold(0.0, f64::max)
}

/// `sup_i w_i |x_i² f_i - x_i² e^{-x_i} B_i| / (x_i² f_i + 1e-12)`.
fn relative_equation_residual(grid: &Grid, mu: &[f64], b: &[f64]) -> f64 {
    grid.nodes()
        .iter()
        .zip(mu)
        .zip(b)
        .map(|((&x, &m), &bv)| {
            let scale = x * x * (-x).exp();
            residual_weight(x) * scale * (m - bv).abs() / (scale * m + 1e-12)
        })
        .fold(0.0, f64::max)
}

/// Relative residual of the profile equation in `f` form at the grid nodes.
pub fn equation_residual(spec: &KernelSpec, profile: &Profile) -> Result<f64> {
    let b = crate::bilinear::bk_on_grid(spec, KernelPart::Full, profile, profile)?;
    Ok(relative_equation_residual(profile.grid(), profile.mu_values(), &b.values))
}

/// `κ = 2(U(1) - 1)`.
pub fn kappa(profile: &Profile) -> Result<f64> {
    Ok(2.0 * (profile.moment(0.0)? - 1.0))
}

/// `‖μ - μ̄‖₀`, computed from the Laplace transform of `μ`.
pub fn norm_m(profile: &Profile, theta: f64) -> Result<f64> {
    let m = laplace::transform_mu(profile).minus(&LaplaceEval::mu_bar());
    laplace::fullnorm(&m, 0, theta)
}

struct Context<'a> {
    spec: &'a KernelSpec,
    grid: Arc<Grid>,
    weights: Vec<f64>,
}

impl Context<'_> {
    fn prepare(&self, mu: Vec<f64>) -> Result<Profile> {
        Ok(Profile::from_mu_shared(self.grid.clone(), mu)?.with_kernel_layer(self.spec))
    }

    fn normalize(&self, profile: &Profile, mode: Normalization) -> Result<Profile> {
        match mode {
            Normalization::DecayRate => {
                let (rate, _) = profile.fit_decay()?;
                profile.rescale(1.0 / rate)
            }
            Normalization::Mass => Ok(profile.normalize_mass(1.0)?.0),
        }
    }

    /// Solves `μ̃ = s B_K(μ̃, μ)` node by node from `μ̃(x_0) = 1`, where the
    /// matrix holds the environment of `μ` and `law` continues `μ̃` below
    /// `x_min`. Each node is a scalar fixed point started from geometric
    /// extrapolation of the two previous nodes.
    fn march(&self, matrix: &KernelMatrix, s: f64, law: &NearZeroLaw) -> Vec<f64> {
        let grid = &*self.grid;
        let nodes = grid.nodes();
        let n = grid.n;
        let q = q_nodes();
        let x_min = grid.x_min;
        let mut mu = vec![0.0; n];
        let mut log_mu = vec![f64::NAN; n];
        mu[0] = 1.0;
        log_mu[0] = 0.0;
        let below = |y: f64| law.log_ratio(y, x_min).exp();
        for i in 1..n {
            let xi = nodes[i];
            let row = &matrix.r[i * matrix.nq..(i + 1) * matrix.nq];
            // Points below x_{i-2} use stencils that exclude node i.
            let split = if i >= 2 { nodes[i - 2] } else { 0.0 };
            let mut fixed = 0.0;
            let mut moving: Vec<(f64, f64)> = Vec::new();
            for ((&qj, &wj), &rij) in q.x.iter().zip(&q.w).zip(row) {
                let y = xi * qj;
                let weight = s * wj * qj * rij;
                if y < x_min {
                    fixed += weight * below(y);
                } else if y < split {
                    fixed += weight * interpolate(grid, &mu, &log_mu, y, i);
                } else {
                    moving.push((y, weight));
                }
            }
            let mut g = if i >= 2 && mu[i - 2] > 0.0 {
                mu[i - 1] * mu[i - 1] / mu[i - 2]
            } else {
                mu[i - 1]
            };
            for _ in 0..8 {
                mu[i] = g;
                log_mu[i] = log_or_nan(g);
                let next = fixed
                    + moving
                        .iter()
                        .map(|&(y, weight)| weight * interpolate(grid, &mu, &log_mu, y, i + 1))
                        .sum::<f64>();
                let done = (next - g).abs() <= 1e-15 * g.abs();
                g = next;
                if done {
                    break;
                }
            }
            mu[i] = g.max(0.0);
            log_mu[i] = log_or_nan(mu[i]);
        }
        mu
    }
}

/// Solves the profile equation from `init`. Returns the converged profile, or
/// the iterate with the smallest residual when the iteration stops early.
pub fn solve_selfsim(
    spec: &KernelSpec,
    init: &Profile,
    opts: &SolverOptions,
) -> Result<(Profile, SolverReport)> {
    solve_selfsim_observed(spec, init, opts, &mut |_| {})
}

/// [`solve_selfsim`] calling `observe` with the nodal `μ` after each update.
fn solve_selfsim_observed(
    spec: &KernelSpec,
    init: &Profile,
    opts: &SolverOptions,
    observe: &mut dyn FnMut(&[f64]),
) -> Result<(Profile, SolverReport)> {
    opts.validate(spec)?;
    let start = Instant::now();
    let grid = init.grid_arc();
    let ctx = Context {
        spec,
        weights: grid.nodes().iter().map(|&x| residual_weight(x)).collect(),
        grid,
    };
    let nodes = ctx.grid.nodes();
    let theta = opts.theta_for(spec);

    let mut report = SolverReport {
        iterations: 0,
        residual_history: Vec::new(),
        contraction_history: Vec::new(),
        final_norm_m: f64::NAN,
        kappa: f64::NAN,
        converged: false,
        wall_time_s: 0.0,
        clipped: 0,
        equation_residual: f64::NAN,
        failure: None,
    };
    let mut mu = init.mu_values().to_vec();
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut last_update: Option<f64> = None;

    let outcome: Result<()> = (|| {
        for _ in 0..opts.max_iter {
            let profile = ctx.prepare(mu.clone())?;
            let matrix = KernelMatrix::build(spec, KernelPart::Full, &profile)?;
            let b: Vec<f64> = (0..nodes.len())
                .into_par_iter()
                .map(|i| matrix.apply_row(i, nodes[i], |y| profile.mu_at(y)))
                .collect();
            if let Some(v) = b.iter().find(|v| !v.is_finite()) {
                return Err(Error::numeric("non-finite value of B_K", *v));
            }
            let s = ls_factor(&ctx.weights, &mu, &b);
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::numeric("amplitude fit failed", s));
            }
            let scaled: Vec<f64> = mu.iter().map(|m| s * m).collect();
            let b_scaled: Vec<f64> = b.iter().map(|v| s * s * v).collect();
            let res = weighted_sup(&ctx.weights, &scaled, &b_scaled);
            report.residual_history.push(res);
            report.iterations += 1;
            let eq_res = relative_equation_residual(&ctx.grid, &scaled, &b_scaled);
            if best.as_ref().map_or(true, |(r, _, _)| res < *r) {
                best = Some((res, scaled.clone(), eq_res));
            }
            if res < opts.tol {
                report.converged = true;
                return Ok(());
            }

            // The moments scale with s, so the law is rebuilt for s μ.
            let law = NearZeroLaw::from_kernel(spec, |sigma| {
                s * profile.moment(sigma).unwrap_or(f64::NAN)
            });
            let marched = ctx.march(&matrix, s, &law);
            let c = ls_factor(&ctx.weights, &scaled, &marched);
            if !c.is_finite() {
                return Err(Error::numeric("march amplitude fit failed", c));
            }
            let d = opts.damping;
            let mut next: Vec<f64> = scaled
                .iter()
                .zip(&marched)
                .map(|(m, t)| (1.0 - d) * m + d * c * t)
                .collect();
            for v in next.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                    report.clipped += 1;
                }
            }
            let normalized = ctx.normalize(&ctx.prepare(next)?, opts.normalization)?;
            let next = normalized.mu_values().to_vec();
            let update = weighted_sup(&ctx.weights, &next, &mu);
            if let Some(prev) = last_update {
                report.contraction_history.push(update / prev);
            }
            last_update = Some(update);
            observe(&next);
            mu = next;
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        if best.is_none() {
            return Err(e);
        }
        report.failure = Some(e.to_string());
    }
    let (_, best_mu, eq_res) = best.expect("at least one residual was evaluated");
    let profile = ctx.prepare(best_mu)?;
    report.equation_residual = eq_res;
    report.kappa = kappa(&profile)?;
    report.final_norm_m = norm_m(&profile, theta)?;
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((profile, report))
}

/// Outcome of [`solve_prefactor`].
#[derive(Debug, Clone, Serialize)]
pub struct PrefactorReport {
    pub solver: SolverReport,
    /// `min_x (1/x) ∫₀^x μ` over the grid nodes.
    pub d_star: f64,
    /// `max_x (1/x) ∫₀^x μ` over the grid nodes.
    pub big_d_star: f64,
}

/// `(1/x_i) ∫₀^{x_i} μ`, with `μ` held at `μ(x_min)` below the grid.
fn running_means(grid: &Grid, mu: &[f64], log_mu: &[f64]) -> Vec<f64> {
    let nodes = grid.nodes();
    let rule = crate::quad::legendre(6);
    let mut acc = mu[0] * nodes[0];
    let mut out = Vec::with_capacity(grid.n);
    out.push(acc / nodes[0]);
    for i in 1..grid.n {
        let (a, b) = (nodes[i - 1], nodes[i]);
        let half = 0.5 * (b - a);
        acc += rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&u, &w)| half * w * interpolate(grid, mu, log_mu, a + half * (1.0 + u), grid.n))
            .sum::<f64>();
        out.push(acc / b);
    }
    out
}

/// Solves the prefactor equation `μ(x) = ½ ∫₀¹ K(q, 1-q) μ(xq) μ(x(1-q)) dq`
/// on `grid` from nodal values `init`. `μ` is held constant outside the grid.
pub fn solve_prefactor(
    spec: &KernelSpec,
    grid: &Grid,
    init: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, PrefactorReport)> {
    opts.validate(spec)?;
    if init.len() != grid.n {
        return Err(Error::param(
            "init",
            format!("expected {} values, got {}", grid.n, init.len()),
        ));
    }
    if let Some(v) = init.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::domain(format!("initial values must be positive, got {v}")));
    }
    let start = Instant::now();
    let q = q_nodes();
    let kq: Vec<f64> = q
        .x
        .iter()
        .map(|&s| 0.5 * spec.part_unchecked(KernelPart::Full, s, 1.0 - s))
        .collect();
    let nodes = grid.nodes();
    let eval = |mu: &[f64], log_mu: &[f64], y: f64| {
        if y <= grid.x_min {
            mu[0]
        } else if y >= grid.x_max {
            mu[grid.n - 1]
        } else {
            interpolate(grid, mu, log_mu, y, grid.n)
        }
    };
    let apply = |mu: &[f64]| -> Vec<f64> {
        let log_mu: Vec<f64> = mu.iter().map(|&m| log_or_nan(m)).collect();
        (0..grid.n)
            .into_par_iter()
            .map(|i| {
                let x = nodes[i];
                q.x.iter()
                    .zip(&q.w)
                    .zip(&kq)
                    .map(|((&s, &w), &k)| {
                        w * k * eval(mu, &log_mu, x * s) * eval(mu, &log_mu, x * (1.0 - s))
                    })
                    .sum()
            })
            .collect()
    };
    let ones = vec![1.0; grid.n];
    let mut report = SolverReport {
        iterations: 0,
        residual_history: Vec::new(),
        contraction_history: Vec::new(),
        final_norm_m: f64::NAN,
        kappa: f64::NAN,
        converged: false,
        wall_time_s: 0.0,
        clipped: 0,
        equation_residual: f64::NAN,
        failure: None,
    };
    let mut mu = init.to_vec();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut last_update: Option<f64> = None;
    for _ in 0..opts.max_iter {
        let t = apply(&mu);
        let s = ls_factor(&ones, &mu, &t);
        if !(s > 0.0 && s.is_finite()) {
            report.failure = Some(format!("amplitude fit failed: {s}"));
            break;
        }
        let scaled: Vec<f64> = mu.iter().map(|m| s * m).collect();
        let t_scaled: Vec<f64> = t.iter().map(|v| s * s * v).collect();
        let res = weighted_sup(&ones, &scaled, &t_scaled);
        report.residual_history.push(res);
        report.iterations += 1;
        if best.as_ref().map_or(true, |(r, _)| res < *r) {
            best = Some((res, scaled.clone()));
        }
        if res < opts.tol {
            report.converged = true;
            break;
        }
        let d = opts.damping;
        let mut next: Vec<f64> = scaled
            .iter()
            .zip(&t_scaled)
            .map(|(m, t)| (1.0 - d) * m + d * t)
            .collect();
        for v in next.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
                report.clipped += 1;
            }
        }
        let update = weighted_sup(&ones, &next, &mu);
        if let Some(prev) = last_update {
            report.contraction_history.push(update / prev);
        }
        last_update = Some(update);
        mu = next;
    }
    let (res, mu) = best.ok_or_else(|| Error::numeric("prefactor iteration produced no iterate", f64::NAN))?;
    let log_mu: Vec<f64> = mu.iter().map(|&m| log_or_nan(m)).collect();
    let means = running_means(grid, &mu, &log_mu);
    report.equation_residual = res;
    report.final_norm_m = mu.iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max);
    report.wall_time_s = start.elapsed().as_secs_f64();
    let d_star = means.iter().cloned().fold(f64::INFINITY, f64::min);
    let big_d_star = means.iter().cloned().fold(0.0, f64::max);
    Ok((
        mu,
        PrefactorReport {
            solver: report,
            d_star,
            big_d_star,
        },
    ))
}

/// Outcome of [`contraction_probe`].
#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    /// `|f₁ - f₂|₀` of the two final profiles.
    pub distance_norm0: f64,
    /// `max_i |f₁(x_i) - f₂(x_i)|`.
    pub distance_sup: f64,
    /// Sup-node distances between the two `μ` iterates after each update.
    pub distance_history: Vec<f64>,
    /// Ratios of successive entries of `distance_history`.
    pub distance_ratios: Vec<f64>,
    /// Geometric mean of the ratios while the distance exceeds `100 tol`.
    pub contraction_factor: f64,
    /// Set when either branch fails to converge.
    pub inconclusive: bool,
    pub reports: [SolverReport; 2],
    /// The two final profiles.
    #[serde(skip)]
    pub profiles: [Profile; 2],
}

/// Solves from two initial profiles with the same options and compares the
/// results and the iterate sequences.
pub fn contraction_probe(
    spec: &KernelSpec,
    init1: &Profile,
    init2: &Profile,
    opts: &SolverOptions,
) -> Result<ProbeReport> {
    if init1.grid() != init2.grid() {
        return Err(Error::param("init", "both initial profiles must share one grid"));
    }
    let mut hist1: Vec<Vec<f64>> = Vec::new();
    let mut hist2: Vec<Vec<f64>> = Vec::new();
    let (f1, r1) = solve_selfsim_observed(spec, init1, opts, &mut |m| hist1.push(m.to_vec()))?;
    let (f2, r2) = solve_selfsim_observed(spec, init2, opts, &mut |m| hist2.push(m.to_vec()))?;
    let steps = hist1.len().max(hist2.len());
    let at = |h: &[Vec<f64>], k: usize, fallback: &Profile| -> Vec<f64> {
        h.get(k).cloned().unwrap_or_else(|| fallback.mu_values().to_vec())
    };
    let distance_history: Vec<f64> = (0..steps)
        .map(|k| {
            let a = at(&hist1, k, &f1);
            let b = at(&hist2, k, &f2);
            a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        })
        .collect();
    let distance_ratios: Vec<f64> = distance_history
        .windows(2)
        .map(|w| w[1] / w[0])
        .collect();
    let floor = 100.0 * opts.tol;
    let active: Vec<f64> = distance_history
        .windows(2)
        .filter(|w| w[0] > floor && w[1] > floor)
        .map(|w| (w[1] / w[0]).ln())
        .collect();
    let contraction_factor = if active.is_empty() {
        f64::NAN
    } else {
        (active.iter().sum::<f64>() / active.len() as f64).exp()
    };
    let theta = opts.theta_for(spec);
    let diff = laplace::transform(&f1).minus(&laplace::transform(&f2));
    let distance_norm0 = laplace::seminorm(&diff, 0, theta)?.value;
    let distance_sup = f1
        .values()
        .iter()
        .zip(f2.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(ProbeReport {
        distance_norm0,
        distance_sup,
        distance_history,
        distance_ratios,
        contraction_factor,
        inconclusive: !(r1.converged && r2.converged),
        reports: [r1, r2],
        profiles: [f1, f2],
    })
}

/// One row of [`smallness_curve`].
#[derive(Debug, Clone, Serialize)]
pub struct SmallnessRow {
    pub epsilon: f64,
    /// `‖μ_ε - μ̄‖₀`.
    pub norm_m: f64,
    pub kappa: f64,
    pub converged: bool,
    pub error: Option<String>,
}

/// For each `ε`, solves with the kernel of `template` at that `ε` and records
/// `‖μ_ε - μ̄‖₀` and `κ`. At `ε = 0` the solution is `μ̄` itself and the row
/// is exactly zero. Each solve starts from `f = e^{-x}` on `grid`.
pub fn smallness_curve(
    template: &KernelSpec,
    eps_list: &[f64],
    grid: &Grid,
    opts: &SolverOptions,
) -> Result<Vec<SmallnessRow>> {
    let init = Profile::from_fn(grid.clone(), |x| (-x).exp())?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::param("eps_list", format!("entries must be >= 0, got {eps}")));
        }
        if eps == 0.0 {
            rows.push(SmallnessRow {
                epsilon: 0.0,
                norm_m: 0.0,
                kappa: 0.0,
                converged: true,
                error: None,
            });
            continue;
        }
        let mut spec = template.clone();
        spec.epsilon = eps;
        let row = match solve_selfsim(&spec, &init, opts) {
            Ok((_, report)) => SmallnessRow {
                epsilon: eps,
                norm_m: report.final_norm_m,
                kappa: report.kappa,
                converged: report.converged,
                error: report.failure.clone(),
            },
            Err(e) => SmallnessRow {
                epsilon: eps,
                norm_m: f64::NAN,
                kappa: f64::NAN,
                converged: false,
                error: Some(e.to_string()),
            },
        };
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::default()
    }

    #[test]
    fn constant_kernel_converges_to_exponential() {
        let spec = KernelSpec::constant();
        let init = Profile::from_fn(grid(), |x| 2.0 * (-2.0 * x).exp()).unwrap();
        let (f, report) = solve_selfsim(&spec, &init, &SolverOptions::default()).unwrap();
        assert!(report.converged, "{report:?}");
        let err = f
            .grid()
            .nodes()
            .iter()
            .zip(f.values())
            .map(|(&x, &v)| (v / (-x).exp() - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "max relative error {err}");
        assert!(report.kappa.abs() < 1e-8, "kappa {}", report.kappa);
        assert!(report.equation_residual < 1e-9);
    }

    #[test]
    fn power_kernel_profile() {
        let spec = KernelSpec::power(0.25, 0.1).unwrap();
        let init = Profile::from_fn(grid(), |x| 2.0 * (-2.0 * x).exp()).unwrap();
        let opts = SolverOptions::default();
        let (f, report) = solve_selfsim(&spec, &init, &opts).unwrap();
        assert!(report.converged, "{report:?}");
        assert!(report.equation_residual < 10.0 * opts.tol);
        let (rate, _) = f.fit_decay().unwrap();
        assert!((rate - 1.0).abs() < 1e-3, "decay rate {rate}");
        // The layer lowers f near the origin; at alpha = 1/4 the x^kappa
        // prefactor keeps the ratio well above 1e-2.
        let ratio = f.values()[0] / f.f_at(1.0);
        assert!(ratio < 1.0 && ratio > 0.1, "f(x_min)/f(1) = {ratio}");
        let fit = crate::boundary::nearzero_fit(&spec, &f).unwrap();
        assert!(fit.beta_f < 2.0 && 2.0 - fit.beta_f < 0.2, "beta = {}", fit.beta_f);
        assert!((report.kappa - (fit.beta_f - 2.0)).abs() < 1e-12);
        // The compensated quantity stays within a bounded factor on the window.
        assert!(fit.plateau_spread < 0.2, "spread {}", fit.plateau_spread);
    }

    #[test]
    fn exact_solution_is_accepted_immediately() {
        let spec = KernelSpec::constant();
        let init = Profile::from_fn(grid(), |x| (-x).exp()).unwrap();
        let (_, report) = solve_selfsim(&spec, &init, &SolverOptions::default()).unwrap();
        assert!(report.converged);
        assert!(report.iterations <= 2, "{}", report.iterations);
    }

    #[test]
    fn prefactor_constant_kernel() {
        let g = grid();
        let init = vec![0.7; g.n];
        let (mu, rep) =
            solve_prefactor(&KernelSpec::constant(), &g, &init, &SolverOptions::default()).unwrap();
        assert!(rep.solver.converged);
        assert!(mu.iter().all(|m| (m - 1.0).abs() < 1e-10));
        assert!(rep.d_star > 0.0);
    }

    #[test]
    fn prefactor_power_kernel_matches_beta_function() {
        let (alpha, eps) = (0.25f64, 0.1f64);
        let target = 1.0 / (1.0 + eps * alpha * std::f64::consts::PI / (std::f64::consts::PI * alpha).sin());
        let spec = KernelSpec::power(alpha, eps).unwrap();
        let g = grid();
        for start in [1.0, 3.0] {
            let (mu, rep) =
                solve_prefactor(&spec, &g, &vec![start; g.n], &SolverOptions::default()).unwrap();
            assert!(rep.solver.converged);
            let dev = mu.iter().map(|m| (m - target).abs()).fold(0.0, f64::max);
            assert!(dev < 1e-6, "deviation {dev}");
        }
    }

    #[test]
    fn invalid_options_are_rejected() {
        let spec = KernelSpec::power(0.25, 0.1).unwrap();
        let init = Profile::from_fn(grid(), |x| (-x).exp()).unwrap();
        for opts in [
            SolverOptions { damping: 0.0, ..Default::default() },
            SolverOptions { tol: -1.0, ..Default::default() },
            SolverOptions { theta: Some(0.1), ..Default::default() },
        ] {
            assert!(solve_selfsim(&spec, &init, &opts).is_err());
        }
    }

    #[test]
    fn smallness_zero_row() {
        let spec = KernelSpec::power(0.25, 0.1).unwrap();
        let rows = smallness_curve(&spec, &[0.0], &grid(), &SolverOptions::default()).unwrap();
        assert_eq!(rows[0].norm_m, 0.0);
        assert_eq!(rows[0].kappa, 0.0);
    }
}
