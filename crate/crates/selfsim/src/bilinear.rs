//! Coagulation bilinear forms
//! `B_K(μ₁,μ₂)(x) = x^{-2} ∫₀^x ∫_{x-y}^∞ y K(y,z) μ₁(y) μ₂(z) e^{x-y-z} dz dy`
//! in physical space, and their Laplace-side identities.
//!
//! With `y = xq` the form reads `B_K(x) = ∫₀¹ q μ₁(xq) R(xq, x(1-q)) dq`, where
//! `R(y,t) = ∫_t^∞ K(y,z) μ₂(z) e^{t-z} dz` is the environment seen by a
//! particle of size `y`.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{self, GammaRepr, KernelPart, KernelSpec, PowerTerm};
use crate::laplace::{self, LaplaceEval};
use crate::profiles::{Grid, MuEval, Profile};
use crate::quad::{self, NodeSet};

/// Values of `B_K(ω₁, ω₂)` at the grid nodes.
#[derive(Debug, Clone)]
pub struct BilinearResult {
    pub x_values: Vec<f64>,
    pub values: Vec<f64>,
    pub kernel: KernelSpec,
}

/// Nodes for the outer variable `q ∈ (0,1)`, graded toward both ends.
pub(crate) fn q_nodes() -> &'static NodeSet {
    static NODES: OnceLock<NodeSet> = OnceLock::new();
    NODES.get_or_init(|| quad::unit_graded_both(34, quad::legendre(12)))
}

/// Tables of `S_b(t) = ∫_t^∞ z^b μ(z) e^{-(z-t)} dz` for the exponents `b`
/// of a separable kernel, on a log-uniform grid reaching far below `x_min`.
#[derive(Debug, Clone)]
pub(crate) struct Environment {
    log_t0: f64,
    step: f64,
    t_lo: f64,
    x_max: f64,
    tail_amp: f64,
    tables: Vec<(f64, Vec<f64>)>,
}

impl Environment {
    /// Builds the tables for the profile `μ`, which is constant (`tail_amp`)
    /// beyond `x_max`.
    pub(crate) fn build(mu: &Profile, exponents: &[f64]) -> Self {
        let grid = mu.grid();
        let step = grid.log_step() / 4.0;
        let t_lo = grid.x_min * 2f64.powi(-36);
        let count = ((grid.x_max / t_lo).ln() / step).ceil() as usize + 1;
        let step = (grid.x_max / t_lo).ln() / (count - 1) as f64;
        let log_t0 = t_lo.ln();
        let t: Vec<f64> = (0..count).map(|k| (log_t0 + step * k as f64).exp()).collect();
        let rule = quad::legendre(12);
        // Gauss nodes of every panel [t_k, t_{k+1}] with offsets z - t_k.
        let mut z = Vec::with_capacity((count - 1) * rule.nodes.len());
        let mut w = Vec::with_capacity(z.capacity());
        for k in 0..count - 1 {
            let (a, b) = (t[k], t[k + 1]);
            let half = 0.5 * (b - a);
            for (&u, &wu) in rule.nodes.iter().zip(&rule.weights) {
                let zz = a + half * (1.0 + u);
                z.push(zz);
                w.push(half * wu * mu.mu_at(zz) * (-(zz - a)).exp());
            }
        }
        let m = rule.nodes.len();
        let mut unique: Vec<f64> = Vec::new();
        for &b in exponents {
            if !unique.contains(&b) {
                unique.push(b);
            }
        }
        let tail_amp = mu.tail_amp();
        let tables = unique
            .into_iter()
            .map(|b| {
                let mut s = vec![0.0; count];
                s[count - 1] = tail_s(tail_amp, grid.x_max, b);
                for k in (0..count - 1).rev() {
                    let inc: f64 = (0..m).map(|j| w[k * m + j] * z[k * m + j].powf(b)).sum();
                    s[k] = (-(t[k + 1] - t[k])).exp() * s[k + 1] + inc;
                }
                (b, s)
            })
            .collect();
        Environment {
            log_t0,
            step,
            t_lo,
            x_max: grid.x_max,
            tail_amp,
            tables,
        }
    }

    fn table(&self, b: f64) -> &[f64] {
        &self
            .tables
            .iter()
            .find(|(e, _)| *e == b)
            .expect("exponent was tabulated")
            .1
    }

    /// `S_b(t)`; clamped to `S_b(t_lo)` below the table.
    pub(crate) fn s(&self, b: f64, t: f64) -> f64 {
        if t >= self.x_max {
            return tail_s(self.tail_amp, t, b);
        }
        let table = self.table(b);
        let u = ((t.max(self.t_lo)).ln() - self.log_t0) / self.step;
        lagrange4(table, u)
    }
}

/// `A ∫_t^∞ z^b e^{-(z-t)} dz` for constant `μ = A`.
fn tail_s(tail_amp: f64, t: f64, b: f64) -> f64 {
    if tail_amp == 0.0 {
        return 0.0;
    }
    tail_amp * quad::laguerre_integrate(|s| (t + s).powf(b))
}

/// Cubic Lagrange interpolation of equally spaced `vals` at fractional index `u`.
fn lagrange4(vals: &[f64], u: f64) -> f64 {
    let n = vals.len();
    let i = ((u.floor() as isize) - 1).clamp(0, n as isize - 4) as usize;
    let t = u - i as f64;
    let mut acc = 0.0;
    for j in 0..4 {
        let mut l = 1.0;
        for k in 0..4 {
            if k != j {
                l *= (t - k as f64) / (j as f64 - k as f64);
            }
        }
        acc += l * vals[i + j];
    }
    acc
}

/// `R(y, t) = ∫₀^∞ K(y, t+s) μ(t+s) e^{-s} ds` by direct quadrature, graded
/// toward `s = 0` down to the scale of `t`, where `K(y, ·)` may blow up like
/// `z^{-α}`. Beyond `s = 1` panels of width 2 are added until one contributes
/// less than `1e-17` of the running value.
pub(crate) fn inner_r(spec: &KernelSpec, part: KernelPart, mu: &dyn MuEval, y: f64, t: f64) -> f64 {
    let levels = ((1.0 / t).log2().ceil() + 4.0).clamp(4.0, 64.0) as usize;
    let integrand = |s: f64| {
        let z = t + s;
        spec.part_unchecked(part, y, z) * mu.mu(z) * (-s).exp()
    };
    let mut set = NodeSet::new();
    set.push_edges(&quad::graded_edges(0.0, 1.0, 0.5, levels), quad::legendre(8));
    let mut total = set.integrate(integrand);
    let wide = quad::legendre(10);
    let mut a = 1.0;
    loop {
        let mut panel = NodeSet::new();
        panel.push_panel(a, a + 2.0, wide);
        let part_val = panel.integrate(integrand);
        total += part_val;
        a += 2.0;
        if (a > 40.0 && part_val.abs() <= 1e-17 * total.abs()) || a > 2000.0 {
            break;
        }
    }
    total
}

/// `R(x_i q_j, x_i (1 - q_j))` for all grid nodes and outer nodes, with the
/// environment frozen at a given `μ₂`.
#[derive(Debug, Clone)]
pub(crate) struct KernelMatrix {
    pub nq: usize,
    pub r: Vec<f64>,
}

impl KernelMatrix {
    pub(crate) fn build(spec: &KernelSpec, part: KernelPart, mu2: &Profile) -> Result<Self> {
        let grid = mu2.grid();
        let q = q_nodes();
        let nq = q.len();
        let nodes = grid.nodes();
        let r: Vec<f64> = match spec.part_terms(part) {
            Some(terms) => {
                let exps: Vec<f64> = terms.iter().map(|t| t.pz).collect();
                let env = Environment::build(mu2, &exps);
                (0..grid.n * nq)
                    .into_par_iter()
                    .map(|idx| {
                        let (i, j) = (idx / nq, idx % nq);
                        let y = nodes[i] * q.x[j];
                        let t = nodes[i] * (1.0 - q.x[j]);
                        separable_r(&terms, &env, y, t)
                    })
                    .collect()
            }
            None => {
                let view = mu2.mu_view();
                (0..grid.n * nq)
                    .into_par_iter()
                    .map(|idx| {
                        let (i, j) = (idx / nq, idx % nq);
                        let y = nodes[i] * q.x[j];
                        let t = nodes[i] * (1.0 - q.x[j]);
                        inner_r(spec, part, &view, y, t)
                    })
                    .collect()
            }
        };
        if let Some(v) = r.iter().find(|v| !v.is_finite()) {
            return Err(Error::numeric("non-finite environment value", *v));
        }
        Ok(KernelMatrix { nq, r })
    }

    /// `Σ_j w_j q_j μ₁(x_i q_j) R_{ij}`.
    pub(crate) fn apply_row(&self, i: usize, x_i: f64, mu1: impl Fn(f64) -> f64) -> f64 {
        let q = q_nodes();
        let row = &self.r[i * self.nq..(i + 1) * self.nq];
        q.x.iter()
            .zip(&q.w)
            .zip(row)
            .map(|((&qj, &wj), &rij)| wj * qj * mu1(x_i * qj) * rij)
            .sum()
    }
}

fn separable_r(terms: &[PowerTerm], env: &Environment, y: f64, t: f64) -> f64 {
    terms
        .iter()
        .map(|term| term.coef * y.powf(term.py) * env.s(term.pz, t))
        .sum()
}

/// `B_K(μ₁, μ₂)` at all grid nodes of `μ₁`, using the tabulated environment
/// of `μ₂` (separable kernels) or inner quadrature (custom kernels).
pub fn bk_on_grid(
    spec: &KernelSpec,
    part: KernelPart,
    mu1: &Profile,
    mu2: &Profile,
) -> Result<BilinearResult> {
    if mu1.grid() != mu2.grid() {
        return Err(Error::param("grid", "both profiles must share one grid"));
    }
    let matrix = KernelMatrix::build(spec, part, mu2)?;
    let nodes = mu1.grid().nodes();
    let values = (0..nodes.len())
        .into_par_iter()
        .map(|i| matrix.apply_row(i, nodes[i], |y| mu1.mu_at(y)))
        .collect();
    Ok(BilinearResult {
        x_values: nodes.to_vec(),
        values,
        kernel: spec.clone(),
    })
}

/// `B_K(μ₁, μ₂)(x)` by direct double quadrature of the defining integral.
pub fn apply_bk(spec: &KernelSpec, m1: &dyn MuEval, m2: &dyn MuEval, x: f64) -> Result<f64> {
    apply_bk_part(spec, KernelPart::Full, m1, m2, x)
}

/// [`apply_bk`] for one part of the kernel: `K`, the constant `2`, or `W`.
pub fn apply_bk_part(
    spec: &KernelSpec,
    part: KernelPart,
    m1: &dyn MuEval,
    m2: &dyn MuEval,
    x: f64,
) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::domain(format!("B_K needs x > 0, got {x}")));
    }
    if part == KernelPart::Perturbation && matches!(spec.family, kernels::Family::Constant) {
        return Err(Error::Unsupported("the constant kernel has no perturbation W".into()));
    }
    let q = q_nodes();
    let value: f64 = q
        .x
        .iter()
        .zip(&q.w)
        .map(|(&qj, &wj)| {
            let m = m1.mu(x * qj);
            if m == 0.0 {
                0.0
            } else {
                wj * qj * m * inner_r(spec, part, m2, x * qj, x * (1.0 - qj))
            }
        })
        .sum();
    if !value.is_finite() {
        return Err(Error::numeric(format!("B_K quadrature failed at x = {x}"), value));
    }
    Ok(value)
}

/// `∫₀^∞ x² e^{-px} B₂(ω₁,ω₂) dx = 2/(p-1) Ω₁′(p) (Ω₂(p) - Ω₂(1))`, with a
/// first-order Taylor branch of the difference quotient for `|p - 1| < 1e-4`.
pub fn laplace_b2(l1: &LaplaceEval, l2: &LaplaceEval, p: f64) -> f64 {
    let d = p - 1.0;
    let quotient = if d.abs() < 1e-4 {
        l2.omega1(1.0) + 0.5 * l2.omega2(1.0) * d
    } else {
        (l2.omega0(p) - l2.omega0(1.0)) / d
    };
    2.0 * l1.omega1(p) * quotient
}

/// Quadrature nodes for the `Γ` integrals in [`laplace_bw`].
#[derive(Debug, Clone)]
pub struct BwNodes {
    /// `(s, w_s Γ̃(s,1-s))` on the simplex.
    simplex: Vec<(f64, f64)>,
    /// Radial nodes and weights on `(0, ∞)`.
    radial: NodeSet,
    diag_coeff: f64,
}

impl BwNodes {
    /// `levels` graded levels toward the ends of `s ∈ (0,1)` and `points`
    /// Gauss points per panel in both directions.
    pub fn new(repr: &GammaRepr, levels: usize, points: usize) -> Self {
        let s = kernels::simplex_nodes(levels, points);
        let simplex = s
            .x
            .iter()
            .zip(&s.w)
            .map(|(&s, &w)| (s, w * kernels::regular_on_simplex(repr, s)))
            .collect();
        // Geometric panels with ratio 2 on [2^-14, 2^34] plus [0, 2^-14].
        let mut edges = vec![0.0];
        for k in -14..=34 {
            edges.push(2f64.powi(k));
        }
        let mut radial = NodeSet::new();
        radial.push_edges(&edges, quad::legendre(points));
        BwNodes {
            simplex,
            radial,
            diag_coeff: repr.diag_coeff,
        }
    }

    /// Default resolution.
    pub fn standard(repr: &GammaRepr) -> Self {
        Self::new(repr, 24, 8)
    }

    /// Reduced resolution for sweeps over many `p`.
    pub fn coarse(repr: &GammaRepr) -> Self {
        Self::new(repr, 12, 6)
    }

    fn integral(&self, l1: &LaplaceEval, l2: &LaplaceEval, p: f64) -> f64 {
        let h = |xi: f64, eta: f64| {
            l1.omega2(p + xi) * (l2.omega0(p + eta) - l2.omega0(1.0 + eta))
                + l1.omega1(p + xi) * (l2.omega1(p + eta) - l2.omega1(1.0 + eta))
        };
        let regular: f64 = self
            .simplex
            .iter()
            .map(|&(s, ws)| {
                let inner: f64 = self
                    .radial
                    .x
                    .iter()
                    .zip(&self.radial.w)
                    .map(|(&r, &wr)| wr * h(r * s, r * (1.0 - s)))
                    .sum();
                ws * inner
            })
            .sum();
        let diagonal = self.radial.integrate(|r| h(r, r));
        regular + self.diag_coeff * diagonal
    }

    /// `∫₀^∞ x² e^{-px} B_W(ω₁,ω₂) dx`; see [`laplace_bw`].
    pub fn eval(&self, l1: &LaplaceEval, l2: &LaplaceEval, p: f64) -> Result<f64> {
        if !(p > 0.0) {
            return Err(Error::domain(format!("laplace_bw needs p > 0, got {p}")));
        }
        let delta = 1e-4;
        let value = if (p - 1.0).abs() < delta {
            let lo = -self.integral(l1, l2, 1.0 - delta) / (-delta);
            let hi = -self.integral(l1, l2, 1.0 + delta) / delta;
            let t = (p - (1.0 - delta)) / (2.0 * delta);
            (1.0 - t) * lo + t * hi
        } else {
            -self.integral(l1, l2, p) / (p - 1.0)
        };
        if !value.is_finite() {
            return Err(Error::numeric(format!("laplace_bw failed at p = {p}"), value));
        }
        Ok(value)
    }
}

/// `∫₀^∞ x² e^{-px} B_W(ω₁,ω₂) dx
///  = -1/(p-1) ∫∫ Γ(ξ,η) [Ω₁″(p+ξ)(Ω₂(p+η) - Ω₂(1+η)) + Ω₁′(p+ξ)(Ω₂′(p+η) - Ω₂′(1+η))]`.
///
/// The regular part of `Γ` is integrated in the coordinates `ξ = rs`,
/// `η = r(1-s)`, the diagonal part as a single integral along `ξ = η`. Within
/// `1e-4` of `p = 1` the value is interpolated linearly between `1 ± 1e-4`.
pub fn laplace_bw(repr: &GammaRepr, l1: &LaplaceEval, l2: &LaplaceEval, p: f64) -> Result<f64> {
    BwNodes::standard(repr).eval(l1, l2, p)
}

/// Empirical constants of the bilinear estimates.
#[derive(Debug, Clone, Serialize)]
pub struct BilinearBounds {
    /// `max |B₂(ω₁,ω₂)|_{2,θ} / (‖ω₁‖_{1,θ} ‖ω₂‖_{1,θ})`.
    pub c_b2: f64,
    /// `max |B_W(ω₁,ω₂)|_{2,θ-α} / (‖ω₁‖_{2,θ} ‖ω₂‖_{2,θ})`, when a
    /// representation is supplied.
    pub c_bw: Option<f64>,
    /// Pairs skipped because an input norm vanished.
    pub skipped: usize,
}

/// Number of `p` points used for the `B_W` sweep.
const BW_SWEEP_POINTS: usize = 160;

/// Maximum over the pairs of the seminorm of each form divided by the product
/// of the input norms. The transform of a form is `∂²_p` of its Laplace
/// transform, so the `k = 2` seminorm needs only the identities above. Pairs
/// with a vanishing input norm are skipped.
pub fn verify_bilinear_bound(
    pairs: &[(LaplaceEval, LaplaceEval)],
    repr: Option<&GammaRepr>,
    theta: f64,
) -> Result<BilinearBounds> {
    if pairs.is_empty() {
        return Err(Error::param("test_set", "needs at least one pair"));
    }
    let mut c_b2: f64 = 0.0;
    let mut c_bw: Option<f64> = None;
    let mut skipped = 0;
    let nodes = repr.map(BwNodes::coarse);
    for (l1, l2) in pairs {
        let n1 = laplace::fullnorm(l1, 1, theta)?;
        let n2 = laplace::fullnorm(l2, 1, theta)?;
        if n1 == 0.0 || n2 == 0.0 {
            skipped += 1;
            continue;
        }
        let b2 = laplace::sup_over_p(|p| {
            p.powi(3) * (1.0 + p).powf(theta - 1.0) * laplace_b2(l1, l2, p).abs()
        })?;
        c_b2 = c_b2.max(b2.0 / (n1 * n2));
        if let (Some(nodes), Some(repr)) = (&nodes, repr) {
            let chi = theta - repr.alpha;
            if !(chi > 0.0) {
                return Err(Error::param("theta", "theta must exceed alpha"));
            }
            let m1 = laplace::fullnorm(l1, 2, theta)?;
            let m2 = laplace::fullnorm(l2, 2, theta)?;
            let bw = sweep_sup(|p| {
                nodes
                    .eval(l1, l2, p)
                    .map(|v| p.powi(3) * (1.0 + p).powf(chi - 1.0) * v.abs())
            })?;
            let ratio = bw / (m1 * m2);
            c_bw = Some(c_bw.map_or(ratio, |c| c.max(ratio)));
        }
    }
    Ok(BilinearBounds {
        c_b2,
        c_bw,
        skipped,
    })
}

/// Maximum of a fallible function over a log-uniform sweep of
/// [`laplace::P_MIN`, `laplace::P_MAX`].
fn sweep_sup(g: impl Fn(f64) -> Result<f64> + Sync) -> Result<f64> {
    let step = (laplace::P_MAX / laplace::P_MIN).ln() / (BW_SWEEP_POINTS - 1) as f64;
    let values: Result<Vec<f64>> = (0..BW_SWEEP_POINTS)
        .into_par_iter()
        .map(|i| g(laplace::P_MIN * (step * i as f64).exp()))
        .collect();
    Ok(values?.into_iter().fold(0.0, f64::max))
}

/// Physical-space transform `∫₀^∞ x² e^{-px} B(x) dx` of a form evaluated
/// pointwise by `b`: a few graded panels on `[0, 1/p]`, then panels of width
/// `4/p` over 60 e-foldings.
pub fn physical_second_moment_transform(b: impl Fn(f64) -> Result<f64>, p: f64) -> Result<f64> {
    let rule = quad::legendre(8);
    let mut set = NodeSet::new();
    set.push_edges(&quad::graded_edges(0.0, 1.0 / p, 0.5, 4), rule);
    let edges: Vec<f64> = (0..=15).map(|k| (1.0 + 4.0 * k as f64) / p).collect();
    set.push_edges(&edges, rule);
    let mut total = 0.0;
    for (&x, &w) in set.x.iter().zip(&set.w) {
        total += w * x * x * (-p * x).exp() * b(x)?;
    }
    Ok(total)
}

/// `∫₀^∞ x² e^{-px} B_K(μ₁,μ₂) dx` from grid values of the form: the values
/// are read as a `μ`-type profile and the second derivative of its transform
/// is taken from the moment quadrature.
pub fn grid_second_moment_transform(result: &BilinearResult, grid: &Grid, p: f64) -> Result<f64> {
    let profile = Profile::from_mu(grid.clone(), result.values.clone())?;
    Ok(laplace::transform_mu(&profile).omega2(p))
}
