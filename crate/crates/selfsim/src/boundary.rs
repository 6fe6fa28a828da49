//! Boundary-layer functionals of a profile near `x = 0`:
//! `β_W(y; μ) = ∫₀^∞ W(y,z) μ(z) e^{-z} dz`,
//! `Φ(x; μ) = ε ∫_x^∞ (β_W(t)/t) e^{-t} dt`,
//! the integrated form of the profile equation built from them, and the
//! compensated near-zero plateau of a converged profile.

use std::sync::OnceLock;

use serde::Serialize;
use statrs::function::gamma::gamma_ui;

use crate::bilinear::q_nodes;
use crate::error::{Error, Result};
use crate::kernels::{KernelPart, KernelSpec, PowerTerm};
use crate::profiles::{MuEval, Profile};
use crate::quad::{self, NodeSet};

const BETA_LEVELS: usize = 50;

/// Smallest integer `T ≥ 10` with `e^{-T}(T^α + T^{-α}) < 1e-16`.
fn truncation_point(alpha: f64) -> f64 {
    let mut t: f64 = 10.0;
    while (-t).exp() * (t.powf(alpha) + t.powf(-alpha)) >= 1e-16 {
        t += 1.0;
    }
    t
}

fn check_family(spec: &KernelSpec) -> bool {
    !matches!(spec.family, crate::kernels::Family::Constant)
}

/// `∫₀^∞ W(y,z) μ(z) e^{-z} dz` by quadrature graded toward `z = 0`.
pub fn beta_w(spec: &KernelSpec, mu: &dyn MuEval, y: f64) -> Result<f64> {
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::domain(format!("beta_w needs y > 0, got {y}")));
    }
    if !check_family(spec) {
        return Ok(0.0);
    }
    let integrand = |z: f64| spec.part_unchecked(KernelPart::Perturbation, y, z) * mu.mu(z) * (-z).exp();
    let mut set = NodeSet::new();
    set.push_edges(
        &quad::graded_edges(0.0, 1.0, 0.5, BETA_LEVELS),
        quad::legendre(8),
    );
    let top = truncation_point(spec.alpha).max(41.0);
    let mut a = 1.0;
    while a < top {
        set.push_panel(a, a + 2.0, quad::legendre(10));
        a += 2.0;
    }
    let body = set.integrate(integrand);
    let tail = (-a).exp()
        * quad::laguerre_integrate(|s| {
            spec.part_unchecked(KernelPart::Perturbation, y, a + s) * mu.mu(a + s)
        });
    let total = body + tail;
    if !total.is_finite() {
        return Err(Error::numeric("beta_w quadrature failed", total));
    }
    Ok(total)
}

/// Nodes for `∫_x^∞ g(t) e^{-t} dt`-type integrals: geometric panels from `x`
/// up to 1, then width-2 panels up to the truncation point.
fn phi_nodes(x: f64, alpha: f64) -> NodeSet {
    let mut set = NodeSet::new();
    let mut a = x;
    while a < 1.0 {
        let b = (2.0 * a).min(1.0);
        set.push_panel(a, b, quad::legendre(8));
        a = b;
    }
    let top = truncation_point(alpha);
    while a < top {
        set.push_panel(a, a + 2.0, quad::legendre(10));
        a += 2.0;
    }
    set
}

/// `ε ∫_x^∞ (β_W(t; μ)/t) e^{-t} dt` by nested quadrature, truncated where
/// the integrand bound falls below `1e-16`.
pub fn phi(spec: &KernelSpec, mu: &dyn MuEval, x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::domain(format!("phi needs x > 0, got {x}")));
    }
    if spec.epsilon == 0.0 || !check_family(spec) {
        return Ok(0.0);
    }
    let set = phi_nodes(x, spec.alpha);
    let mut total = 0.0;
    for (&t, &w) in set.x.iter().zip(&set.w) {
        total += w * beta_w(spec, mu, t)? / t * (-t).exp();
    }
    Ok(spec.epsilon * total)
}

/// Upper incomplete gamma `Γ(a, x)` for `a > -1`, `a ≠ 0`.
fn upper_gamma(a: f64, x: f64) -> f64 {
    if a > 0.0 {
        gamma_ui(a, x)
    } else {
        (gamma_ui(a + 1.0, x) - x.powf(a) * (-x).exp()) / a
    }
}

/// `β_W`, `Φ`, `κ = β₂(μ) - 2` and `m_α = ∫ z^α μ e^{-z} dz` of one profile.
///
/// Separable kernels use the moments of the profile in closed form:
/// `β_W(y) = Σ c y^{p_y} m(p_z)` and `Φ(x) = ε Σ c m(p_z) Γ(p_y, x)`.
/// Other kernels use quadrature, with `Φ` tabulated once at the grid nodes.
pub struct LayerFunctions {
    spec: KernelSpec,
    profile: Profile,
    pub kappa: f64,
    pub m_alpha: f64,
    /// `(c · m(p_z), p_y)` for separable kernels.
    separable: Option<Vec<(f64, f64)>>,
    phi_table: OnceLock<Vec<f64>>,
    bl_table: OnceLock<Vec<f64>>,
}

impl LayerFunctions {
    pub fn new(spec: &KernelSpec, profile: &Profile) -> Result<Self> {
        let kappa = 2.0 * profile.moment(0.0)? - 2.0;
        let m_alpha = profile.moment(spec.alpha)?;
        let separable = match spec.w_terms() {
            Some(terms) if terms.iter().all(|t: &PowerTerm| t.py != 0.0) => Some(
                terms
                    .iter()
                    .map(|t| Ok((t.coef * profile.moment(t.pz)?, t.py)))
                    .collect::<Result<Vec<_>>>()?,
            ),
            _ => None,
        };
        Ok(LayerFunctions {
            spec: spec.clone(),
            profile: profile.clone(),
            kappa,
            m_alpha,
            separable,
            phi_table: OnceLock::new(),
            bl_table: OnceLock::new(),
        })
    }

    pub fn beta_w(&self, y: f64) -> Result<f64> {
        match &self.separable {
            Some(terms) => {
                if !(y > 0.0) {
                    return Err(Error::domain(format!("beta_w needs y > 0, got {y}")));
                }
                Ok(terms.iter().map(|&(c, p)| c * y.powf(p)).sum())
            }
            None => beta_w(&self.spec, &self.profile.mu_view(), y),
        }
    }

    pub fn phi(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::domain(format!("phi needs x > 0, got {x}")));
        }
        if self.spec.epsilon == 0.0 || !check_family(&self.spec) {
            return Ok(0.0);
        }
        if let Some(terms) = &self.separable {
            return Ok(self.spec.epsilon
                * terms.iter().map(|&(c, p)| c * upper_gamma(p, x)).sum::<f64>());
        }
        let grid = self.profile.grid();
        if x < grid.x_min || x > grid.x_max {
            return phi(&self.spec, &self.profile.mu_view(), x);
        }
        let table = self.phi_table()?;
        let u = grid.position(x);
        Ok(lagrange_at(table, u))
    }

    /// `Φ` at the grid nodes, accumulated downward from `x_max`.
    fn phi_table(&self) -> Result<&Vec<f64>> {
        if let Some(t) = self.phi_table.get() {
            return Ok(t);
        }
        let grid = self.profile.grid();
        let nodes = grid.nodes();
        let rule = quad::legendre(8);
        let mut out = vec![0.0; grid.n];
        out[grid.n - 1] = phi(&self.spec, &self.profile.mu_view(), grid.x_max)?;
        for i in (0..grid.n - 1).rev() {
            let mut set = NodeSet::new();
            set.push_panel(nodes[i], nodes[i + 1], rule);
            let mut part = 0.0;
            for (&t, &w) in set.x.iter().zip(&set.w) {
                part += w * self.beta_w(t)? / t * (-t).exp();
            }
            out[i] = out[i + 1] + self.spec.epsilon * part;
        }
        Ok(self.phi_table.get_or_init(|| out))
    }

    /// `ξ^{-κ} e^{Φ(ξ)} e^{ξ} × [integrand of the integrated equation]`, so that
    /// `e^{-x} μ(x) = x^κ e^{-Φ(x)} ∫_x^∞ h(ξ) e^{-ξ} dξ`.
    fn h(&self, xi: f64) -> Result<f64> {
        let spec = &self.spec;
        let mu = |z: f64| self.profile.mu_at(z);
        let q = q_nodes();
        let conv: f64 = q
            .x
            .iter()
            .zip(&q.w)
            .map(|(&s, &w)| w * spec.part_unchecked(KernelPart::Full, s, 1.0 - s) * s * mu(xi * s) * mu(xi * (1.0 - s)))
            .sum();
        let source = if spec.epsilon == 0.0 {
            0.0
        } else {
            spec.epsilon * self.beta_w(xi)? * (-(-xi).exp_m1() / xi) * mu(xi)
        };
        Ok(xi.powf(-self.kappa) * self.phi(xi)?.exp() * (conv - source))
    }

    fn panel_integral(&self, a: f64, b: f64) -> Result<f64> {
        let mut set = NodeSet::new();
        set.push_panel(a, b, quad::legendre(8));
        let mut total = 0.0;
        for (&t, &w) in set.x.iter().zip(&set.w) {
            total += w * self.h(t)? * (-t).exp();
        }
        Ok(total)
    }

    /// `∫_{x_i}^∞ h(ξ) e^{-ξ} dξ` at every grid node.
    fn bl_table(&self) -> Result<&Vec<f64>> {
        if let Some(t) = self.bl_table.get() {
            return Ok(t);
        }
        let grid = self.profile.grid();
        let nodes = grid.nodes();
        let xm = grid.x_max;
        let rule = quad::laguerre(40);
        let mut tail = 0.0;
        for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
            tail += w * self.h(xm + s)?;
        }
        let tail = (-xm).exp() * tail;
        let mut out = vec![0.0; grid.n];
        out[grid.n - 1] = tail;
        for i in (0..grid.n - 1).rev() {
            out[i] = out[i + 1] + self.panel_integral(nodes[i], nodes[i + 1])?;
        }
        Ok(self.bl_table.get_or_init(|| out))
    }

    /// Both sides of the integrated profile equation at `x`:
    /// `lhs = e^{-x} μ(x)` and
    /// `rhs = ∫_x^∞ (x/ξ)^κ e^{Φ(ξ) - Φ(x)} e^{-ξ} [C(ξ)/ξ² - ε β_W(ξ) ((1 - e^{-ξ})/ξ) μ(ξ)] dξ`
    /// with `C(ξ) = ∫₀^ξ K(y, ξ-y) y μ(y) μ(ξ-y) dy`.
    pub fn bl_reconstruct(&self, x: f64) -> Result<(f64, f64)> {
        let grid = self.profile.grid();
        if !(x >= grid.x_min && x <= grid.x_max) {
            return Err(Error::domain(format!(
                "bl_reconstruct needs x in [{}, {}], got {x}",
                grid.x_min, grid.x_max
            )));
        }
        let lhs = (-x).exp() * self.profile.mu_at(x);
        let table = self.bl_table()?;
        let nodes = grid.nodes();
        let u = grid.position(x);
        let i = (u.ceil() as usize).min(grid.n - 1);
        let mut integral = table[i];
        if nodes[i] > x {
            integral += self.panel_integral(x, nodes[i])?;
        }
        let rhs = x.powf(self.kappa) * (-self.phi(x)?).exp() * integral;
        Ok((lhs, rhs))
    }
}

/// Cubic Lagrange interpolation of equally spaced values at fractional index `u`.
fn lagrange_at(vals: &[f64], u: f64) -> f64 {
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

/// Both sides of the integrated profile equation at `x` for a converged profile.
pub fn bl_reconstruct(spec: &KernelSpec, mu: &Profile, x: f64) -> Result<(f64, f64)> {
    LayerFunctions::new(spec, mu)?.bl_reconstruct(x)
}

/// Outcome of [`nearzero_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NearZeroFit {
    /// `β(f) = 2 ∫ f`.
    pub beta_f: f64,
    /// Geometric mean of the compensated quantity over the window.
    pub layer_const: f64,
    /// `max Q / min Q - 1` over the window.
    pub plateau_spread: f64,
}

/// Upper end of the near-zero fitting window.
pub const PLATEAU_WINDOW_TOP: f64 = 1e-2;

/// Compensates `f` by its predicted near-zero shape,
/// `Q(x) = f(x) x^{2-β(f)} exp((ε C_W/α) m̃_α x^{-α})` with `m̃_α = ∫ z^α f`,
/// and measures how flat `Q` is on `[x_min, 1e-2]`.
pub fn nearzero_fit(spec: &KernelSpec, f: &Profile) -> Result<NearZeroFit> {
    if spec.epsilon > 0.0 && !(spec.alpha > 0.0) {
        return Err(Error::domain("nearzero_fit needs alpha > 0 when epsilon > 0"));
    }
    let beta_f = 2.0 * f.moment(0.0)?;
    let layer = if spec.epsilon > 0.0 {
        spec.epsilon * spec.c_w * f.moment(spec.alpha)? / spec.alpha
    } else {
        0.0
    };
    let grid = f.grid();
    let mut logs = Vec::new();
    for (&x, &v) in grid.nodes().iter().zip(f.values()) {
        if x > PLATEAU_WINDOW_TOP {
            break;
        }
        if !(v > 0.0) {
            return Err(Error::Fit(format!("non-positive profile value {v} at x = {x}")));
        }
        logs.push(v.ln() + (2.0 - beta_f) * x.ln() + layer * x.powf(-spec.alpha));
    }
    if logs.is_empty() {
        return Err(Error::Fit("the fitting window holds no grid nodes".into()));
    }
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    let hi = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = logs.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(NearZeroFit {
        beta_f,
        layer_const: mean.exp(),
        plateau_spread: (hi - lo).exp() - 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{Grid, MuBar};
    use statrs::function::gamma::gamma;

    #[test]
    fn beta_w_for_mu_bar() {
        let spec = KernelSpec::power(0.25, 0.1).unwrap();
        let v = beta_w(&spec, &MuBar, 1.0).unwrap();
        assert!((v - (gamma(0.75) + gamma(1.25))).abs() < 1e-10, "{v}");
        let y = 1e-4f64;
        let exact = y.powf(0.25) * gamma(0.75) + y.powf(-0.25) * gamma(1.25);
        assert!((beta_w(&spec, &MuBar, y).unwrap() / exact - 1.0).abs() < 1e-10);
        let zero = |_x: f64| 0.0;
        assert_eq!(beta_w(&spec, &zero, 2.0).unwrap(), 0.0);
        assert!(beta_w(&spec, &MuBar, 0.0).is_err());
    }

    #[test]
    fn phi_for_mu_bar_matches_incomplete_gamma() {
        let (a, e) = (0.25f64, 0.1f64);
        let spec = KernelSpec::power(a, e).unwrap();
        for x in [1e-4f64, 1e-2, 0.5, 3.0] {
            let exact = e * (gamma(1.0 - a) * upper_gamma(a, x) + gamma(1.0 + a) * upper_gamma(-a, x));
            let v = phi(&spec, &MuBar, x).unwrap();
            assert!((v / exact - 1.0).abs() < 1e-9, "x={x}: {v} vs {exact}");
        }
        let zero_eps = KernelSpec::power(a, 0.0).unwrap();
        assert_eq!(phi(&zero_eps, &MuBar, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn layer_functions_agree_with_quadrature() {
        let spec = KernelSpec::power(0.25, 0.1).unwrap();
        let p = Profile::from_fn(Grid::default(), |x| (-x).exp() / (1.0 + x)).unwrap();
        let lf = LayerFunctions::new(&spec, &p).unwrap();
        for x in [1e-3, 0.2, 2.0, 15.0] {
            let bq = beta_w(&spec, &p.mu_view(), x).unwrap();
            assert!((lf.beta_w(x).unwrap() / bq - 1.0).abs() < 1e-8);
            let pq = phi(&spec, &p.mu_view(), x).unwrap();
            assert!((lf.phi(x).unwrap() / pq - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn bl_reconstruct_constant_kernel() {
        let spec = KernelSpec::constant();
        let p = Profile::from_fn(Grid::default(), |x| (-x).exp()).unwrap();
        let lf = LayerFunctions::new(&spec, &p).unwrap();
        for x in [1e-3, 0.1, 1.0, 5.0, 20.0] {
            let (lhs, rhs) = lf.bl_reconstruct(x).unwrap();
            assert!((lhs - (-x).exp()).abs() < 1e-14);
            assert!((rhs / lhs - 1.0).abs() < 1e-10, "x={x}: {lhs} {rhs}");
        }
    }

    #[test]
    fn nearzero_fit_without_layer() {
        let p = Profile::from_fn(Grid::default(), |x| (-x).exp()).unwrap();
        let fit = nearzero_fit(&KernelSpec::constant(), &p).unwrap();
        assert!((fit.beta_f - 2.0).abs() < 1e-8);
        assert!(fit.plateau_spread < 0.01, "{}", fit.plateau_spread);
    }
}
