//! The linearization `Lω = ω - (B₂(μ̄,ω) + B₂(ω,μ̄))` of the constant-kernel
//! coagulation operator around `μ̄ ≡ 1`, its Laplace-side form
//! `L̂M(p) = M(p) - 2∫_p^∞ (r-p) h(r) dr` with
//! `h(r) = (M(r)-M(1))/((1-r)r²) - M′(r)/r`, and the explicit inverse.

use serde::Serialize;

use crate::bilinear;
use crate::error::{Error, Result};
use crate::kernels::{KernelPart, KernelSpec};
use crate::laplace::{LaplaceEval, Transform};
use crate::profiles::{MuBar, MuEval};
use crate::quad::{self, NodeSet};

/// Half-width of the Taylor branches around the removable singularities at 1.
const SERIES_BAND: f64 = 1e-4;

/// Levels of dyadic grading in the radial substitutions.
const LEVELS: usize = 44;

/// Dyadically graded nodes on `[0, 1]`, refined toward 0.
fn unit_nodes() -> &'static NodeSet {
    static NODES: std::sync::OnceLock<NodeSet> = std::sync::OnceLock::new();
    NODES.get_or_init(|| {
        let mut set = NodeSet::new();
        set.push_edges(&quad::graded_edges(0.0, 1.0, 0.5, LEVELS), quad::legendre(10));
        set
    })
}

/// `(G(r) - G(1))/(1 - r)`, with a second-order Taylor branch near `r = 1`.
fn quotient(g: &LaplaceEval, g1: f64, r: f64) -> f64 {
    let d = r - 1.0;
    if d.abs() < SERIES_BAND {
        -g.omega1(1.0) - 0.5 * g.omega2(1.0) * d
    } else {
        (g.omega0(r) - g1) / (1.0 - r)
    }
}

/// `h(r) = (G(r)-G(1))/((1-r) r²) - G′(r)/r`.
fn h(g: &LaplaceEval, g1: f64, r: f64) -> f64 {
    quotient(g, g1, r) / (r * r) - g.omega1(r) / r
}

/// `(∫_p^∞ h, ∫_p^∞ (r-p) h)` through `r = p/u`, graded toward `u = 0` until
/// `r` reaches `2^{44} max(p, 1)`. The rest is taken from a power law
/// `h ≈ C r^{-γ}` fitted at the two largest radii.
fn tail_integrals(g: &LaplaceEval, p: f64) -> Result<(f64, f64)> {
    let g1 = g.omega0(1.0);
    let extra = if p < 1.0 { (1.0 / p).log2().ceil() as usize } else { 0 };
    let levels = LEVELS + extra;
    let mut nodes = NodeSet::new();
    nodes.push_edges(&quad::graded_edges(0.0, 1.0, 0.5, levels), quad::legendre(10));
    let mut first = 0.0;
    let mut second = 0.0;
    for (&u, &w) in nodes.x.iter().zip(&nodes.w) {
        let r = p / u;
        let hr = h(g, g1, r);
        let jac = p / (u * u);
        first += w * jac * hr;
        second += w * jac * (r - p) * hr;
    }
    let r_cut = p * 2f64.powi(levels as i32);
    let (h1, h2) = (h(g, g1, r_cut), h(g, g1, 2.0 * r_cut));
    if h1 != 0.0 || h2 != 0.0 {
        let gamma = (h1 / h2).log2();
        if !(gamma > 2.0) || !gamma.is_finite() {
            return Err(Error::numeric(
                format!("h decays too slowly for the L-hat integral (exponent {gamma})"),
                second,
            ));
        }
        let c = h1 * r_cut.powf(gamma);
        first += c * r_cut.powf(1.0 - gamma) / (gamma - 1.0);
        second += c
            * (r_cut.powf(2.0 - gamma) / (gamma - 2.0) - p * r_cut.powf(1.0 - gamma) / (gamma - 1.0));
    }
    if !(first.is_finite() && second.is_finite()) {
        return Err(Error::numeric(format!("non-finite L-hat integral at p = {p}"), second));
    }
    Ok((first, second))
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::domain(format!("p must be positive, got {p}")));
    }
    Ok(())
}

/// `L̂G(p) = G(p) - 2∫_p^∞ (r-p) h(r) dr`.
pub fn apply_lhat(g: &LaplaceEval, p: f64) -> Result<f64> {
    check_p(p)?;
    let (_, second) = tail_integrals(g, p)?;
    Ok(g.omega0(p) - 2.0 * second)
}

/// `(L̂G)(p)`, `(L̂G)′(p) = G′(p) + 2∫_p^∞ h` and `(L̂G)″(p) = G″(p) - 2h(p)`.
pub fn apply_lhat_all(g: &LaplaceEval, p: f64) -> Result<[f64; 3]> {
    check_p(p)?;
    let (first, second) = tail_integrals(g, p)?;
    let g1 = g.omega0(1.0);
    Ok([
        g.omega0(p) - 2.0 * second,
        g.omega1(p) + 2.0 * first,
        g.omega2(p) - 2.0 * h(g, g1, p),
    ])
}

/// `I(p) = ∫₀^p ξ/(1-ξ) (G(1) - G(ξ)) dξ`, on panels graded toward 0 and
/// split at `ξ = 1`.
fn inverse_integral(g: &LaplaceEval, p: f64) -> Result<f64> {
    let g1 = g.omega0(1.0);
    let integrand = |xi: f64| -xi * quotient(g, g1, xi);
    let nodes = unit_nodes();
    let mut total = 0.0;
    if p <= 1.0 {
        for (&u, &w) in nodes.x.iter().zip(&nodes.w) {
            total += w * p * integrand(p * u);
        }
    } else {
        for (&u, &w) in nodes.x.iter().zip(&nodes.w) {
            total += w * integrand(u);
        }
        let mut rest = NodeSet::new();
        let panels = (p - 1.0).log2().ceil().max(0.0) as usize + 4;
        rest.push_edges(&quad::graded_edges(1.0, p, 0.5, panels), quad::legendre(10));
        total += rest.integrate(integrand);
    }
    if !total.is_finite() {
        return Err(Error::numeric(
            format!("inverse integral diverges on (0, {p}]; G grows faster than 1/p at 0"),
            total,
        ));
    }
    Ok(total)
}

/// `M(p) = G(p) - 2G(1) + 2(1-p)/p² ∫₀^p ξ/(1-ξ)(G(1) - G(ξ)) dξ`; `M(1) = -G(1)`.
pub fn invert_lhat(g: &LaplaceEval, p: f64) -> Result<f64> {
    check_p(p)?;
    let g1 = g.omega0(1.0);
    if p == 1.0 {
        return Ok(-g1);
    }
    let i = inverse_integral(g, p)?;
    Ok(g.omega0(p) - 2.0 * g1 + 2.0 * (1.0 - p) / (p * p) * i)
}

/// `M`, `M′` and `M″` of the inverse.
pub fn invert_lhat_all(g: &LaplaceEval, p: f64) -> Result<[f64; 3]> {
    check_p(p)?;
    let g1 = g.omega0(1.0);
    let i = inverse_integral(g, p)?;
    let gp = g.omega0(p);
    let d1 = g1 - gp;
    let q = -quotient(g, g1, p);
    let m0 = gp - 2.0 * g1 + 2.0 * (1.0 - p) / (p * p) * i;
    let m1 = g.omega1(p) + 2.0 * (p - 2.0) / p.powi(3) * i + 2.0 * d1 / p;
    let m2 = g.omega2(p) + 2.0 * (6.0 - 2.0 * p) / p.powi(4) * i + 2.0 * (p - 2.0) / (p * p) * q
        - 2.0 * g.omega1(p) / p
        - 2.0 * d1 / (p * p);
    Ok([m0, m1, m2])
}

struct LhatTransform {
    g: LaplaceEval,
}

impl Transform for LhatTransform {
    fn eval(&self, p: f64, k: usize) -> f64 {
        apply_lhat_all(&self.g, p).map_or(f64::NAN, |v| v[k])
    }

    fn domain_min(&self) -> f64 {
        0.0
    }
}

struct InverseTransform {
    g: LaplaceEval,
}

impl Transform for InverseTransform {
    fn eval(&self, p: f64, k: usize) -> f64 {
        invert_lhat_all(&self.g, p).map_or(f64::NAN, |v| v[k])
    }

    fn domain_min(&self) -> f64 {
        0.0
    }
}

/// `L̂G` as a transform with derivative channels; failures evaluate to NaN,
/// which the norm routines report as numeric failures.
pub fn lhat_eval(g: &LaplaceEval) -> LaplaceEval {
    LaplaceEval::new(LhatTransform { g: g.clone() })
}

/// `L̂⁻¹G` as a transform with derivative channels.
pub fn inverse_eval(g: &LaplaceEval) -> LaplaceEval {
    LaplaceEval::new(InverseTransform { g: g.clone() })
}

/// `m(x) - B₂(μ̄, m)(x) - B₂(m, μ̄)(x)` for the constant kernel.
pub fn apply_l_physical(spec: &KernelSpec, m: &dyn MuEval, x: f64) -> Result<f64> {
    if !spec.is_constant() {
        return Err(Error::Unsupported(
            "the linearized operator is defined for the constant kernel".into(),
        ));
    }
    let part = KernelPart::Constant;
    let a = bilinear::apply_bk_part(spec, part, &MuBar, m, x)?;
    let b = bilinear::apply_bk_part(spec, part, m, &MuBar, x)?;
    Ok(m.mu(x) - a - b)
}

/// Forward values and the inverse round-trip error of `L̂` on sample points.
#[derive(Debug, Clone, Serialize)]
pub struct OperatorTrace {
    pub input_id: String,
    pub p_samples: Vec<f64>,
    pub forward_values: Vec<f64>,
    /// `sup_p |L̂⁻¹(L̂G)(p) - G(p)| / max(|G(p)|, 1e-12)`.
    pub inverse_roundtrip_error: f64,
}

pub fn trace_operator(input_id: &str, g: &LaplaceEval, p_samples: &[f64]) -> Result<OperatorTrace> {
    let forward = lhat_eval(g);
    let mut forward_values = Vec::with_capacity(p_samples.len());
    let mut worst: f64 = 0.0;
    for &p in p_samples {
        forward_values.push(apply_lhat(g, p)?);
        let back = invert_lhat(&forward, p)?;
        let target = g.omega0(p);
        worst = worst.max((back - target).abs() / target.abs().max(1e-12));
    }
    Ok(OperatorTrace {
        input_id: input_id.to_string(),
        p_samples: p_samples.to_vec(),
        forward_values,
        inverse_roundtrip_error: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laplace;
    use crate::profiles::{Grid, Profile};

    fn family() -> Vec<LaplaceEval> {
        vec![
            LaplaceEval::mu_bar(),
            LaplaceEval::exp_mixture(&[(1.0, 1.0)]),
            LaplaceEval::from_fns(
                |p| 1.0 / ((1.0 + p) * (1.0 + p)),
                |p| -2.0 / (1.0 + p).powi(3),
                |p| 6.0 / (1.0 + p).powi(4),
                -1.0,
            ),
        ]
    }

    #[test]
    fn lhat_of_mu_bar() {
        let bar = LaplaceEval::mu_bar();
        for &p in &[0.01, 0.5, 1.0, 1.00005, 2.0, 37.0] {
            let v = apply_lhat(&bar, p).unwrap();
            assert!((v + 1.0 / p).abs() < 1e-8 / p, "p={p}: {v}");
        }
        assert!((apply_lhat(&bar, 2.0).unwrap() + 0.5).abs() < 1e-10);
        assert_eq!(apply_lhat(&LaplaceEval::zero(), 3.0).unwrap(), 0.0);
    }

    #[test]
    fn inverse_examples() {
        let g = LaplaceEval::mu_bar().scaled(-1.0);
        for &p in &[0.1, 0.7, 1.0, 1.00002, 3.0, 50.0] {
            let v = invert_lhat(&g, p).unwrap();
            assert!((v - 1.0 / p).abs() < 1e-9 / p, "p={p}: {v}");
        }
        let e = LaplaceEval::exp_mixture(&[(1.0, 1.0)]);
        assert_eq!(invert_lhat(&e, 1.0).unwrap(), -0.5);
    }

    #[test]
    fn round_trips() {
        let ps: Vec<f64> = (0..13).map(|i| 0.01 * 10f64.powf(i as f64 / 3.0)).collect();
        for g in family() {
            let fwd = lhat_eval(&g);
            let inv = inverse_eval(&g);
            for &p in &ps {
                let target = g.omega0(p);
                let a = invert_lhat(&fwd, p).unwrap();
                let b = apply_lhat(&inv, p).unwrap();
                assert!((a - target).abs() < 1e-5 * target.abs(), "inv∘fwd p={p}: {a} vs {target}");
                assert!((b - target).abs() < 1e-5 * target.abs(), "fwd∘inv p={p}: {b} vs {target}");
            }
        }
    }

    #[test]
    fn derivative_channels_match_differences() {
        for g in family() {
            for &p in &[0.3, 2.5] {
                let d = 1e-4 * p;
                for (all, single) in [
                    (apply_lhat_all(&g, p).unwrap(), lhat_eval(&g)),
                    (invert_lhat_all(&g, p).unwrap(), inverse_eval(&g)),
                ] {
                    let fd1 = (single.omega0(p + d) - single.omega0(p - d)) / (2.0 * d);
                    let fd2 = (single.omega1(p + d) - single.omega1(p - d)) / (2.0 * d);
                    assert!((all[1] - fd1).abs() < 1e-5 * all[1].abs().max(1.0));
                    assert!((all[2] - fd2).abs() < 1e-5 * all[2].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn linearity() {
        let f = family();
        let combo = LaplaceEval::combine(&[(2.0, f[1].clone()), (-0.5, f[2].clone())]);
        for &p in &[0.2, 1.7, 9.0] {
            let lhs = apply_lhat(&combo, p).unwrap();
            let rhs = 2.0 * apply_lhat(&f[1], p).unwrap() - 0.5 * apply_lhat(&f[2], p).unwrap();
            assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn physical_examples() {
        let k = KernelSpec::constant();
        let zero = |_x: f64| 0.0;
        assert_eq!(apply_l_physical(&k, &zero, 1.0).unwrap(), 0.0);
        for &x in &[0.01, 1.0, 12.0] {
            assert!((apply_l_physical(&k, &MuBar, x).unwrap() + 1.0).abs() < 1e-10);
        }
        let w = KernelSpec::power(0.2, 0.1).unwrap();
        assert!(matches!(apply_l_physical(&w, &MuBar, 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn commutes_with_transform() {
        // ω = e^{-x} has transform 1/(1+p); T(Lω) is assembled from the
        // transforms of the two nonnegative forms.
        let k = KernelSpec::constant();
        let grid = Grid::default();
        let omega = Profile::from_mu(grid.clone(), grid.nodes().iter().map(|x| (-x).exp()).collect())
            .unwrap();
        let ones = Profile::from_mu(grid.clone(), vec![1.0; grid.n]).unwrap();
        let b1 = bilinear::bk_on_grid(&k, KernelPart::Constant, &ones, &omega).unwrap();
        let b2 = bilinear::bk_on_grid(&k, KernelPart::Constant, &omega, &ones).unwrap();
        let t1 = laplace::transform_mu(&Profile::from_mu(grid.clone(), b1.values).unwrap());
        let t2 = laplace::transform_mu(&Profile::from_mu(grid.clone(), b2.values).unwrap());
        let g = LaplaceEval::exp_mixture(&[(1.0, 1.0)]);
        for &p in &[0.5, 2.0, 5.0] {
            let physical = g.omega0(p) - t1.omega0(p) - t2.omega0(p);
            let lhat = apply_lhat(&g, p).unwrap();
            assert!((physical - lhat).abs() < 1e-5 * lhat.abs(), "p={p}: {physical} vs {lhat}");
        }
    }

    #[test]
    fn trace_reports_roundtrip() {
        let t = trace_operator("mu_bar", &LaplaceEval::mu_bar(), &[0.1, 1.0, 10.0]).unwrap();
        assert_eq!(t.forward_values.len(), 3);
        assert!(t.inverse_roundtrip_error < 1e-6);
    }
}
