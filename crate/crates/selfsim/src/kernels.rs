//! Rate kernels `K = 2 + εW` of homogeneity zero and the representation
//! measure `Γ` with `W(y,z)/(y+z) = ∫∫ Γ(ξ,η) e^{-ξy-ηz} dξ dη`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad::{self, NodeSet};

/// `W(ξ, 1)` on the positive axis, supplied by the user for the custom family.
pub type ProfileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Boundary value of `W(·, 1)` on the negative axis, `s ↦ W(-s ± i0, 1)`.
pub type BoundaryFn = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// User-supplied perturbation `W` for the custom family.
#[derive(Clone)]
pub struct CustomW {
    /// `s ↦ W(s, 1)` for `s > 0`.
    pub w: ProfileFn,
    /// `s ↦ W(-s + i0, 1)` and `s ↦ W(-s - i0, 1)`, needed for the jump density.
    pub boundary: Option<(BoundaryFn, BoundaryFn)>,
}

impl fmt::Debug for CustomW {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomW")
            .field("boundary", &self.boundary.is_some())
            .finish()
    }
}

/// Kernel family.
#[derive(Debug, Clone)]
pub enum Family {
    /// `W ≡ 0`, i.e. `K = 2`.
    Constant,
    /// `W(x,y) = (x/y)^α + (y/x)^α`.
    Power,
    /// Brownian kernel with its constant part removed: `W = (x/y)^{1/3} + (y/x)^{1/3}`.
    Brownian,
    /// User-supplied `W`.
    Custom(CustomW),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Constant => "constant",
            Family::Power => "power",
            Family::Brownian => "brownian",
            Family::Custom(_) => "custom",
        }
    }
}

/// A single separable term `coef · y^{py} · z^{pz}` of a kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTerm {
    pub coef: f64,
    pub py: f64,
    pub pz: f64,
}

/// Which part of `K = 2 + εW` an operator should use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelPart {
    /// The full kernel `K`.
    Full,
    /// The constant kernel `2` (the form `B₂`).
    Constant,
    /// The perturbation `W` alone (the form `B_W`).
    Perturbation,
}

/// Rate kernel `K = 2 + εW`.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub epsilon: f64,
    pub alpha: f64,
    pub family: Family,
    /// Leading coefficient of `W(ξ,1) ~ C_W ξ^{-α}` as `ξ → 0`.
    pub c_w: f64,
}

impl KernelSpec {
    /// The constant kernel `K = 2`.
    pub fn constant() -> Self {
        KernelSpec {
            epsilon: 0.0,
            alpha: 0.0,
            family: Family::Constant,
            c_w: 1.0,
        }
    }

    /// `K = 2 + ε((x/y)^α + (y/x)^α)` with `0 ≤ α < 1/2`, `ε ≥ 0`.
    pub fn power(alpha: f64, epsilon: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_epsilon(epsilon)?;
        Ok(KernelSpec {
            epsilon,
            alpha,
            family: Family::Power,
            c_w: 1.0,
        })
    }

    /// Brownian kernel `ε(x^{1/3}+y^{1/3})(x^{-1/3}+y^{-1/3}) = ε(2 + W)`.
    ///
    /// The overall factor `ε` is absorbed by the time scale, so the kernel
    /// used is `2 + εW` with `α = 1/3`. Physical Brownian coagulation has
    /// `ε ≈ 1`, well outside the small-perturbation regime.
    pub fn brownian(epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(KernelSpec {
            epsilon,
            alpha: 1.0 / 3.0,
            family: Family::Brownian,
            c_w: 1.0,
        })
    }

    /// Custom `W` given through `w(s) = W(s, 1)`, with `W(ξ,1) ~ c_w ξ^{-α}` at 0.
    ///
    /// The caller is responsible for symmetry, i.e. `w(1/s) = w(s)`, for the bound `0 ≤ w(s) ≤ s^α + s^{-α}`, and for
    /// `Re W(ξ,1) ≥ 0` in the right half-plane, which cannot be checked from
    /// real-axis samples.
    pub fn custom(alpha: f64, epsilon: f64, c_w: f64, w: CustomW) -> Result<Self> {
        check_alpha(alpha)?;
        check_epsilon(epsilon)?;
        if !(c_w > 0.0 && c_w.is_finite()) {
            return Err(Error::param("c_w", "must be positive and finite"));
        }
        Ok(KernelSpec {
            epsilon,
            alpha,
            family: Family::Custom(w),
            c_w,
        })
    }

    /// Whether the kernel is identically 2.
    pub fn is_constant(&self) -> bool {
        matches!(self.family, Family::Constant) || self.epsilon == 0.0
    }

    /// `K(x, y) = 2 + εW(x, y)`.
    pub fn eval_k(&self, x: f64, y: f64) -> Result<f64> {
        check_positive(x, y)?;
        if matches!(self.family, Family::Constant) {
            return Ok(2.0);
        }
        Ok(2.0 + self.epsilon * self.w_unchecked(x / y))
    }

    /// `W(x, y)`; unsupported for the constant family.
    pub fn eval_w(&self, x: f64, y: f64) -> Result<f64> {
        check_positive(x, y)?;
        if matches!(self.family, Family::Constant) {
            return Err(Error::Unsupported(
                "the constant kernel has no perturbation W".into(),
            ));
        }
        Ok(self.w_unchecked(x / y))
    }

    /// `W(s, 1)` without argument checks; zero for the constant family.
    pub(crate) fn w_unchecked(&self, s: f64) -> f64 {
        match &self.family {
            Family::Constant => 0.0,
            Family::Power | Family::Brownian => {
                let t = s.powf(self.alpha);
                t + 1.0 / t
            }
            Family::Custom(c) => (c.w)(s),
        }
    }

    /// Kernel part evaluated at `(y, z)` without argument checks.
    pub(crate) fn part_unchecked(&self, part: KernelPart, y: f64, z: f64) -> f64 {
        match part {
            KernelPart::Constant => 2.0,
            KernelPart::Perturbation => self.w_unchecked(y / z),
            KernelPart::Full => 2.0 + self.epsilon * self.w_unchecked(y / z),
        }
    }

    /// Separable expansion `W(y,z) = Σ coef y^{py} z^{pz}` when available.
    pub fn w_terms(&self) -> Option<Vec<PowerTerm>> {
        match self.family {
            Family::Constant => Some(Vec::new()),
            Family::Power | Family::Brownian => {
                let a = self.alpha;
                if a == 0.0 {
                    Some(vec![PowerTerm { coef: 2.0, py: 0.0, pz: 0.0 }])
                } else {
                    Some(vec![
                        PowerTerm { coef: 1.0, py: a, pz: -a },
                        PowerTerm { coef: 1.0, py: -a, pz: a },
                    ])
                }
            }
            Family::Custom(_) => None,
        }
    }

    /// Separable expansion of the requested kernel part, when available.
    pub fn part_terms(&self, part: KernelPart) -> Option<Vec<PowerTerm>> {
        let constant = PowerTerm { coef: 2.0, py: 0.0, pz: 0.0 };
        match part {
            KernelPart::Constant => Some(vec![constant]),
            KernelPart::Perturbation => self.w_terms(),
            KernelPart::Full => {
                let mut terms = vec![constant];
                if !self.is_constant() {
                    for t in self.w_terms()? {
                        terms.push(PowerTerm { coef: self.epsilon * t.coef, ..t });
                    }
                }
                Some(terms)
            }
        }
    }

    /// Boundary values `(W(-s+i0,1), W(-s-i0,1))` of the analytic extension.
    pub fn boundary_values(&self, s: f64) -> Result<(Complex64, Complex64)> {
        match &self.family {
            Family::Power | Family::Brownian => {
                let a = self.alpha;
                let upper = Complex64::from_polar(s.powf(a), PI * a)
                    + Complex64::from_polar(s.powf(-a), -PI * a);
                let lower = upper.conj();
                Ok((upper, lower))
            }
            Family::Custom(CustomW {
                boundary: Some((plus, minus)),
                ..
            }) => Ok((plus(s), minus(s))),
            _ => Err(Error::Unsupported(format!(
                "the {} family has no analytic boundary values",
                self.family.name()
            ))),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::param("alpha", format!("{alpha} is outside [0, 1/2)")));
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::param("epsilon", format!("{epsilon} must be finite and >= 0")));
    }
    Ok(())
}

fn check_positive(x: f64, y: f64) -> Result<()> {
    if !(x > 0.0 && y > 0.0) {
        return Err(Error::domain(format!(
            "kernel arguments must be positive, got ({x}, {y})"
        )));
    }
    Ok(())
}

/// Density function `s ↦ φ(s)` of the regular part, `Γ̃(ξ,η) = φ(ξ/η)/η`.
pub type JumpFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Representation measure `Γ = Γ̃ + d·δ(ξ-η)` of `W(y,z)/(y+z)`.
#[derive(Clone)]
pub struct GammaRepr {
    phi: JumpFn,
    pub diag_coeff: f64,
    pub alpha: f64,
}

impl fmt::Debug for GammaRepr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GammaRepr")
            .field("diag_coeff", &self.diag_coeff)
            .field("alpha", &self.alpha)
            .finish()
    }
}

impl GammaRepr {
    /// Regular part `Γ̃(ξ, η)`.
    pub fn regular(&self, xi: f64, eta: f64) -> f64 {
        (self.phi)(xi / eta) / eta
    }

    /// Density `φ(s) = Γ̃(s, 1)`.
    pub fn phi(&self, s: f64) -> f64 {
        (self.phi)(s)
    }

    /// Representation for any kernel with a known analytic extension.
    pub fn for_kernel(spec: &KernelSpec) -> Result<Self> {
        match spec.family {
            Family::Power | Family::Brownian => gamma_closed_form(spec.alpha),
            Family::Custom(_) => {
                let (plus, minus) = spec.boundary_values(1.0)?;
                let diag = 0.5 * (plus + minus).re;
                let owned = spec.clone();
                let phi: JumpFn = Arc::new(move |s| gamma_jump(&owned, s).unwrap_or(f64::NAN));
                Ok(GammaRepr {
                    phi,
                    diag_coeff: diag,
                    alpha: spec.alpha,
                })
            }
            Family::Constant => Err(Error::Unsupported(
                "the constant kernel has no perturbation to represent".into(),
            )),
        }
    }
}

/// `sin(πα)/π · (s^α - s^{-α})/(s - 1)`, evaluated stably through `s = e^u`.
fn power_phi(alpha: f64, s: f64) -> f64 {
    let u = s.ln();
    let pref = (PI * alpha).sin() / PI;
    if u == 0.0 {
        return pref * 2.0 * alpha;
    }
    pref * 2.0 * (alpha * u).sinh() / u.exp_m1()
}

/// Closed-form representation for the power perturbation,
/// `Γ̃(ξ,η) = (sin πα/π)((ξ/η)^α - (η/ξ)^α)/(ξ - η)` and diagonal weight `2cos πα`.
pub fn gamma_closed_form(alpha: f64) -> Result<GammaRepr> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::domain(format!("alpha = {alpha} is outside (0, 1/2)")));
    }
    Ok(GammaRepr {
        phi: Arc::new(move |s| power_phi(alpha, s)),
        diag_coeff: 2.0 * (PI * alpha).cos(),
        alpha,
    })
}

/// Jump density `φ(s) = (G₋(-s) - G₊(-s)) / (2πi(1-s))` from the boundary values
/// of `W(·,1)` above (`G₊`) and below (`G₋`) the negative axis. At `s = 1` the
/// removable singularity is filled by the symmetric limit.
pub fn gamma_jump(spec: &KernelSpec, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain(format!("jump density needs s > 0, got {s}")));
    }
    let raw = |s: f64| -> Result<f64> {
        let (plus, minus) = spec.boundary_values(s)?;
        let value = (minus - plus) / (Complex64::new(0.0, 2.0 * PI) * (1.0 - s));
        Ok(value.re)
    };
    if (s - 1.0).abs() < 1e-6 {
        if matches!(spec.family, Family::Power | Family::Brownian) {
            spec.boundary_values(s)?;
            return Ok(power_phi(spec.alpha, 1.0));
        }
        let d = 1e-4;
        return Ok(0.5 * (raw(1.0 + d)? + raw(1.0 - d)?));
    }
    raw(s)
}

/// Quadrature nodes on `s ∈ [0,1]` for integrals of `Γ̃(s, 1-s)`, graded toward
/// both endpoints where `Γ̃(s,1-s) ~ s^{-α}`.
pub(crate) fn simplex_nodes(levels: usize, points: usize) -> NodeSet {
    quad::unit_graded_both(levels, quad::legendre(points))
}

/// `Γ̃(s, 1-s)` for `s ∈ (0,1)`.
pub(crate) fn regular_on_simplex(repr: &GammaRepr, s: f64) -> f64 {
    repr.regular(s, 1.0 - s)
}

/// Residual `|∫∫Γ e^{-ξy-ηz} - W(y,z)/(y+z)|`.
///
/// The regular part is integrated in the coordinates `ξ = rs`, `η = r(1-s)`;
/// homogeneity `-1` turns `Γ̃ dξ dη` into `Γ̃(s,1-s) dr ds`. The `r` integral is
/// truncated at `R` with `e^{-R min(y,z)} < 1e-16` and done with Gauss panels;
/// the `s` integral uses panels graded toward both endpoints. The Dirac part
/// contributes `diag_coeff/(y+z)`. Two resolutions are compared and a
/// discrepancy above `tol/10` is reported as a numeric failure.
pub fn verify_repr(repr: &GammaRepr, spec: &KernelSpec, y: f64, z: f64, tol: f64) -> Result<f64> {
    let target = spec.eval_w(y, z)? / (y + z);
    if (repr.alpha - spec.alpha).abs() > 1e-15 {
        return Err(Error::domain("representation built for a different alpha"));
    }
    let r_max = -(1e-16f64).ln() / y.min(z);
    let lhs = |levels: usize, points: usize| {
        let s_nodes = simplex_nodes(levels, points);
        let panels = ((r_max * y.max(z)) / 2.0).ceil().max(4.0) as usize;
        let mut r_nodes = NodeSet::new();
        let step = r_max / panels as f64;
        for k in 0..panels {
            r_nodes.push_panel(step * k as f64, step * (k + 1) as f64, quad::legendre(points));
        }
        let regular: f64 = s_nodes
            .x
            .iter()
            .zip(&s_nodes.w)
            .map(|(&s, &ws)| {
                let c = s * y + (1.0 - s) * z;
                let inner = r_nodes.integrate(|r| (-r * c).exp());
                ws * regular_on_simplex(repr, s) * inner
            })
            .sum();
        regular + repr.diag_coeff / (y + z)
    };
    let coarse = lhs(30, 10);
    let fine = lhs(40, 14);
    if !fine.is_finite() || (fine - coarse).abs() > 0.1 * tol {
        return Err(Error::numeric(
            format!("representation quadrature unconverged at ({y}, {z})"),
            fine,
        ));
    }
    Ok((fine - target).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        assert_eq!(KernelSpec::constant().eval_k(3.0, 7.0).unwrap(), 2.0);
        let k = KernelSpec::power(0.25, 0.1).unwrap();
        assert!((k.eval_k(1.0, 1.0).unwrap() - 2.2).abs() < 1e-15);
        assert!((k.eval_k(16.0, 1.0).unwrap() - 2.25).abs() < 1e-14);
        for lambda in [1.0, 10.0, 100.0] {
            assert!((k.eval_w(16.0 * lambda, lambda).unwrap() - 2.5).abs() < 1e-14);
        }
        let b = KernelSpec::brownian(1.0).unwrap();
        assert!((b.eval_w(8.0, 1.0).unwrap() - 2.5).abs() < 1e-14);
    }

    #[test]
    fn kernel_errors() {
        let c = KernelSpec::constant();
        assert!(matches!(c.eval_w(1.0, 1.0), Err(Error::Unsupported(_))));
        assert!(matches!(c.eval_k(0.0, 1.0), Err(Error::Domain(_))));
        assert!(KernelSpec::power(0.5, 0.1).is_err());
        assert!(KernelSpec::power(0.2, -0.1).is_err());
    }

    #[test]
    fn separable_terms_reproduce_kernel() {
        let k = KernelSpec::power(0.3, 0.07).unwrap();
        let terms = k.part_terms(KernelPart::Full).unwrap();
        for (y, z) in [(0.3f64, 2.0f64), (5.0, 0.01), (1.0, 1.0)] {
            let sum: f64 = terms.iter().map(|t| t.coef * y.powf(t.py) * z.powf(t.pz)).sum();
            assert!((sum - k.eval_k(y, z).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn closed_form_examples() {
        let g = gamma_closed_form(0.25).unwrap();
        assert!((g.diag_coeff - 2f64.sqrt()).abs() < 1e-15);
        let expected = 2f64.sqrt() / (4.0 * PI);
        assert!((g.regular(1.0, 1.0) - expected).abs() < 1e-15);
        assert!((g.regular(2.0, 1.0) - g.regular(1.0, 2.0)).abs() < 1e-16);
        assert!(gamma_closed_form(0.5).is_err());
        assert!(gamma_closed_form(0.0).is_err());
    }

    #[test]
    fn jump_matches_closed_form() {
        let k = KernelSpec::power(0.25, 0.1).unwrap();
        let g = gamma_closed_form(0.25).unwrap();
        for s in [0.5, 2.0, 10.0, 1.0] {
            let j = gamma_jump(&k, s).unwrap();
            let c = g.regular(s, 1.0);
            assert!((j - c).abs() < 1e-12 * c, "s={s}: {j} vs {c}");
        }
        let s4 = gamma_jump(&k, 4.0).unwrap();
        assert!((s4 - 0.05305).abs() < 1e-4);
        assert!(matches!(
            gamma_jump(&KernelSpec::constant(), 2.0),
            Err(Error::Unsupported(_))
        ));
    }
}
