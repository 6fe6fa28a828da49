//! Laplace transforms `Ω(p) = ∫₀^∞ ω(x) e^{-px} dx` of profiles and the
//! weighted sup-seminorms `|ω|_{k,χ} = sup_p p^{1+k} (1+p)^{χ-1} |∂^k Ω(p)|`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::profiles::Profile;

/// A Laplace transform together with its first two derivatives.
pub trait Transform: Send + Sync {
    /// `∂_p^k Ω(p)` for `k ∈ {0, 1, 2}`.
    fn eval(&self, p: f64, k: usize) -> f64;

    /// Infimum of the real `p` at which the transform converges.
    fn domain_min(&self) -> f64;
}

/// Shared handle to a transform, cheap to clone.
#[derive(Clone)]
pub struct LaplaceEval {
    inner: Arc<dyn Transform>,
}

impl fmt::Debug for LaplaceEval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LaplaceEval")
            .field("domain_min", &self.domain_min())
            .finish()
    }
}

impl LaplaceEval {
    pub fn new(t: impl Transform + 'static) -> Self {
        LaplaceEval { inner: Arc::new(t) }
    }

    /// Transform given by explicit closures for `Ω`, `Ω′`, `Ω″`.
    pub fn from_fns(
        omega0: impl Fn(f64) -> f64 + Send + Sync + 'static,
        omega1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        omega2: impl Fn(f64) -> f64 + Send + Sync + 'static,
        domain_min: f64,
    ) -> Self {
        Self::new(FnTransform {
            fns: [Box::new(omega0), Box::new(omega1), Box::new(omega2)],
            domain_min,
        })
    }

    pub fn eval(&self, p: f64, k: usize) -> f64 {
        self.inner.eval(p, k)
    }

    pub fn omega0(&self, p: f64) -> f64 {
        self.inner.eval(p, 0)
    }

    pub fn omega1(&self, p: f64) -> f64 {
        self.inner.eval(p, 1)
    }

    pub fn omega2(&self, p: f64) -> f64 {
        self.inner.eval(p, 2)
    }

    pub fn domain_min(&self) -> f64 {
        self.inner.domain_min()
    }

    /// `Σ c_i Ω_i`.
    pub fn combine(terms: &[(f64, LaplaceEval)]) -> Self {
        Self::new(Combination {
            terms: terms.to_vec(),
        })
    }

    /// `self - other`.
    pub fn minus(&self, other: &LaplaceEval) -> Self {
        Self::combine(&[(1.0, self.clone()), (-1.0, other.clone())])
    }

    /// `c · self`.
    pub fn scaled(&self, c: f64) -> Self {
        Self::combine(&[(c, self.clone())])
    }

    /// Transform of `μ̄ ≡ 1`: `Ω(p) = 1/p`.
    pub fn mu_bar() -> Self {
        Self::new(MuBarTransform)
    }

    /// Transform of `Σ c_i e^{-a_i x}`.
    pub fn exp_mixture(terms: &[(f64, f64)]) -> Self {
        Self::new(ExpMixture {
            terms: terms.to_vec(),
        })
    }

    /// The zero transform.
    pub fn zero() -> Self {
        Self::exp_mixture(&[])
    }
}

struct FnTransform {
    fns: [Box<dyn Fn(f64) -> f64 + Send + Sync>; 3],
    domain_min: f64,
}

impl Transform for FnTransform {
    fn eval(&self, p: f64, k: usize) -> f64 {
        (self.fns[k])(p)
    }

    fn domain_min(&self) -> f64 {
        self.domain_min
    }
}

struct Combination {
    terms: Vec<(f64, LaplaceEval)>,
}

impl Transform for Combination {
    fn eval(&self, p: f64, k: usize) -> f64 {
        self.terms.iter().map(|(c, t)| c * t.eval(p, k)).sum()
    }

    fn domain_min(&self) -> f64 {
        self.terms
            .iter()
            .map(|(_, t)| t.domain_min())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `Ω(p) = 1/p`.
#[derive(Debug, Clone, Copy)]
pub struct MuBarTransform;

impl Transform for MuBarTransform {
    fn eval(&self, p: f64, k: usize) -> f64 {
        match k {
            0 => 1.0 / p,
            1 => -1.0 / (p * p),
            _ => 2.0 / (p * p * p),
        }
    }

    fn domain_min(&self) -> f64 {
        0.0
    }
}

/// Transform of a finite exponential mixture `Σ c_i e^{-a_i x}`.
#[derive(Debug, Clone)]
pub struct ExpMixture {
    pub terms: Vec<(f64, f64)>,
}

impl Transform for ExpMixture {
    fn eval(&self, p: f64, k: usize) -> f64 {
        self.terms
            .iter()
            .map(|&(c, a)| {
                let q = a + p;
                match k {
                    0 => c / q,
                    1 => -c / (q * q),
                    _ => 2.0 * c / (q * q * q),
                }
            })
            .sum()
    }

    fn domain_min(&self) -> f64 {
        -self
            .terms
            .iter()
            .map(|t| t.1)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Quadrature transform of a gridded profile, with the tail `A e^{-x}`
/// beyond `x_max` integrated in closed form.
#[derive(Debug, Clone)]
pub struct ProfileTransform {
    nodes: Vec<f64>,
    /// Quadrature weight times `f` at each node.
    wf: Vec<f64>,
    x_max: f64,
    tail_amp: f64,
    /// `Ω_μ(p) = Ω_f(p - 1)`: the transform of `μ = f e^x` uses `shift = -1`.
    shift: f64,
}

impl ProfileTransform {
    fn new(profile: &Profile, shift: f64) -> Self {
        let cache = profile.quad_cache();
        let nodes = cache.z.clone();
        let wf: Vec<f64> = cache.w.iter().zip(&cache.f).map(|(w, f)| w * f).collect();
        ProfileTransform {
            nodes,
            wf,
            x_max: profile.grid().x_max,
            tail_amp: profile.tail_amp(),
            shift,
        }
    }

    /// `(-1)^k A ∫_X^∞ x^k e^{-c x} dx` with `c = 1 + q`.
    fn tail(&self, q: f64, k: usize) -> f64 {
        if self.tail_amp == 0.0 {
            return 0.0;
        }
        let c = 1.0 + q;
        let x = self.x_max;
        let e = (-c * x).exp();
        let v = match k {
            0 => e / c,
            1 => -e * (x / c + 1.0 / (c * c)),
            _ => e * (x * x / c + 2.0 * x / (c * c) + 2.0 / (c * c * c)),
        };
        self.tail_amp * v
    }
}

impl Transform for ProfileTransform {
    fn eval(&self, p: f64, k: usize) -> f64 {
        let q = p + self.shift;
        let body: f64 = self
            .nodes
            .iter()
            .zip(&self.wf)
            .map(|(&z, &wf)| {
                let e = wf * (-q * z).exp();
                match k {
                    0 => e,
                    1 => -z * e,
                    _ => z * z * e,
                }
            })
            .sum();
        body + self.tail(q, k)
    }

    fn domain_min(&self) -> f64 {
        -1.0 - self.shift
    }
}

/// `Ω(p) = ∫₀^∞ f(x) e^{-px} dx` with derivatives from the moments `x`, `x²`.
pub fn transform(profile: &Profile) -> LaplaceEval {
    LaplaceEval::new(ProfileTransform::new(profile, 0.0))
}

/// `M(p) = ∫₀^∞ μ(x) e^{-px} dx` for `μ = f e^x`, defined for `p > 0`.
pub fn transform_mu(profile: &Profile) -> LaplaceEval {
    LaplaceEval::new(ProfileTransform::new(profile, -1.0))
}

/// Outcome of a weighted supremum over `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormResult {
    pub k: usize,
    pub chi: f64,
    pub value: f64,
    pub argmax_p: f64,
    /// Whether the supremum sits at an edge of the `p` range, i.e. it may be
    /// approached only in the limit `p → 0` or `p → ∞`.
    pub boundary_flag: bool,
}

/// Outcome of the unweighted seminorm `sup_p p^k |Ω(p)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PNormResult {
    pub k: usize,
    pub value: f64,
    pub argmax_p: f64,
    pub boundary_flag: bool,
}

pub const P_MIN: f64 = 1e-4;
pub const P_MAX: f64 = 1e4;
pub const P_POINTS: usize = 2000;

/// The log-uniform evaluation grid on `[P_MIN, P_MAX]`.
pub fn p_grid() -> Vec<f64> {
    let step = (P_MAX / P_MIN).ln() / (P_POINTS - 1) as f64;
    (0..P_POINTS)
        .map(|i| P_MIN * (step * i as f64).exp())
        .collect()
}

/// Supremum of `g` over the `p`-grid, refined by golden-section search in
/// `log p` around an interior discrete maximum. Returns
/// `(value, argmax, boundary_flag)`.
pub fn sup_over_p(g: impl Fn(f64) -> f64 + Sync) -> Result<(f64, f64, bool)> {
    let grid = p_grid();
    let vals: Vec<f64> = grid.par_iter().map(|&p| g(p)).collect();
    if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
        return Err(Error::numeric(
            format!("non-finite weighted transform at p = {:e}", grid[i]),
            vals[i],
        ));
    }
    let (imax, &vmax) = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is nonempty");
    if imax == 0 || imax == grid.len() - 1 {
        return Ok((vmax, grid[imax], true));
    }
    let h = |t: f64| g(t.exp());
    let (mut a, mut b) = (grid[imax - 1].ln(), grid[imax + 1].ln());
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (h(c), h(d));
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = h(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = h(d);
        }
    }
    let t = 0.5 * (a + b);
    let v = h(t);
    if v > vmax {
        Ok((v, t.exp(), false))
    } else {
        Ok((vmax, grid[imax], false))
    }
}

fn check_k(k: usize) -> Result<()> {
    if k > 2 {
        return Err(Error::param("k", format!("derivative order {k} must be 0, 1 or 2")));
    }
    Ok(())
}

fn check_chi(chi: f64) -> Result<()> {
    if !(chi > 0.0 && chi <= 1.0) {
        return Err(Error::param("chi", format!("{chi} must lie in (0, 1]")));
    }
    Ok(())
}

/// `|ω|_{k,χ} = sup_p p^{1+k} (1+p)^{χ-1} |∂^k Ω(p)|`.
pub fn seminorm(l: &LaplaceEval, k: usize, chi: f64) -> Result<NormResult> {
    check_k(k)?;
    check_chi(chi)?;
    let (value, argmax_p, boundary_flag) = sup_over_p(|p| {
        p.powi(1 + k as i32) * (1.0 + p).powf(chi - 1.0) * l.eval(p, k).abs()
    })?;
    Ok(NormResult {
        k,
        chi,
        value,
        argmax_p,
        boundary_flag,
    })
}

/// `‖ω‖_{k,χ} = Σ_{ℓ ≤ k} |ω|_{ℓ,χ}`.
pub fn fullnorm(l: &LaplaceEval, k: usize, chi: f64) -> Result<f64> {
    check_k(k)?;
    (0..=k).map(|j| seminorm(l, j, chi).map(|r| r.value)).sum()
}

/// `|ω|*_k = sup_p p^k |Ω(p)|`.
pub fn pseminorm(l: &LaplaceEval, k: usize) -> Result<PNormResult> {
    check_k(k)?;
    let (value, argmax_p, boundary_flag) = sup_over_p(|p| p.powi(k as i32) * l.omega0(p).abs())?;
    Ok(PNormResult {
        k,
        value,
        argmax_p,
        boundary_flag,
    })
}

/// `Λ_χ(s) = s^{-1}` for `s ≤ 1` and `s^{-χ}` for `s ≥ 1`; NaN for `s ≤ 0`.
pub fn lambda_weight(s: f64, chi: f64) -> f64 {
    if !(s > 0.0) {
        f64::NAN
    } else if s <= 1.0 {
        1.0 / s
    } else {
        s.powf(-chi)
    }
}

/// Default norm exponent `θ = (α + 1/2)/2`.
pub fn default_theta(alpha: f64) -> f64 {
    0.5 * (alpha + 0.5)
}
