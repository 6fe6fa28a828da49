//! Gridded profiles `f` on `(0, ∞)` with an exponential tail model beyond the
//! grid, a near-zero extrapolation law below it, and the `μ = f e^x` view.

use std::fmt::Write as _;
use std::sync::{Arc, OnceLock};

use serde::Serialize;
use statrs::function::gamma::{gamma_li, gamma_ui};

use crate::error::{Error, Result};
use crate::kernels::{KernelPart, KernelSpec};
use crate::quad::{self, NodeSet};

/// Log-uniform grid on `[x_min, x_max]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    #[serde(skip)]
    nodes: Vec<f64>,
    #[serde(skip)]
    log_step: f64,
}

impl Grid {
    /// Builds the grid; requires `0 < x_min < 1 < x_max` and `n ≥ 4`.
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min > 0.0 && x_min < 1.0) {
            return Err(Error::param("grid.x_min", format!("{x_min} must lie in (0, 1)")));
        }
        if !(x_max > 1.0 && x_max.is_finite()) {
            return Err(Error::param("grid.x_max", format!("{x_max} must be finite and > 1")));
        }
        if n < 4 {
            return Err(Error::param("grid.n", format!("{n} must be at least 4")));
        }
        let log_step = (x_max / x_min).ln() / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n)
            .map(|i| x_min * (log_step * i as f64).exp())
            .collect();
        nodes[0] = x_min;
        nodes[n - 1] = x_max;
        Ok(Grid {
            x_min,
            x_max,
            n,
            nodes,
            log_step,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn log_step(&self) -> f64 {
        self.log_step
    }

    /// Fractional node index of `x` (not clamped).
    pub fn position(&self, x: f64) -> f64 {
        (x / self.x_min).ln() / self.log_step
    }
}

impl Default for Grid {
    /// `x_min = 1e-4`, `x_max = 40`, `n = 600`.
    fn default() -> Self {
        Grid::new(1e-4, 40.0, 600).expect("default grid is valid")
    }
}

/// Extrapolation of `μ` below `x_min`:
/// `μ(x) = μ(x_min) exp(-Σ_j c_j ∫_x^{x_min} t^{p_j - 1} dt)`.
///
/// This is the solution shape of `(x²μ)' = x μ β_K(x)` with
/// `β_K(t) - 2 = Σ_j c_j t^{p_j}`; an empty law keeps `μ` constant.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NearZeroLaw {
    /// Pairs `(c_j, p_j)`.
    pub terms: Vec<(f64, f64)>,
}

impl NearZeroLaw {
    pub fn constant() -> Self {
        Self::default()
    }

    /// `μ(x) = μ(x_min) e^{s (x - x_min)}`, the law with a single term `p = 1`.
    pub fn log_linear(slope: f64) -> Self {
        if slope == 0.0 || !slope.is_finite() {
            Self::constant()
        } else {
            NearZeroLaw {
                terms: vec![(slope, 1.0)],
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|&(c, _)| c == 0.0)
    }

    /// `log(μ(x)/μ(x_min))` for `x ≤ x_min`.
    pub fn log_ratio(&self, x: f64, x_min: f64) -> f64 {
        -self
            .terms
            .iter()
            .map(|&(c, p)| {
                if c == 0.0 {
                    0.0
                } else if p == 0.0 {
                    c * (x_min / x).ln()
                } else {
                    c * (x_min.powf(p) - x.powf(p)) / p
                }
            })
            .sum::<f64>()
    }

    /// Law of the rescaled profile `a f(a x)`: `c_j ↦ c_j a^{p_j}`.
    pub fn rescaled(&self, a: f64) -> Self {
        NearZeroLaw {
            terms: self.terms.iter().map(|&(c, p)| (c * a.powf(p), p)).collect(),
        }
    }

    /// Law implied by `β_K(t) = Σ coef t^{py} m(pz)`, where `m(σ) = ∫ z^σ f dz`.
    pub fn from_kernel(spec: &KernelSpec, moment: impl Fn(f64) -> f64) -> Self {
        if spec.is_constant() {
            return Self::constant();
        }
        let mut terms: Vec<(f64, f64)> = Vec::new();
        let mut add = |c: f64, p: f64| {
            if let Some(t) = terms.iter_mut().find(|t| t.1 == p) {
                t.0 += c;
            } else {
                terms.push((c, p));
            }
        };
        add(-2.0, 0.0);
        match spec.part_terms(KernelPart::Full) {
            Some(list) => {
                for t in list {
                    add(t.coef * moment(t.pz), t.py);
                }
            }
            None => {
                add(2.0 * moment(0.0), 0.0);
                add(spec.epsilon * spec.c_w * moment(spec.alpha), -spec.alpha);
            }
        }
        NearZeroLaw { terms }
    }
}

/// Anything that evaluates a `μ`-type function on `(0, ∞)`.
pub trait MuEval: Sync {
    fn mu(&self, x: f64) -> f64;
}

impl<F: Fn(f64) -> f64 + Sync> MuEval for F {
    fn mu(&self, x: f64) -> f64 {
        self(x)
    }
}

/// The constant-kernel solution `μ̄ ≡ 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MuBar;

impl MuEval for MuBar {
    fn mu(&self, _x: f64) -> f64 {
        1.0
    }
}

/// Interpolates nodal `μ` values at `x` inside the grid, using only the first
/// `avail` nodes. Cubic Lagrange in `(log x, log μ)` on four-node stencils when
/// all stencil values are positive, linear in `μ` otherwise.
pub(crate) fn interpolate(grid: &Grid, mu: &[f64], log_mu: &[f64], x: f64, avail: usize) -> f64 {
    let u = grid.position(x).max(0.0);
    let last = avail - 1;
    let i = (u.floor() as usize).min(last.saturating_sub(1));
    let k = avail.min(4);
    let j0 = (i as isize - 1).clamp(0, (avail - k) as isize) as usize;
    let stencil = &mu[j0..j0 + k];
    if stencil.iter().all(|&m| m > 0.0) {
        let t = u - j0 as f64;
        let mut acc = 0.0;
        for j in 0..k {
            let mut l = 1.0;
            for m in 0..k {
                if m != j {
                    l *= (t - m as f64) / (j as f64 - m as f64);
                }
            }
            acc += l * log_mu[j0 + j];
        }
        acc.exp()
    } else {
        let t = (u - i as f64).clamp(0.0, 1.0);
        let i1 = (i + 1).min(last);
        (1.0 - t) * mu[i] + t * mu[i1]
    }
}

pub(crate) fn log_or_nan(v: f64) -> f64 {
    if v > 0.0 {
        v.ln()
    } else {
        f64::NAN
    }
}

/// Quadrature data over `(0, x_max]` shared by moments and transforms.
#[derive(Debug, Clone)]
pub(crate) struct QuadCache {
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    /// `f(z)` at the nodes.
    pub f: Vec<f64>,
    /// Number of leading nodes that lie in `[0, x_min]`.
    pub origin_nodes: usize,
    /// Whether `μ` is constant below `x_min`.
    pub constant_below: bool,
}

/// Gridded nonnegative profile `f`.
#[derive(Debug, Clone)]
pub struct Profile {
    grid: Arc<Grid>,
    values: Vec<f64>,
    mu: Vec<f64>,
    log_mu: Vec<f64>,
    tail_amp: f64,
    decay_rate: Option<f64>,
    near_zero: NearZeroLaw,
    cache: OnceLock<Arc<QuadCache>>,
}

/// Serializable summary of a profile for reports.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileMeta {
    pub grid: Grid,
    pub tail_amp: f64,
    pub decay_rate: Option<f64>,
    pub near_zero_law: NearZeroLaw,
    pub mass: f64,
}

impl Profile {
    /// Profile from nodal values of `f`. Negative values are rejected; the
    /// tail amplitude defaults to `f(x_max) e^{x_max}` and the near-zero law
    /// continues `log μ` linearly in `x` from the first two nodes.
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        Self::from_values_shared(Arc::new(grid), values)
    }

    pub(crate) fn from_values_shared(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::param(
                "values",
                format!("expected {} values, got {}", grid.n, values.len()),
            ));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::domain(format!("profile values must be finite and >= 0, got {v}")));
        }
        let mu: Vec<f64> = values
            .iter()
            .zip(grid.nodes())
            .map(|(&f, &x)| f * x.exp())
            .collect();
        Ok(Self::assemble(grid, values, mu))
    }

    /// Profile from nodal values of `μ = f e^x`.
    pub fn from_mu(grid: Grid, mu: Vec<f64>) -> Result<Self> {
        Self::from_mu_shared(Arc::new(grid), mu)
    }

    pub(crate) fn from_mu_shared(grid: Arc<Grid>, mu: Vec<f64>) -> Result<Self> {
        if mu.len() != grid.n {
            return Err(Error::param(
                "mu",
                format!("expected {} values, got {}", grid.n, mu.len()),
            ));
        }
        if let Some(v) = mu.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::domain(format!("mu values must be finite and >= 0, got {v}")));
        }
        let values: Vec<f64> = mu
            .iter()
            .zip(grid.nodes())
            .map(|(&m, &x)| m * (-x).exp())
            .collect();
        Ok(Self::assemble(grid, values, mu))
    }

    /// Samples `f` at the grid nodes.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        Self::from_values(grid, values)
    }

    fn assemble(grid: Arc<Grid>, values: Vec<f64>, mu: Vec<f64>) -> Self {
        let log_mu = mu.iter().map(|&m| log_or_nan(m)).collect();
        let tail_amp = mu[grid.n - 1];
        let mut p = Profile {
            grid,
            values,
            mu,
            log_mu,
            tail_amp,
            decay_rate: None,
            near_zero: NearZeroLaw::constant(),
            cache: OnceLock::new(),
        };
        let (m0, m1) = (p.mu[0], p.mu[1]);
        if m0 > 0.0 && m1 > 0.0 {
            let nodes = p.grid.nodes();
            p.near_zero = NearZeroLaw::log_linear((m1 / m0).ln() / (nodes[1] - nodes[0]));
        }
        p.decay_rate = p.fit_decay().ok().map(|(a, _)| a);
        p
    }

    /// Replaces the tail amplitude `A` in `f(x) ≈ A e^{-x}` beyond `x_max`.
    pub fn with_tail_amp(mut self, tail_amp: f64) -> Self {
        self.tail_amp = tail_amp.max(0.0);
        self.cache = OnceLock::new();
        self
    }

    /// Replaces the near-zero extrapolation law.
    pub fn with_near_zero(mut self, law: NearZeroLaw) -> Self {
        self.near_zero = law;
        self.cache = OnceLock::new();
        self
    }

    /// Sets the near-zero law implied by `spec` and the profile's own moments.
    /// The moments depend weakly on the law, so the assignment is repeated a
    /// few times.
    pub fn with_kernel_layer(mut self, spec: &KernelSpec) -> Self {
        for _ in 0..3 {
            let law = NearZeroLaw::from_kernel(spec, |s| self.moment(s).unwrap_or(f64::NAN));
            self = self.with_near_zero(law);
        }
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub(crate) fn grid_arc(&self) -> Arc<Grid> {
        self.grid.clone()
    }

    /// Nodal values of `f`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Nodal values of `μ = f e^x`.
    pub fn mu_values(&self) -> &[f64] {
        &self.mu
    }

    pub fn tail_amp(&self) -> f64 {
        self.tail_amp
    }

    /// Fitted exponential decay rate of the tail, if the fit succeeds.
    pub fn decay_rate(&self) -> Option<f64> {
        self.decay_rate
    }

    pub fn near_zero(&self) -> &NearZeroLaw {
        &self.near_zero
    }

    /// `μ(x)` with tail and near-zero extrapolation.
    pub fn mu_at(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x > g.x_max {
            self.tail_amp
        } else if x < g.x_min {
            if self.mu[0] == 0.0 {
                0.0
            } else {
                self.mu[0] * self.near_zero.log_ratio(x, g.x_min).exp()
            }
        } else {
            interpolate(g, &self.mu, &self.log_mu, x, g.n)
        }
    }

    /// `f(x) = μ(x) e^{-x}`.
    pub fn f_at(&self, x: f64) -> f64 {
        self.mu_at(x) * (-x).exp()
    }

    /// Evaluator for `μ(x) = f(x) e^x`.
    pub fn mu_view(&self) -> MuView<'_> {
        MuView { profile: self }
    }

    pub(crate) fn quad_cache(&self) -> Arc<QuadCache> {
        self.cache
            .get_or_init(|| Arc::new(self.build_cache()))
            .clone()
    }

    fn build_cache(&self) -> QuadCache {
        let g = &self.grid;
        let rule = quad::legendre(6);
        let mut set = NodeSet::new();
        set.push_edges(&quad::graded_edges(0.0, g.x_min, 0.5, 60), quad::legendre(8));
        let origin_nodes = set.len();
        set.push_edges(g.nodes(), rule);
        let f = set.x.iter().map(|&z| self.f_at(z)).collect();
        QuadCache {
            z: set.x,
            w: set.w,
            f,
            origin_nodes,
            constant_below: self.near_zero.is_constant(),
        }
    }

    /// `∫₀^∞ z^σ f(z) dz` for `σ > -1`, with the incomplete-gamma tail
    /// `A Γ(σ+1, x_max)` and the near-zero extrapolation below `x_min`.
    pub fn moment(&self, sigma: f64) -> Result<f64> {
        if !(sigma > -1.0) {
            return Err(Error::domain(format!("moment order {sigma} must exceed -1")));
        }
        let g = &self.grid;
        let cache = self.quad_cache();
        // Below x_min a constant μ is integrated in closed form, which stays
        // accurate as σ approaches -1.
        let skip = if cache.constant_below { cache.origin_nodes } else { 0 };
        let mut total: f64 = cache
            .z
            .iter()
            .zip(&cache.w)
            .zip(&cache.f)
            .skip(skip)
            .map(|((&z, &w), &f)| w * z.powf(sigma) * f)
            .sum();
        if cache.constant_below {
            total += self.mu[0] * gamma_li(sigma + 1.0, g.x_min);
        }
        if self.tail_amp > 0.0 {
            total += self.tail_amp * gamma_ui(sigma + 1.0, g.x_max);
        }
        Ok(total)
    }

    /// `∫₀^∞ x f(x) dx`.
    pub fn mass(&self) -> f64 {
        self.moment(1.0).expect("first moment is always defined")
    }

    /// Rescaling `g(x) = a f(a x)`.
    pub fn rescale(&self, a: f64) -> Result<Profile> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::domain(format!("rescaling factor must be positive, got {a}")));
        }
        if a == 1.0 {
            return Ok(self.clone());
        }
        let g = self.grid.clone();
        let values: Vec<f64> = g.nodes().iter().map(|&x| a * self.f_at(a * x)).collect();
        let out = Self::from_values_shared(g, values)?;
        Ok(out.with_near_zero(self.near_zero.rescaled(a)))
    }

    /// Least-squares fit of `log f = b - a x` over `[0.6 x_max, x_max]`,
    /// returning `(a, b)`.
    pub fn fit_decay(&self) -> Result<(f64, f64)> {
        let g = &self.grid;
        let lo = 0.6 * g.x_max;
        let idx: Vec<usize> = (0..g.n).filter(|&i| g.nodes()[i] >= lo).collect();
        if idx.len() < 2 {
            return Err(Error::Fit("decay window holds fewer than two nodes".into()));
        }
        if idx.iter().any(|&i| !(self.values[i] > 0.0)) {
            return Err(Error::Fit("non-positive values in the decay window".into()));
        }
        if idx.windows(2).any(|w| self.values[w[1]] >= self.values[w[0]]) {
            return Err(Error::Fit("tail is not monotonically decreasing".into()));
        }
        let n = idx.len() as f64;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for &i in &idx {
            let x = g.nodes()[i];
            let y = self.values[i].ln();
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = (sy - slope * sx) / n;
        if !(slope < 0.0) {
            return Err(Error::Fit(format!("fitted decay rate {} is not positive", -slope)));
        }
        Ok((-slope, intercept))
    }

    /// Rescales so the fitted tail decay rate is 1 within 1e-3; returns the
    /// profile and the factor `a` used in `g(x) = a f(a x)`. Rescaling moves
    /// the fit window across `f`, so the factor is refined by fixed-point
    /// iteration, always rescaling the original profile.
    pub fn normalize_decay(&self) -> Result<(Profile, f64)> {
        let (rate, _) = self.fit_decay()?;
        let mut a = 1.0 / rate;
        let mut refit = f64::NAN;
        for _ in 0..50 {
            let out = self.rescale(a)?;
            refit = out.fit_decay()?.0;
            if (refit - 1.0).abs() <= 1e-3 {
                return Ok((out, a));
            }
            a /= refit;
        }
        Err(Error::Fit(format!(
            "refit decay rate {refit} misses 1 by more than 1e-3"
        )))
    }

    /// Rescales so the mass equals `target`.
    pub fn normalize_mass(&self, target: f64) -> Result<(Profile, f64)> {
        let mass = self.mass();
        if !(mass > 0.0) {
            return Err(Error::Fit("profile has zero mass".into()));
        }
        let a = mass / target;
        Ok((self.rescale(a)?, a))
    }

    pub fn meta(&self) -> ProfileMeta {
        ProfileMeta {
            grid: (*self.grid).clone(),
            tail_amp: self.tail_amp,
            decay_rate: self.decay_rate,
            near_zero_law: self.near_zero.clone(),
            mass: self.mass(),
        }
    }

    /// CSV with header `x,f,mu` and 17 significant digits per value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,f,mu\n");
        for ((x, f), m) in self.grid.nodes().iter().zip(&self.values).zip(&self.mu) {
            writeln!(out, "{x:.16e},{f:.16e},{m:.16e}").expect("writing to a String");
        }
        out
    }

    /// Reads a profile written by [`Profile::to_csv`]. The nodes must form a
    /// log-uniform grid; the `mu` column is optional.
    pub fn from_csv(text: &str) -> Result<Profile> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::param("csv", e.to_string()))?
            .clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (ix, jf) = match (col("x"), col("f")) {
            (Some(i), Some(j)) => (i, j),
            _ => return Err(Error::param("csv", "header must contain columns x and f")),
        };
        let mut xs = Vec::new();
        let mut fs = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::param("csv", e.to_string()))?;
            let parse = |j: usize| -> Result<f64> {
                record
                    .get(j)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| Error::param("csv", format!("unparsable row {record:?}")))
            };
            xs.push(parse(ix)?);
            fs.push(parse(jf)?);
        }
        if xs.len() < 4 {
            return Err(Error::param("csv", "need at least four rows"));
        }
        let grid = Grid::new(xs[0], xs[xs.len() - 1], xs.len())?;
        for (a, b) in grid.nodes().iter().zip(&xs) {
            if (a - b).abs() > 1e-9 * a {
                return Err(Error::param("csv", "nodes are not log-uniform"));
            }
        }
        Profile::from_values(grid, fs)
    }
}

/// `μ = f e^x` view of a profile.
#[derive(Debug, Clone, Copy)]
pub struct MuView<'a> {
    profile: &'a Profile,
}

impl MuView<'_> {
    pub fn profile(&self) -> &Profile {
        self.profile
    }
}

impl MuEval for MuView<'_> {
    fn mu(&self, x: f64) -> f64 {
        self.profile.mu_at(x)
    }
}

impl MuEval for Profile {
    fn mu(&self, x: f64) -> f64 {
        self.mu_at(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_profile(c: f64, a: f64) -> Profile {
        Profile::from_fn(Grid::default(), |x| c * (-a * x).exp()).unwrap()
    }

    #[test]
    fn grid_invariants() {
        let g = Grid::default();
        assert_eq!(g.nodes()[0], 1e-4);
        assert_eq!(g.nodes()[599], 40.0);
        let r0 = g.nodes()[1] / g.nodes()[0];
        assert!(g.nodes().windows(2).all(|w| (w[1] / w[0] - r0).abs() < 1e-12));
        assert!(Grid::new(2.0, 40.0, 10).is_err());
        assert!(Grid::new(1e-3, 0.5, 10).is_err());
    }

    #[test]
    fn mass_examples() {
        assert!((exp_profile(1.0, 1.0).mass() - 1.0).abs() < 1e-8);
        assert!((exp_profile(2.0, 2.0).mass() - 0.5).abs() < 1e-8);
        assert_eq!(exp_profile(0.0, 1.0).mass(), 0.0);
    }

    #[test]
    fn moment_examples() {
        let p = exp_profile(1.0, 1.0);
        assert!((p.moment(0.0).unwrap() - 1.0).abs() < 1e-10);
        let g54 = statrs::function::gamma::gamma(1.25);
        assert!((p.moment(0.25).unwrap() - g54).abs() < 1e-10);
        assert!((p.moment(1.0).unwrap() - p.mass()).abs() < 1e-15);
        assert!(matches!(p.moment(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn interpolation_reproduces_exponential() {
        let p = exp_profile(1.0, 1.0);
        for &x in &[1.3e-4f64, 0.0123, 0.77, 3.3, 17.2, 39.9] {
            assert!((p.f_at(x) / (-(x as f64)).exp() - 1.0).abs() < 1e-12);
        }
        let grid = Grid::new(1e-4, 40.0, 400).unwrap();
        let q = Profile::from_fn(grid, |x| (-2.0 * x).exp() * (1.0 + x).recip()).unwrap();
        for &x in &[2.1e-4f64, 0.051, 1.77, 12.3, 33.3] {
            let exact = (-2.0 * x).exp() / (1.0 + x);
            assert!((q.f_at(x) / exact - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn rescale_examples() {
        let p = exp_profile(1.0, 1.0);
        let same = p.rescale(1.0).unwrap();
        assert_eq!(same.values(), p.values());
        let g = p.rescale(2.0).unwrap();
        for (&x, &v) in g.grid().nodes().iter().zip(g.values()) {
            assert!((v - 2.0 * (-2.0 * x).exp()).abs() <= 1e-12 * 2.0 * (-2.0 * x).exp());
        }
        assert!((g.mass() - 0.5).abs() < 1e-8);
    }

    #[test]
    fn normalize_decay_examples() {
        let (_, a) = exp_profile(1.0, 1.0).normalize_decay().unwrap();
        assert!((a - 1.0).abs() < 1e-6);
        let (q, a) = exp_profile(3.0, 3.0).normalize_decay().unwrap();
        assert!((a - 1.0 / 3.0).abs() < 1e-3);
        for (&x, &v) in q.grid().nodes().iter().zip(q.values()).step_by(37) {
            if x < 3.0 * q.grid().x_min {
                continue;
            }
            assert!((v / (-x).exp() - 1.0).abs() < 1e-6);
        }
        let r = Profile::from_fn(Grid::default(), |x| (-2.0 * x).exp() / (1.0 + x)).unwrap();
        let (_, a) = r.normalize_decay().unwrap();
        assert!((a - 0.5).abs() < 0.02, "{a}");
        let bad = Profile::from_fn(Grid::default(), |x| (0.1 * x).exp()).unwrap();
        assert!(matches!(bad.normalize_decay(), Err(Error::Fit(_))));
    }

    #[test]
    fn mu_view_examples() {
        let p = exp_profile(1.0, 1.0);
        assert!(p.mu_values().iter().all(|&m| (m - 1.0).abs() < 1e-15));
        let q = exp_profile(2.0, 2.0);
        let view = q.mu_view();
        for &x in q.grid().nodes().iter().step_by(50) {
            assert!((view.mu(x) - 2.0 * (-x).exp()).abs() < 1e-14 * 2.0);
            assert!((view.mu(x) * (-x).exp() - q.f_at(x)).abs() <= 1e-15 * q.f_at(x));
        }
    }

    #[test]
    fn csv_round_trip() {
        let p = exp_profile(2.0, 2.0);
        let text = p.to_csv();
        assert!(text.starts_with("x,f,mu\n"));
        let q = Profile::from_csv(&text).unwrap();
        assert_eq!(q.values(), p.values());
    }

    #[test]
    fn layer_law_suppresses_origin() {
        let spec = KernelSpec::power(0.25, 0.1).unwrap();
        let p = exp_profile(1.0, 1.0).with_kernel_layer(&spec);
        let law = p.near_zero();
        assert!(!law.is_constant());
        assert!(p.f_at(1e-8) < p.f_at(1e-4));
        let m = statrs::function::gamma::gamma(1.25);
        let c = law.terms.iter().find(|t| t.1 == -0.25).unwrap().0;
        assert!((c - 0.1 * m).abs() < 1e-3);
    }
}
