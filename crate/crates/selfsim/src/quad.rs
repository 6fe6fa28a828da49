//! Quadrature building blocks: cached Gauss rules, composite panel sets with
//! geometric grading toward singular endpoints, and an adaptive bisection
//! integrator.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::laguerre::GaussLaguerre;
use gauss_quad::legendre::GaussLegendre;
use gauss_quad::FiniteAboveNegOneF64;

use crate::error::{Error, Result};

/// Nodes and weights of a one-dimensional reference rule.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

const MAX_CACHED: usize = 64;

/// Gauss-Legendre rule with `n` points on `[-1, 1]`, cached per size.
pub fn legendre(n: usize) -> &'static Rule {
    static CACHE: [OnceLock<Rule>; MAX_CACHED + 1] = [const { OnceLock::new() }; MAX_CACHED + 1];
    assert!((1..=MAX_CACHED).contains(&n), "unsupported Gauss-Legendre size {n}");
    CACHE[n].get_or_init(|| {
        let rule = GaussLegendre::new(NonZeroUsize::new(n).expect("n >= 1"));
        let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Rule {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    })
}

/// Gauss-Laguerre rule with `n` points for `∫₀^∞ g(s) e^{-s} ds`, cached per size.
pub fn laguerre(n: usize) -> &'static Rule {
    static CACHE: [OnceLock<Rule>; MAX_CACHED + 1] = [const { OnceLock::new() }; MAX_CACHED + 1];
    assert!((1..=MAX_CACHED).contains(&n), "unsupported Gauss-Laguerre size {n}");
    CACHE[n].get_or_init(|| {
        let alpha = FiniteAboveNegOneF64::new(0.0).expect("0 > -1");
        let rule = GaussLaguerre::new(NonZeroUsize::new(n).expect("n >= 1"), alpha);
        let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Rule {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    })
}

/// `∫₀^∞ g(s) e^{-s} ds` by a 40-point Gauss-Laguerre rule.
pub fn laguerre_integrate(g: impl Fn(f64) -> f64) -> f64 {
    let rule = laguerre(40);
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&s, &w)| w * g(s))
        .sum()
}

/// Flat list of quadrature nodes and weights for a fixed integration domain.
#[derive(Debug, Clone, Default)]
pub struct NodeSet {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

impl NodeSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the mapped `rule` on the panel `[a, b]`.
    pub fn push_panel(&mut self, a: f64, b: f64, rule: &Rule) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            self.x.push(mid + half * t);
            self.w.push(half * w);
        }
    }

    /// Appends one panel per consecutive pair of `edges`.
    pub fn push_edges(&mut self, edges: &[f64], rule: &Rule) {
        for pair in edges.windows(2) {
            if pair[1] > pair[0] {
                self.push_panel(pair[0], pair[1], rule);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.x.iter().zip(&self.w).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Panel edges on `[a, b]` refined geometrically toward `a`: the innermost
/// panel is `[a, a + (b-a) ratio^levels]`, each following one grows by `1/ratio`.
pub fn graded_edges(a: f64, b: f64, ratio: f64, levels: usize) -> Vec<f64> {
    let mut edges = Vec::with_capacity(levels + 2);
    edges.push(a);
    for k in (1..=levels).rev() {
        edges.push(a + (b - a) * ratio.powi(k as i32));
    }
    edges.push(b);
    edges
}

/// Same as [`graded_edges`] but refined toward `b`.
pub fn graded_edges_toward_end(a: f64, b: f64, ratio: f64, levels: usize) -> Vec<f64> {
    let mut edges: Vec<f64> = graded_edges(0.0, 1.0, ratio, levels)
        .into_iter()
        .map(|t| b - (b - a) * t)
        .collect();
    edges.reverse();
    edges
}

/// Nodes on `[0, 1]` graded dyadically toward both endpoints, with the
/// interior break at 1/2. Used for the scale-free inner integrals `∫₀^x g(y) dy`
/// after the substitution `y = x q`.
pub fn unit_graded_both(levels: usize, rule: &Rule) -> NodeSet {
    let mut set = NodeSet::new();
    set.push_edges(&graded_edges(0.0, 0.5, 0.5, levels), rule);
    set.push_edges(&graded_edges_toward_end(0.5, 1.0, 0.5, levels), rule);
    set
}

/// Adaptive Gauss-Legendre integration by bisection. Each panel is accepted
/// once the 10-point value on the panel and the sum over its two halves agree
/// to `tol` (absolute, scaled by the running magnitude of the integral).
pub fn adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let rule = legendre(10);
    let panel = |lo: f64, hi: f64| {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        rule.nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&t, &w)| half * w * f(mid + half * t))
            .sum::<f64>()
    };
    let mut total: f64 = 0.0;
    let mut err_total = 0.0;
    let mut stack = vec![(a, b, panel(a, b), 0usize)];
    let scale = panel(a, b).abs().max(f64::MIN_POSITIVE);
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = panel(lo, mid);
        let right = panel(mid, hi);
        let diff = (left + right - whole).abs();
        let local_tol = tol * scale.max(total.abs()) * ((hi - lo) / (b - a)).abs().sqrt();
        if diff <= local_tol || depth >= 48 {
            if depth >= 48 && diff > local_tol {
                err_total += diff;
            }
            total += left + right;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    if !total.is_finite() {
        return Err(Error::numeric("adaptive quadrature produced a non-finite value", total));
    }
    if err_total > tol * total.abs().max(1e-300) * 10.0 {
        return Err(Error::numeric(
            format!("adaptive quadrature did not converge (error estimate {err_total:e})"),
            total,
        ));
    }
    Ok(total)
}

/// `∫_a^∞ f` for a function decaying at least exponentially beyond `a`:
/// geometric panels toward `a` over `[a, a + span]`, where `span` covers the
/// requested number of e-foldings of the slowest decay `rate`.
pub fn semi_infinite_nodes(a: f64, rate: f64, efolds: f64, rule: &Rule) -> NodeSet {
    let span = efolds / rate;
    let mut set = NodeSet::new();
    let mut edges = graded_edges(a, a + 1.0 / rate, 0.5, 30);
    let n_uniform = (efolds).ceil() as usize;
    let step = (span - 1.0 / rate) / n_uniform as f64;
    for k in 1..=n_uniform {
        edges.push(a + 1.0 / rate + step * k as f64);
    }
    set.push_edges(&edges, rule);
    set
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = legendre(8);
        let mut set = NodeSet::new();
        set.push_panel(0.0, 2.0, rule);
        let value = set.integrate(|x| x.powi(15));
        assert!((value - 2f64.powi(16) / 16.0).abs() < 1e-9);
    }

    #[test]
    fn laguerre_reproduces_factorials() {
        let value = laguerre_integrate(|s| s.powi(5));
        assert!((value - 120.0).abs() < 1e-9);
    }

    #[test]
    fn graded_panels_resolve_endpoint_singularity() {
        let mut set = NodeSet::new();
        set.push_edges(&graded_edges(0.0, 1.0, 0.5, 60), legendre(12));
        let value = set.integrate(|x| x.powf(-0.5));
        assert!((value - 2.0).abs() < 1e-9, "{value}");
    }

    #[test]
    fn graded_toward_end_mirrors() {
        let edges = graded_edges_toward_end(1.0, 2.0, 0.5, 3);
        assert_eq!(edges.first(), Some(&1.0));
        assert_eq!(edges.last(), Some(&2.0));
        assert!(edges.windows(2).all(|w| w[1] > w[0]));
        assert!((edges[edges.len() - 2] - 1.875).abs() < 1e-15);
    }

    #[test]
    fn unit_graded_integrates_beta_type_integrand() {
        let set = unit_graded_both(34, legendre(12));
        // ∫₀¹ q^{-1/4} (1-q)^{1/4} dq = B(3/4, 5/4)
        let value = set.integrate(|q| q.powf(-0.25) * (1.0 - q).powf(0.25));
        let exact = statrs::function::beta::beta(0.75, 1.25);
        assert!((value - exact).abs() < 1e-10, "{value} vs {exact}");
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let value = adaptive(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((value - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn semi_infinite_covers_exponential() {
        let set = semi_infinite_nodes(2.0, 1.0, 45.0, legendre(12));
        let value = set.integrate(|x| (-x).exp());
        assert!((value - (-2.0f64).exp()).abs() < 1e-15);
    }
}
