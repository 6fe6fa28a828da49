//! Property tests of structural identities and inequalities.

use proptest::prelude::*;

use selfsim::bilinear;
use selfsim::kernels::{self, KernelSpec};
use selfsim::laplace::{self, LaplaceEval};
use selfsim::linop;
use selfsim::profiles::{Grid, MuBar, Profile};

fn mixture() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, 0.5f64..3.0), 1..5)
}

fn sample_profile() -> Profile {
    Profile::from_fn(Grid::default(), |x| (-x).exp() * (1.0 + x)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn rescaling_composes(a in 0.5f64..2.0, b in 0.5f64..2.0) {
        let f = sample_profile();
        let two = f.rescale(a).unwrap().rescale(b).unwrap();
        let one = f.rescale(a * b).unwrap();
        for (x, (u, v)) in f.grid().nodes().iter().zip(two.values().iter().zip(one.values())) {
            if (1e-3..10.0).contains(x) {
                prop_assert!((u - v).abs() <= 1e-7 * v.abs(), "x={} {} vs {}", x, u, v);
            }
        }
    }

    #[test]
    fn rescaling_divides_mass(a in 0.5f64..2.0) {
        // ∫ x·a f(a x) dx = (1/a) ∫ y f(y) dy; the exact mass of e^{-x}(1+x) is 3.
        let g = sample_profile().rescale(a).unwrap();
        prop_assert!((g.mass() - 3.0 / a).abs() < 1e-6 * 3.0 / a, "{} vs {}", g.mass(), 3.0 / a);
    }

    #[test]
    fn landau_and_cutoff(terms in mixture(), n in 1.0f64..6.0, chi in 0.05f64..0.95) {
        let l = LaplaceEval::exp_mixture(&terms);
        let s: Vec<f64> = (0..3).map(|k| laplace::seminorm(&l, k, chi).unwrap().value).collect();
        prop_assert!(s[1] <= 2.0 * (s[0] * s[2]).sqrt() * (1.0 + 1e-9) + 1e-300);
        let damped: Vec<(f64, f64)> = terms.iter().map(|&(c, a)| (c, a + n)).collect();
        let d = LaplaceEval::exp_mixture(&damped);
        for k in 0..3 {
            let v = laplace::seminorm(&d, k, chi).unwrap().value;
            prop_assert!(v <= s[k] * (1.0 + 1e-9) + 1e-300, "k={} {} > {}", k, v, s[k]);
        }
    }

    #[test]
    fn lambda_sandwich(log_s in -6.0f64..6.0, chi in 0.0f64..1.0) {
        let s = 10f64.powf(log_s);
        let lam = laplace::lambda_weight(s, chi);
        let mid = (1.0 + s).powf(1.0 - chi) / s;
        prop_assert!(lam <= mid * (1.0 + 1e-14));
        prop_assert!(mid <= 2f64.powf(1.0 - chi) * lam * (1.0 + 1e-14));
    }

    #[test]
    fn gamma_density_symmetry_and_homogeneity(
        alpha in 0.01f64..0.49,
        xi in 1e-3f64..1e3,
        eta in 1e-3f64..1e3,
        t in 1e-2f64..1e2,
    ) {
        let repr = kernels::gamma_closed_form(alpha).unwrap();
        let g = repr.regular(xi, eta);
        prop_assert!(g > 0.0);
        prop_assert!((repr.regular(eta, xi) - g).abs() <= 1e-12 * g);
        prop_assert!((t * repr.regular(t * xi, t * eta) - g).abs() <= 1e-12 * g);
    }

    #[test]
    fn lhat_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, p in 0.05f64..50.0) {
        let g1 = LaplaceEval::exp_mixture(&[(1.0, 1.0)]);
        let g2 = LaplaceEval::exp_mixture(&[(1.0, 0.7), (-0.3, 2.5)]);
        let combo = LaplaceEval::combine(&[(a, g1.clone()), (b, g2.clone())]);
        let lhs = linop::apply_lhat(&combo, p).unwrap();
        let rhs = a * linop::apply_lhat(&g1, p).unwrap() + b * linop::apply_lhat(&g2, p).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn constant_kernel_fixes_mu_bar(x in 1e-3f64..30.0) {
        // (1/x²) ∫₀^x ∫_{x-y}^∞ 2y e^{x-y-z} dz dy = (1/x²) ∫₀^x 2y dy = 1.
        let v = bilinear::apply_bk(&KernelSpec::constant(), &MuBar, &MuBar, x).unwrap();
        prop_assert!((v - 1.0).abs() < 1e-10, "B(1,1)({}) = {}", x, v);
    }

    #[test]
    fn profile_csv_round_trip(scale in 0.1f64..10.0, rate in 0.2f64..3.0) {
        let grid = Grid::new(1e-3, 20.0, 64).unwrap();
        let f = Profile::from_fn(grid, |x| scale * (-rate * x).exp()).unwrap();
        let back = Profile::from_csv(&f.to_csv()).unwrap();
        prop_assert_eq!(back.values(), f.values());
        prop_assert_eq!(back.grid(), f.grid());
    }
}
