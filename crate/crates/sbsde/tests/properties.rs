//! Invariants checked over random inputs.

use proptest::prelude::*;
use sbsde::control::value_function;
use sbsde::densities::{constrained_density, exit_cdf, exit_density, Truncation};
use sbsde::feynman_kac::{mc_exit_probability, McConfig};
use sbsde::model::{holder_conjugate, mollifier, psi_mn, BoundaryIndices, ProblemParams, Regime};
use sbsde::pde::{pde_residual, solve_linear_v0, solve_umn, Field, Grid};
use sbsde::stats::Moments;

const TR: Truncation<f64> = Truncation { tol: 1e-13 };

fn params(q: f64, l: f64, t: f64) -> ProblemParams<f64> {
    ProblemParams::new(q, l, t, Regime::OutsideBall).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conjugate_exponents_are_dual(q in 1.01f64..20.0) {
        let p = holder_conjugate(q).unwrap();
        prop_assert!(p > 1.0);
        prop_assert!((1.0 / p + 1.0 / q - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mollifier_is_a_decreasing_step(a in -0.5f64..1.5, b in -0.5f64..1.5) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (ml, mh) = (mollifier(lo), mollifier(hi));
        prop_assert!((0.0..=1.0).contains(&ml) && (0.0..=1.0).contains(&mh));
        prop_assert!(mh <= ml + 1e-14);
    }

    #[test]
    fn psi_grows_with_level_index(frac in 0.0f64..=1.0, t in 0.0f64..=1.0, n in 1u64..200) {
        let p = params(3.0, 2.0, 1.0);
        let x = frac * 2.0;
        let lo = psi_mn(x, t, BoundaryIndices::new(10, n), &p).unwrap();
        let hi = psi_mn(x, t, BoundaryIndices::new(10, n + 1), &p).unwrap();
        prop_assert!(lo >= 0.0);
        prop_assert!(lo <= hi);
    }

    #[test]
    fn exit_cdf_is_a_symmetric_distribution(
        frac in 0.01f64..0.99, s1 in 0.001f64..3.0, s2 in 0.001f64..3.0, l in 0.5f64..4.0,
    ) {
        let p = params(3.0, l, 3.0);
        let x = frac * l;
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        let a = exit_cdf(x, 0.0, lo, &p, TR).unwrap().value;
        let b = exit_cdf(x, 0.0, hi, &p, TR).unwrap().value;
        prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        prop_assert!(a <= b + 1e-12);
        let mirror = exit_cdf(l - x, 0.0, lo, &p, TR).unwrap().value;
        prop_assert!((a - mirror).abs() < 1e-11);
        prop_assert!(exit_density(x, 0.0, lo, &p, TR).unwrap().value >= 0.0);
    }

    #[test]
    fn constrained_density_is_symmetric_in_endpoints(
        x in 0.01f64..0.99, a in 0.01f64..0.99, g in 0.01f64..2.0,
    ) {
        let p = params(3.0, 1.0, 2.0);
        let f = constrained_density(x, 0.0, g, a, &p, TR).unwrap().value;
        let r = constrained_density(a, 0.0, g, x, &p, TR).unwrap().value;
        prop_assert!(f >= 0.0);
        prop_assert!((f - r).abs() <= 1e-10 * f.abs().max(1.0));
    }

    #[test]
    fn value_function_is_homogeneous(c in -3.0f64..3.0, y in 0.01f64..10.0, lam in 0.1f64..5.0) {
        let p = params(3.0, 1.0, 1.0);
        let base = value_function(c, y, &p).unwrap();
        let scaled = value_function(lam * c, y, &p).unwrap();
        prop_assert!(base >= 0.0);
        prop_assert!((scaled - lam.powf(p.p()) * base).abs() <= 1e-12 * scaled.max(1.0));
        let doubled = value_function(c, lam * y, &p).unwrap();
        prop_assert!((doubled - lam * base).abs() <= 1e-12 * doubled.max(1.0));
    }

    #[test]
    fn moments_merge_matches_sequential(xs in prop::collection::vec(-10.0f64..10.0, 1..60), cut in 0usize..60) {
        let cut = cut.min(xs.len());
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let (mut a, mut b) = (Moments::default(), Moments::default());
        xs[..cut].iter().for_each(|&x| a.push(x));
        xs[cut..].iter().for_each(|&x| b.push(x));
        let m = a.merge(&b);
        prop_assert_eq!(m.n, all.n);
        prop_assert!((m.mean - all.mean).abs() < 1e-12);
        prop_assert!((m.m2 - all.m2).abs() < 1e-9 * all.m2.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn umn_is_symmetric_bounded_and_ordered(nx in 5usize..30, extra in 0usize..40, n in 1u64..50) {
        let p = params(3.0, 2.0, 1.0);
        // Crank-Nicolson preserves order only when dt <= 2 dx².
        let dx = 2.0 / (nx + 1) as f64;
        let nt = (1.0 / (2.0 * dx * dx)).ceil() as usize + extra;
        let g = Grid::new(p, nx, nt).unwrap();
        let lo = solve_umn(20, n, &g).unwrap();
        let hi = solve_umn(20, 2 * n, &g).unwrap();
        let gamma = p.gamma(n);
        for k in 0..=lo.k_end() {
            for i in 0..=nx + 1 {
                let v = lo.at(i, k);
                prop_assert!(v >= 0.0 && v <= gamma * (1.0 + 1e-12));
                prop_assert!((v - lo.at(nx + 1 - i, k)).abs() <= 1e-12 * gamma);
                prop_assert!(v <= hi.at(i, k) * (1.0 + 1e-12));
            }
        }
        prop_assert!(pde_residual(&lo) < 1e-8 * gamma.max(1.0));
    }

    #[test]
    fn field_csv_round_trips(nx in 3usize..12, nt in 3usize..12) {
        let g = Grid::new(params(2.5, 1.5, 0.7), nx, nt).unwrap();
        let f = solve_linear_v0(&g).unwrap();
        let back = Field::<f64>::from_csv(&f.to_csv()).unwrap();
        prop_assert_eq!(back.values(), f.values());
        prop_assert_eq!(back.tag(), f.tag());
        prop_assert!(pde_residual(&f) < 1e-12);
    }

    #[test]
    fn monte_carlo_is_reproducible(seed in any::<u64>(), n in 1usize..300) {
        let p = params(3.0, 1.0, 1.0);
        let cfg = McConfig::new(n, 0.05, seed);
        let a = mc_exit_probability(0.5, 0.0, 0.5, &p, &cfg).unwrap();
        let b = mc_exit_probability(0.5, 0.0, 0.5, &p, &cfg).unwrap();
        prop_assert_eq!(a, b);
    }
}
