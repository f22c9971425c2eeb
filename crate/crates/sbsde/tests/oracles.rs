//! Checks against frozen reference values and independent computations.
//!
//! Frozen constants were produced by a 30-digit evaluation of the
//! eigenfunction series (direct partial sums) and of the image series (with `s = T − u²` in the
//! `v₀` integral), independently of the library code.

use approx::assert_relative_eq;
use sbsde::bsde::{exit_fraction, minimality_probe};
use sbsde::control::{conditional_probability_bound, value_function};
use sbsde::densities::{constrained_density, exit_cdf, exit_density, v0, QuadratureSpec, Truncation};
use sbsde::feynman_kac::{mc_exit_probability, mc_v0, McConfig};
use sbsde::model::{ProblemParams, Regime};
use sbsde::pde::{pde_residual, solve_linear_v0, solve_u, solve_umn, Grid, Schedule, SweepConfig};

fn outside(l: f64) -> ProblemParams<f64> {
    ProblemParams::new(3.0, l, 1.0, Regime::OutsideBall).unwrap()
}

const TR: Truncation<f64> = Truncation { tol: 1e-14 };

#[test]
fn exit_cdf_matches_frozen_series() {
    let cases = [
        (1.5, 1.0, 3.0, 0.267_215_214_383_061),
        (0.5, 1.0, 3.0, 0.629_029_112_046_650_1),
        (0.5, 0.1, 1.0, 0.227_688_393_141_409_42),
        (3.5, 1.0, 4.0, 0.617_533_540_263_731_6),
    ];
    for (x, s, l, expect) in cases {
        let p = ProblemParams::new(3.0, l, 2.0, Regime::OutsideBall).unwrap();
        let got = exit_cdf(x, 0.0, s, &p, TR).unwrap().value;
        assert_relative_eq!(got, expect, max_relative = 1e-12);
    }
}

#[test]
fn exit_density_matches_frozen_series() {
    let p = ProblemParams::new(3.0, 4.0, 3.0, Regime::OutsideBall).unwrap();
    // The plotted example: start 3.5 at time 2 in an interval of length 4.
    let got = exit_density(3.5, 2.0, 3.0, &p, TR).unwrap().value;
    assert_relative_eq!(got, 0.179_015_125_978_003_8, max_relative = 1e-12);
    let p1 = outside(1.0);
    let got = exit_density(0.5, 0.0, 0.05, &p1, TR).unwrap().value;
    assert_relative_eq!(got, 2.928_996_494_273_962, max_relative = 1e-12);
}

#[test]
fn constrained_density_matches_frozen_series() {
    let p = ProblemParams::new(3.0, 3.0, 1.0, Regime::OutsideBall).unwrap();
    let got = constrained_density(1.0, 0.0, 0.3, 2.0, &p, TR).unwrap().value;
    assert_relative_eq!(got, 0.137_570_050_020_740_44, max_relative = 1e-11);
    let p1 = ProblemParams::new(3.0, 1.0, 3.0, Regime::OutsideBall).unwrap();
    let got = constrained_density(0.5, 0.0, 2.0, 0.25, &p1, TR).unwrap().value;
    assert_relative_eq!(got, 7.314_763_141_858_032e-5, max_relative = 1e-9);
}

#[test]
fn density_is_derivative_of_cdf() {
    let p = outside(3.0);
    for &s in &[0.05, 0.3, 0.9] {
        let h = 1e-5;
        let num = (exit_cdf(1.0, 0.0, s + h, &p, TR).unwrap().value - exit_cdf(1.0, 0.0, s - h, &p, TR).unwrap().value)
            / (2.0 * h);
        let f = exit_density(1.0, 0.0, s, &p, TR).unwrap().value;
        assert!((num - f).abs() < 1e-7 * f.max(1.0), "s={s}: {num} vs {f}");
    }
}

#[test]
fn v0_matches_frozen_quadrature() {
    let p = outside(3.0);
    let quad = QuadratureSpec::for_params(&p);
    let cases = [
        (1.5, 0.0, 0.459_071_261_509_976_05),
        (0.5, 0.5, 0.780_726_452_090_167_6),
        (1.5, 0.5, 0.210_798_445_913_272_56),
        (2.5, 0.9, 0.640_644_201_659_213_2),
    ];
    for (x, t, expect) in cases {
        let got = v0(x, t, &p, quad, TR).unwrap();
        assert!((got - expect).abs() < 1e-7, "({x},{t}): {got} vs {expect}");
    }
}

#[test]
fn v0_vanishes_at_terminal_time() {
    let p = outside(3.0);
    let quad = QuadratureSpec::for_params(&p);
    assert_eq!(v0(1.5, 1.0, &p, quad, TR).unwrap(), 0.0);
    let near = v0(1.5, 0.99, &p, quad, TR).unwrap();
    assert!(near < 1e-10, "{near}");
}

#[test]
fn linear_solve_matches_quadrature_on_coarse_grid() {
    let p = outside(3.0);
    let g = Grid::from_steps(p, 0.1, 0.01).unwrap();
    let f = solve_linear_v0(&g).unwrap();
    let gap = (f.at(f.nearest_i(1.5), f.nearest_k(0.5)) - 0.210_798_445_913_272_56).abs();
    assert!(gap < 5e-3, "{gap}");
    assert!(f.row(g.nt())[1..=g.nx()].iter().all(|&v| v == 0.0));
    for k in 0..g.nt() {
        assert_eq!(f.at(0, k), p.y(g.t(k)).unwrap());
    }
}

#[test]
fn umn_bounded_by_gamma_and_small_residual() {
    let p = outside(3.0);
    let g = Grid::from_steps(p, 0.1, 0.01).unwrap();
    for n in [10, 1000] {
        let f = solve_umn(100, n, &g).unwrap();
        let gamma = p.gamma(n);
        assert!(f.values().iter().all(|&v| v >= 0.0 && v <= gamma * (1.0 + 1e-12)));
        assert!(pde_residual(&f) < 1e-8, "{}", pde_residual(&f));
    }
}

#[test]
fn mc_v0_matches_quadrature() {
    let p = outside(3.0);
    let est = mc_v0(1.5, 0.0, &p, &McConfig::new(40_000, 2e-3, 17)).unwrap();
    assert!((est.mean - 0.459_071_261_509_976_05).abs() < 3.0 * est.std_error + 2e-3, "{est:?}");
    let late = mc_v0(1.5, 0.98, &p, &McConfig::new(4_000, 1e-3, 17)).unwrap();
    assert_eq!(late.mean, 0.0);
}

#[test]
fn bridge_correction_removes_discretization_bias() {
    let p = outside(3.0);
    let exact = 0.267_215_214_383_061;
    let mut naive_err = Vec::new();
    for dt in [0.04, 0.01] {
        let mut cfg = McConfig::new(100_000, dt, 5);
        let bridged = mc_exit_probability(1.5, 0.0, 1.0, &p, &cfg).unwrap();
        cfg.bridge_correction = false;
        let naive = mc_exit_probability(1.5, 0.0, 1.0, &p, &cfg).unwrap();
        assert!(bridged.mean > naive.mean);
        assert!((bridged.mean - exact).abs() < 3.0 * bridged.std_error);
        naive_err.push(exact - naive.mean);
    }
    // Naive crossing detection misses O(√dt) of the mass.
    let ratio = naive_err[0] / naive_err[1];
    assert!(ratio > 1.5 && ratio < 2.6, "{ratio}");
}

#[test]
fn standard_error_scales_with_path_count() {
    let p = outside(3.0);
    let a = mc_exit_probability(1.5, 0.0, 1.0, &p, &McConfig::new(10_000, 0.02, 9)).unwrap();
    let b = mc_exit_probability(1.5, 0.0, 1.0, &p, &McConfig::new(40_000, 0.02, 9)).unwrap();
    let r = a.std_error / b.std_error;
    assert!((r - 2.0).abs() < 0.4, "{r}");
}

#[test]
fn exit_fraction_of_paths_matches_cdf() {
    let p = outside(3.0);
    let est = exit_fraction(1.5, &p, &McConfig::new(50_000, 0.01, 3)).unwrap();
    assert!((est.mean - 0.267_215_214_383_061).abs() < 3.0 * est.std_error);
}

#[test]
fn ladder_approaches_limit() {
    let p = outside(3.0);
    let g = Grid::from_steps(p, 0.1, 0.01).unwrap();
    let (u, _) = solve_u(&g, &Schedule::default_for(&p), SweepConfig::default()).unwrap();
    let rows = minimality_probe(1.5, 0.0, &[16, 256, 4096, 16384], &g, &u, 0.1).unwrap();
    assert!(rows.iter().all(|r| r.order_violations == 0));
    assert!(rows.windows(2).all(|w| w[1].gap_to_limit <= w[0].gap_to_limit));
    assert!(rows.last().unwrap().gap_to_limit < 1e-4, "{:?}", rows.last());
}

#[test]
fn control_examples() {
    let p = outside(3.0);
    assert_eq!(value_function(0.0, 0.7, &p).unwrap(), 0.0);
    assert_eq!(value_function(1.0, 0.7, &p).unwrap(), 0.7);
    // Exit from the centre of a long interval is essentially impossible.
    let wide = ProblemParams::new(3.0, 40.0, 1.0, Regime::OutsideBall).unwrap();
    let g = Grid::new(wide, 40, 20).unwrap();
    let f = solve_umn(100, 10, &g).unwrap();
    let b = conditional_probability_bound(20.0, 0.0, &f, &wide, &McConfig::new(2000, 0.05, 1)).unwrap();
    assert_eq!(b.mc_prob.mean, 0.0);
    assert!(b.holds());
}
