//! Numerical acceptance checks, one function per criterion.
//!
//! Each check runs in `f64`, compares independent computations (series
//! against Monte Carlo, PDE against quadrature, PDE against path
//! functionals) and reports named metrics against pinned limits.

use std::time::Instant;

use crate::bsde::{residual_rms, simulate_paths, terminal_statistics};
use crate::control::{conditional_probability_bound, cost_identity_check};
use crate::densities::{constrained_density, exit_cdf, exit_density, v0, QuadratureSpec, Truncation};
use crate::error::Result;
use crate::feynman_kac::{mc_exit_probability, mc_u_both, mc_u_multiplicative, mc_ubar, McConfig};
use crate::model::{psi_mn, BoundaryIndices, ProblemParams, Regime};
use crate::pde::{
    solve_linear_v0, solve_u, solve_ubar_n, solve_umn, solve_un, solve_vbar, solve_vbar_n, Field, Grid, Schedule,
    SweepConfig,
};
use crate::quadrature::gauss_kronrod;

/// Lower bound on the exit-time mass over `(0, 50L²]`.
pub const DENSITY_MASS_MIN: f64 = 0.999;
/// Tolerance on `∫f_W da + P(τ ≤ s) = 1`.
pub const MASS_BALANCE_TOL: f64 = 1e-8;
/// Multiple of the standard error allowed in Monte Carlo comparisons.
pub const SE_MULT: f64 = 3.0;
/// Gap allowed between the linear solve and quadrature on the coarse grid.
pub const LINEAR_GAP_TOL: f64 = 5e-3;
/// Arithmetic slack in nodewise orderings (relative to `max(1, |value|)`).
pub const ORDER_SLACK: f64 = 1e-12;
/// Discretization allowance in the Feynman-Kac comparisons.
pub const FK_ALLOWANCE: f64 = 5e-3;
/// Accepted range for the residual ratio when `dt` is quartered.
pub const RESIDUAL_RATIO_RANGE: (f64, f64) = (1.4, 2.8);
/// Tolerance on `Y_T` of surviving paths in the outside regime.
pub const TERMINAL_TOL: f64 = 1e-10;
/// Discretization allowance in the cost identity.
pub const CONTROL_ALLOWANCE: f64 = 1e-2;

/// Path-count scale of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    /// Path counts of the acceptance criteria.
    Full,
    /// A tenth of the paths, for smoke runs.
    Quick,
}

impl Budget {
    fn paths(self, n: usize) -> usize {
        match self {
            Budget::Full => n,
            Budget::Quick => (n / 10).max(1000),
        }
    }
}

/// Settings shared by the checks.
#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig {
    /// Parameters for the outside regime.
    pub outside: ProblemParams<f64>,
    /// Parameters for the inside regime.
    pub inside: ProblemParams<f64>,
    pub budget: Budget,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            outside: ProblemParams::new(3.0, 3.0, 1.0, Regime::OutsideBall).expect("valid"),
            inside: ProblemParams::new(2.0, 2.0, 1.0, Regime::InsideBall).expect("valid"),
            budget: Budget::Full,
            seed: 20_240_611,
        }
    }
}

/// One measured quantity and its limit.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    /// Limit the value is compared with.
    pub limit: f64,
    pub ok: bool,
}

/// Outcome of one criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub id: u8,
    pub title: &'static str,
    pub metrics: Vec<Metric>,
    pub seconds: f64,
}

impl CriterionReport {
    pub fn passed(&self) -> bool {
        self.metrics.iter().all(|m| m.ok)
    }

    /// Metrics that failed.
    pub fn failures(&self) -> impl Iterator<Item = &Metric> {
        self.metrics.iter().filter(|m| !m.ok)
    }
}

struct Recorder {
    metrics: Vec<Metric>,
}

impl Recorder {
    fn new() -> Self {
        Self { metrics: Vec::new() }
    }

    fn at_most(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        self.metrics.push(Metric { name: name.into(), value, limit, ok: value <= limit });
    }

    fn at_least(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        self.metrics.push(Metric { name: name.into(), value, limit, ok: value >= limit });
    }

    fn within(&mut self, name: impl Into<String>, value: f64, (lo, hi): (f64, f64)) {
        let ok = value >= lo && value <= hi;
        let limit = if value < lo { lo } else { hi };
        self.metrics.push(Metric { name: name.into(), value, limit, ok });
    }

    fn finish(self, id: u8, title: &'static str, start: Instant) -> CriterionReport {
        CriterionReport { id, title, metrics: self.metrics, seconds: start.elapsed().as_secs_f64() }
    }
}

fn params(q: f64, l: f64, t: f64, regime: Regime) -> ProblemParams<f64> {
    ProblemParams::new(q, l, t, regime).expect("valid parameters")
}

/// Counts nodes with `lo > hi` beyond the slack, over interior and lateral
/// nodes with `k < k_max`.
fn order_violations(lo: &Field<f64>, hi: &Field<f64>, k_max: usize) -> usize {
    let mut bad = 0;
    for k in 0..k_max.min(lo.k_end() + 1).min(hi.k_end() + 1) {
        for (a, b) in lo.row(k).iter().zip(hi.row(k)) {
            if *a > *b + ORDER_SLACK * b.abs().max(1.0) {
                bad += 1;
            }
        }
    }
    bad
}

/// Number of `t_k` (`k < k_max`) at which `lo(x,t_k) < hi(x,t_k)` fails, for
/// two column slices.
fn strict_violations(lo: &[f64], hi: &[f64]) -> usize {
    lo.iter().zip(hi).filter(|(a, b)| !(a < b)).count()
}

/// Criterion 1: the exit-time law integrates to one, and the killed density
/// plus the exit probability balance.
pub fn density_mass() -> Result<CriterionReport> {
    let start = Instant::now();
    let mut r = Recorder::new();
    let tr = Truncation::default();
    for &(l, x, t) in &[(1.0, 0.5, 0.0), (4.0, 3.5, 2.0), (3.0, 1.5, 0.0)] {
        let horizon = 50.0 * l * l;
        let p = params(3.0, l, t + horizon, Regime::OutsideBall);
        let mass = gauss_kronrod(
            |s: f64| exit_density(x, t, s, &p, tr).map(|v| v.value).unwrap_or(f64::NAN),
            t,
            t + horizon,
            1e-12,
            2000,
        );
        r.at_least(format!("mass L={l} x={x} t={t}"), mass.value, DENSITY_MASS_MIN);
        let mut worst: f64 = 0.0;
        for &frac in &[0.01, 0.05, 0.2, 1.0, 5.0] {
            let s = t + frac * l * l;
            let killed = gauss_kronrod(
                |a: f64| constrained_density(x, t, s, a, &p, tr).map(|v| v.value).unwrap_or(f64::NAN),
                0.0,
                l,
                1e-13,
                2000,
            );
            let cdf = exit_cdf(x, t, s, &p, tr)?.value;
            worst = worst.max((killed.value + cdf - 1.0).abs());
        }
        r.at_most(format!("balance L={l} x={x} t={t}"), worst, MASS_BALANCE_TOL);
    }
    Ok(r.finish(1, "density mass", start))
}

/// Criterion 2: bridge-corrected exit frequencies against the series.
pub fn mc_series_agreement(cfg: &VerifyConfig) -> Result<CriterionReport> {
    let start = Instant::now();
    let mut r = Recorder::new();
    let p = cfg.outside;
    let t_end = p.t_end();
    let l = p.l();
    let mc = McConfig::new(cfg.budget.paths(1_000_000), 0.01 * t_end, cfg.seed);
    for (j, &(x, t)) in [(0.5 * l, 0.0), (l / 6.0, 0.0), (5.0 * l / 6.0, 0.5 * t_end)].iter().enumerate() {
        let est = mc_exit_probability(x, t, t_end, &p, &McConfig { seed: cfg.seed + j as u64, ..mc })?;
        let exact = exit_cdf(x, t, t_end, &p, Truncation::default())?.value;
        let z = (est.mean - exact).abs() / est.std_error;
        r.at_most(format!("|mc-cdf|/SE x={x:.3} t={t}"), z, SE_MULT);
    }
    Ok(r.finish(2, "Monte Carlo exit frequency vs series", start))
}

/// Criterion 3: the linear solve against the quadrature value of `v₀` on the
/// coarse grid.
pub fn linear_consistency() -> Result<CriterionReport> {
    let start = Instant::now();
    let mut r = Recorder::new();
    let p = params(3.0, 3.0, 1.0, Regime::OutsideBall);
    let g = Grid::from_steps(p, 0.1, 0.01)?;
    let f = solve_linear_v0(&g)?;
    let quad = QuadratureSpec::for_params(&p);
    let mut worst: f64 = 0.0;
    for &x in &[0.5, 1.5, 2.5] {
        for &t in &[0.0, 0.5, 0.9] {
            let exact = v0(x, t, &p, quad, Truncation::default())?;
            worst = worst.max((f.at(f.nearest_i(x), f.nearest_k(t)) - exact).abs());
        }
    }
    r.at_most("max |field - quadrature| over 9 probes", worst, LINEAR_GAP_TOL);
    Ok(r.finish(3, "linear solve vs quadrature", start))
}

/// Criterion 4: orderings of solution slices in time.
pub fn slice_orderings() -> Result<CriterionReport> {
    let start = Instant::now();
    let mut r = Recorder::new();
    let p = params(3.0, 3.0, 1.0, Regime::OutsideBall);
    let g = Grid::from_steps(p, 0.1, 0.01)?;
    let a = solve_umn(100, 10, &g)?;
    let b = solve_umn(100, 1000, &g)?;
    let i = a.nearest_i(1.5);
    let nt = g.nt();
    let col_a: Vec<f64> = a.column(i)[..nt].to_vec();
    let col_b: Vec<f64> = b.column(i)[..nt].to_vec();
    let y: Vec<f64> = (0..nt).map(|k| p.y_of_gap(p.t_end() - g.t(k))).collect();
    r.at_most("t with u_{100,10}(1.5,t) >= u_{100,1000}(1.5,t)", strict_violations(&col_a, &col_b) as f64, 0.0);
    r.at_most("t with u_{100,1000}(1.5,t) >= y_t", strict_violations(&col_b, &y) as f64, 0.0);

    let pi = params(2.0, 2.0, 1.0, Regime::InsideBall);
    let gi = Grid::from_steps(pi, 0.1, 0.01)?;
    let u5 = solve_ubar_n(5, &gi)?;
    let u50 = solve_ubar_n(50, &gi)?;
    let ii = u5.nearest_i(1.0);
    let k_common = u5.k_end().min(u50.k_end());
    let mut above = 0;
    let mut over_y = 0;
    for k in 0..=k_common {
        let (lo, hi) = (u50.at(ii, k), u5.at(ii, k));
        if lo > hi + ORDER_SLACK * hi.max(1.0) {
            above += 1;
        }
        let yk = pi.y_of_gap(pi.t_end() - gi.t(k));
        if hi > yk + ORDER_SLACK * yk.max(1.0) {
            over_y += 1;
        }
    }
    r.at_most("t with ubar_50(1,t) > ubar_5(1,t)", above as f64, 0.0);
    r.at_most("t with ubar_5(1,t) > y_t", over_y as f64, 0.0);
    Ok(r.finish(4, "slice orderings", start))
}

/// Criterion 5: nodewise comparison suite.
pub fn monotone_suite() -> Result<CriterionReport> {
    let start = Instant::now();
    let mut r = Recorder::new();
    let p = params(3.0, 3.0, 1.0, Regime::OutsideBall);
    let g = Grid::from_steps(p, 0.1, 0.01)?;
    let nt = g.nt();

    // Boundary data on the lateral sides (fine near the corners) and the top.
    let mut pts = Vec::new();
    for k in 0..=nt {
        for &x in &[0.0, 3.0] {
            pts.push((x, g.t(k)));
        }
    }
    for j in 0..=300 {
        pts.push((0.01 * j as f64, 1.0));
        pts.push((1e-4 * j as f64, 1.0));
    }
    let mut psi_bad = 0;
    for &(x, t) in &pts {
        let v = |m, n| psi_mn(x, t, BoundaryIndices::new(m, n), &p);
        for &n in &[10, 100, 1000] {
            let row = [v(5, n)?, v(10, n)?, v(100, n)?];
            if row[1] > row[0] + ORDER_SLACK * row[0].max(1.0) || row[2] > row[1] + ORDER_SLACK * row[1].max(1.0) {
                psi_bad += 1;
            }
            let y = p.y_of_gap(p.t_end() - t + 1.0 / n as f64);
            if row[0] > y * (1.0 + ORDER_SLACK) || row[0] > p.gamma(n) * (1.0 + ORDER_SLACK) || row[2] < 0.0 {
                psi_bad += 1;
            }
        }
        for &m in &[5, 100] {
            let col = [v(m, 10)?, v(m, 100)?, v(m, 1000)?];
            if col[0] > col[1] + ORDER_SLACK * col[1].max(1.0) || col[1] > col[2] + ORDER_SLACK * col[2].max(1.0) {
                psi_bad += 1;
            }
        }
    }
    r.at_most("psi_{m,n}: decreasing in m, increasing in n, <= y^(n), <= gamma_n", psi_bad as f64, 0.0);

    let u50 = solve_umn(50, 100, &g)?;
    let u100 = solve_umn(100, 100, &g)?;
    let u10 = solve_umn(100, 10, &g)?;
    let v0f = solve_linear_v0(&g)?;
    r.at_most("u_{100,100} > u_{50,100}", order_violations(&u100, &u50, nt) as f64, 0.0);
    r.at_most("u_{100,10} > u_{100,100}", order_violations(&u10, &u100, nt) as f64, 0.0);
    r.at_most("u_{100,100} > v0 field", order_violations(&u100, &v0f, nt) as f64, 0.0);
    let gamma = p.gamma(100);
    let over = u100.values().iter().filter(|&&v| v > gamma * (1.0 + ORDER_SLACK) || v < 0.0).count();
    r.at_most("u_{100,100} outside [0, gamma_100]", over as f64, 0.0);

    let ladder: Vec<Field<f64>> = [4u64, 16, 64, 256].iter().map(|&n| solve_un(n, &g)).collect::<Result<_>>()?;
    let bad: usize = ladder.windows(2).map(|w| order_violations(&w[0], &w[1], nt + 1)).sum();
    r.at_most("u_n decreasing somewhere in n (n = 4..256)", bad as f64, 0.0);

    let pi = params(2.0, 2.0, 1.0, Regime::InsideBall);
    let gi = Grid::from_steps(pi, 0.1, 0.01)?;
    let ub5 = solve_ubar_n(5, &gi)?;
    let ub50 = solve_ubar_n(50, &gi)?;
    let mut over_y = 0;
    for f in [&ub5, &ub50] {
        for k in 0..=f.k_end() {
            let yk = pi.y_of_gap(pi.t_end() - gi.t(k));
            over_y += f.row(k).iter().filter(|&&v| v > yk * (1.0 + ORDER_SLACK) || v < 0.0).count();
        }
    }
    r.at_most("ubar_n outside [0, y_t]", over_y as f64, 0.0);
    r.at_most("ubar_50 > ubar_5 (decreasing in n)", order_violations(&ub50, &ub5, ub5.k_end() + 1) as f64, 0.0);

    let vb: Vec<Field<f64>> = [4u64, 5, 50, 100].iter().map(|&n| solve_vbar_n(n, &gi)).collect::<Result<_>>()?;
    let bad: usize = vb.windows(2).map(|w| order_violations(&w[0], &w[1], gi.nt() + 1)).sum();
    r.at_most("vbar_n decreasing somewhere in n (n = 4..100)", bad as f64, 0.0);
    r.at_most("vbar_5 > ubar_5", order_violations(&vb[1], &ub5, ub5.k_end() + 1) as f64, 0.0);
    r.at_most("vbar_50 > ubar_50", order_violations(&vb[2], &ub50, ub50.k_end() + 1) as f64, 0.0);
    Ok(r.finish(5, "monotone and comparison suite", start))
}

/// Converged-as-far-as-possible `u` on the grid used by the path checks.
pub fn reference_u(p: &ProblemParams<f64>) -> Result<Field<f64>> {
    let g = Grid::from_steps(*p, 0.05, p.t_end() / 800.0)?;
    Ok(solve_u(&g, &Schedule::default_for(p), SweepConfig::default())?.0)
}

/// `u` on the finer grid used for the path functionals, whose integrands
/// are sensitive to the resolution near the singular corners.
pub fn reference_u_fine(p: &ProblemParams<f64>) -> Result<Field<f64>> {
    let g = Grid::from_steps(*p, 0.025, p.t_end() / 3200.0)?;
    Ok(solve_u(&g, &Schedule::default_for(p), SweepConfig::default())?.0)
}

/// Increasing limit `v̄` on the grid used by the path checks.
pub fn reference_vbar(p: &ProblemParams<f64>) -> Result<Field<f64>> {
    let g = Grid::from_steps(*p, 0.05, p.t_end() / 800.0)?;
    let ns: Vec<u64> = (2..=14).map(|e| 1u64 << e).collect();
    Ok(solve_vbar(&g, &ns, SweepConfig { tol: 1e-6, eps: 0.1 * p.t_end() })?.0)
}

/// Criterion 6: PDE fields against their path representations.
pub fn feynman_kac_cross(cfg: &VerifyConfig) -> Result<CriterionReport> {
    let start = Instant::now();
    let mut r = Recorder::new();
    let p = cfg.outside;
    let (l, t_end) = (p.l(), p.t_end());
    let u = reference_u_fine(&p)?;
    let mc = McConfig::new(cfg.budget.paths(100_000), 5e-4 * t_end, cfg.seed);
    let mut agree = 0;
    for &x in &[0.25 * l, 0.5 * l, 0.75 * l] {
        for &t in &[0.0, 0.25 * t_end, 0.5 * t_end] {
            let field = u.interp(x, t)?;
            let (m, a) = mc_u_both(x, t, &u, &p, &mc)?;
            r.at_most(
                format!("mult: |u - mc| - 3SE at ({x:.2},{t:.2})"),
                (field - m.mean).abs() - SE_MULT * m.std_error,
                FK_ALLOWANCE,
            );
            r.at_most(
                format!("add: |u - mc| - 3SE at ({x:.2},{t:.2})"),
                (field - a.mean).abs() - SE_MULT * a.std_error,
                FK_ALLOWANCE,
            );
            if (m.mean - a.mean).abs() <= SE_MULT * (m.std_error + a.std_error) {
                agree += 1;
            }
        }
    }
    r.at_least("probes where mult and add agree within 3(SE1+SE2)", agree as f64, 8.0);

    let pi = cfg.inside;
    let (li, ti) = (pi.l(), pi.t_end());
    let n = 50;
    let gi = Grid::from_steps(pi, 0.05, ti / 800.0)?;
    let ub = solve_ubar_n(n, &gi)?;
    let horizon = ti - 1.0 / n as f64;
    for &x in &[0.25 * li, 0.5 * li, 0.75 * li] {
        for &t in &[0.0, 0.5 * horizon, 0.9 * horizon] {
            let field = ub.interp(x, t)?;
            let e = mc_ubar(x, t, n, &ub, &pi, &McConfig { dt_sim: 2e-3 * ti, ..mc })?;
            r.at_most(
                format!("ubar_{n}: |field - mc| - 3SE at ({x:.2},{t:.2})"),
                (field - e.mean).abs() - SE_MULT * e.std_error,
                FK_ALLOWANCE,
            );
        }
    }
    Ok(r.finish(6, "Feynman-Kac cross-validation", start))
}

/// Criterion 7: the backward residual shrinks like `√dt`.
pub fn bsde_residual_rate(cfg: &VerifyConfig) -> Result<CriterionReport> {
    let start = Instant::now();
    let mut r = Recorder::new();
    let p = cfg.outside;
    let u = reference_u(&p)?;
    let n = cfg.budget.paths(10_000);
    let x0 = 0.5 * p.l();
    let coarse = residual_rms(x0, &u, &p, &McConfig::new(n, 1e-3 * p.t_end(), cfg.seed), 0.9)?;
    let fine = residual_rms(x0, &u, &p, &McConfig::new(n, 2.5e-4 * p.t_end(), cfg.seed), 0.9)?;
    r.within("rms(dt) / rms(dt/4)", coarse / fine, RESIDUAL_RATIO_RANGE);
    Ok(r.finish(7, "BSDE residual convergence", start))
}

/// Criterion 8: terminal behaviour of simulated paths.
pub fn terminal_condition(cfg: &VerifyConfig) -> Result<CriterionReport> {
    let start = Instant::now();
    let mut r = Recorder::new();
    let n = cfg.budget.paths(10_000);
    let tr = Truncation::default();

    let p = cfg.outside;
    let u = reference_u(&p)?;
    let x0 = 0.5 * p.l();
    let mc = McConfig::new(n, 0.01 * p.t_end(), cfg.seed);
    let paths = simulate_paths(x0, &u, &p, &mc)?;
    let s = terminal_statistics(&paths)?;
    r.at_most("outside: max |Y_T| on surviving paths", s.survived.max_abs_terminal, TERMINAL_TOL);
    r.at_most("outside: max |Y - y_t| after exit", s.exited.max_post_exit_gap, 0.0);
    let exact = exit_cdf(x0, 0.0, p.t_end(), &p, tr)?.value;
    r.at_most(
        "outside: |exit fraction - cdf|/SE",
        (s.exit_fraction.mean - exact).abs() / s.exit_fraction.std_error,
        SE_MULT,
    );
    drop(paths);

    let pi = cfg.inside;
    let vb = reference_vbar(&pi)?;
    let xi = 0.5 * pi.l();
    let paths = simulate_paths(xi, &vb, &pi, &McConfig { seed: cfg.seed + 1, ..mc })?;
    let s = terminal_statistics(&paths)?;
    r.at_most("inside: max |Y_T| on exited paths", s.exited.max_abs_terminal, 0.0);
    r.at_most("inside: max |Y| after exit", s.exited.max_post_exit_gap, 0.0);
    let exact = exit_cdf(xi, 0.0, pi.t_end(), &pi, tr)?.value;
    r.at_most(
        "inside: |exit fraction - cdf|/SE",
        (s.exit_fraction.mean - exact).abs() / s.exit_fraction.std_error,
        SE_MULT,
    );
    Ok(r.finish(8, "terminal condition", start))
}

/// Criterion 9: cost identity and comparison with two other controls.
pub fn control_identity(cfg: &VerifyConfig) -> Result<CriterionReport> {
    let start = Instant::now();
    let mut r = Recorder::new();
    let p = cfg.outside;
    let (l, t_end) = (p.l(), p.t_end());
    let u = reference_u(&p)?;
    let mc = McConfig::new(cfg.budget.paths(20_000), 1e-3 * t_end, cfg.seed);
    for &(x, t) in &[(0.5 * l, 0.0), (l / 3.0, 0.25 * t_end), (2.0 * l / 3.0, 0.5 * t_end), (0.5 * l, 0.75 * t_end)] {
        let c = cost_identity_check(x, t, 1.0, &u, &p, &mc)?;
        let se3 = SE_MULT * c.rhs.std_error;
        r.at_most(format!("|lhs - rhs| - 3SE at ({x:.2},{t:.2})"), c.gap - se3, CONTROL_ALLOWANCE);
        r.at_most(
            format!("optimal - constant rate - 3SE at ({x:.2},{t:.2})"),
            c.rhs.mean - c.constant_rate_cost - se3,
            0.0,
        );
        r.at_most(format!("optimal - bang-bang - 3SE at ({x:.2},{t:.2})"), c.rhs.mean - c.bang_bang_cost - se3, 0.0);
    }
    Ok(r.finish(9, "control cost identity", start))
}

/// Criterion 10: the scaled probability of an infinite terminal value stays
/// below the value function.
pub fn probability_bound(cfg: &VerifyConfig) -> Result<CriterionReport> {
    let start = Instant::now();
    let mut r = Recorder::new();
    let n = cfg.budget.paths(100_000);
    let p = cfg.outside;
    let u = reference_u(&p)?;
    let pi = cfg.inside;
    let vb = reference_vbar(&pi)?;
    for (tag, pp, field) in [("outside", &p, &u), ("inside", &pi, &vb)] {
        let (l, t_end) = (pp.l(), pp.t_end());
        let mc = McConfig::new(n, 0.01 * t_end, cfg.seed);
        for &(x, t) in &[
            (0.5 * l, 0.0),
            (l / 6.0, 0.0),
            (0.5 * l, 0.5 * t_end),
            (5.0 * l / 6.0, 0.5 * t_end),
            (0.5 * l, 0.9 * t_end),
        ] {
            let b = conditional_probability_bound(x, t, field, pp, &mc)?;
            r.at_most(
                format!("{tag}: scaled prob - field - 3SE at ({x:.2},{t:.2})"),
                b.scaled - b.field_value - SE_MULT * b.scaled_se,
                0.0,
            );
        }
    }
    Ok(r.finish(10, "conditional probability bound", start))
}

/// CSV outputs of a small pipeline, used to compare runs.
pub fn determinism_artifacts(seed: u64) -> Result<Vec<String>> {
    let p = params(3.0, 3.0, 1.0, Regime::OutsideBall);
    let g = Grid::from_steps(p, 0.1, 0.01)?;
    let f = solve_umn(100, 50, &g)?;
    let mc = McConfig::new(5000, 0.01, seed);
    let est = crate::feynman_kac::mc_v0(1.5, 0.0, &p, &mc)?;
    let mult = mc_u_multiplicative(1.0, 0.2, &f, &p, &mc)?;
    let mut paths = String::new();
    for path in simulate_paths(1.5, &f, &p, &McConfig::new(8, 0.01, seed))? {
        paths.push_str(&path.to_csv());
    }
    let id = cost_identity_check(1.5, 0.0, 1.0, &f, &p, &McConfig::new(2000, 0.01, seed))?;
    Ok(vec![
        f.to_csv(),
        format!("{}\n{}\n", est.csv_row(1.5, 0.0), mult.csv_row(1.0, 0.2)),
        paths,
        crate::control::identity_csv(&[id]),
    ])
}

/// Criterion 11: identical outputs across repeated runs and worker counts.
pub fn determinism(cfg: &VerifyConfig) -> Result<CriterionReport> {
    let start = Instant::now();
    let mut r = Recorder::new();
    let run = |threads: usize| -> Result<Vec<String>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| crate::Error::Domain(e.to_string()))?;
        pool.install(|| determinism_artifacts(cfg.seed))
    };
    let base = run(1)?;
    let again = run(1)?;
    let multi = run(4)?;
    let differ = |a: &[String], b: &[String]| a.iter().zip(b).filter(|(x, y)| x != y).count() as f64;
    r.at_most("artifacts differing between repeated runs", differ(&base, &again), 0.0);
    r.at_most("artifacts differing between 1 and 4 workers", differ(&base, &multi), 0.0);
    Ok(r.finish(11, "determinism", start))
}

/// Ids of the criteria in each named suite.
pub fn suite(name: &str) -> Option<&'static [u8]> {
    Some(match name {
        "density" => &[1],
        "fk" => &[2, 3, 6],
        "monotone" => &[4, 5],
        "bsde" => &[7, 8],
        "control" => &[9, 10],
        "determinism" => &[11],
        "all" => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11],
        _ => return None,
    })
}

/// Runs criterion `id`.
pub fn run_criterion(id: u8, cfg: &VerifyConfig) -> Result<CriterionReport> {
    match id {
        1 => density_mass(),
        2 => mc_series_agreement(cfg),
        3 => linear_consistency(),
        4 => slice_orderings(),
        5 => monotone_suite(),
        6 => feynman_kac_cross(cfg),
        7 => bsde_residual_rate(cfg),
        8 => terminal_condition(cfg),
        9 => control_identity(cfg),
        10 => probability_bound(cfg),
        11 => determinism(cfg),
        _ => Err(crate::Error::Index(format!("no criterion {id}"))),
    }
}
