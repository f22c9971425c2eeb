//! Sample paths of the solution pair `(Y, Z)` built from a PDE field.
//!
//! Before the exit time `τ`, `Y_t = V(W_t, t)` and `Z_t = ∂_x V(W_t, t)`, read
//! from the field with a `C¹` interpolant. After `τ`, `Y` follows `y_t` with
//! `Z = 0` when the data blow up outside the interval, and `Y = Z = 0` when
//! they blow up inside it.
//!
//! With `Z = ∂_x V`, Itô's formula gives `Y_t − Y_s = ∫_s^t Y^q dr + ∫_s^t Z dW`
//! on the pre-exit segment; the residuals below measure the defect of that
//! identity.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{domain, Error, Result};
use crate::feynman_kac::McConfig;
use crate::model::{ProblemParams, Regime};
use crate::pde::{solve_un, Field, Grid};
use crate::rng::{normal, path_rng, uniform};
use crate::stats::{reduce_paths, McEstimate, PathOutcome};
use crate::Scalar;

/// One simulated path on the uniform grid `t_k = k·T/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath<S> {
    pub times: Vec<S>,
    pub w: Vec<S>,
    /// First node at or after the exit time.
    pub tau_index: Option<usize>,
    /// Exit time (midpoint of the step in which the exit was detected).
    pub tau: Option<S>,
    pub y: Vec<S>,
    pub z: Vec<S>,
    pub regime: Regime,
    /// Exponent of the driver.
    pub q: S,
    /// Set when `Y_T` on an exited path was capped at `y_{T−dt}`.
    pub capped: bool,
}

impl<S: Scalar> SamplePath<S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn exited(&self) -> bool {
        self.tau_index.is_some()
    }

    /// Index of the last node before the exit (or the last node).
    pub fn last_pre_exit(&self) -> usize {
        match self.tau_index {
            Some(k) => k - 1,
            None => self.len() - 1,
        }
    }

    /// CSV with columns `k,t,w,y,z,exited_flag`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(PATH_CSV_HEADER);
        out.push('\n');
        for k in 0..self.len() {
            let flag = self.tau_index.is_some_and(|j| k >= j) as u8;
            let _ = writeln!(out, "{},{:?},{:?},{:?},{:?},{}", k, self.times[k], self.w[k], self.y[k], self.z[k], flag);
        }
        out
    }
}

pub const PATH_CSV_HEADER: &str = "k,t,w,y,z,exited_flag";

/// Backward residual over `[s, t]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport<S> {
    pub interval: (S, S),
    pub residual: S,
    pub dt_sim: S,
}

fn check_field<S: Scalar>(field: &Field<S>, params: &ProblemParams<S>) -> Result<()> {
    let fp = field.params();
    if field.tag().regime() != params.regime()
        || fp.l() != params.l()
        || fp.t_end() != params.t_end()
        || fp.q() != params.q()
    {
        return Err(Error::Regime("field does not belong to these parameters".into()));
    }
    Ok(())
}

/// Value and slope of the field at an interior point before the terminal time.
fn field_pair<S: Scalar>(field: &Field<S>, x: S, t: S) -> (S, S) {
    let (v, d) = field.interp_c1(x, t.min(field.t_max())).unwrap_or((S::zero(), S::zero()));
    (v.max(S::zero()), d)
}

/// Terminal value on a path that never left the interval: the interior
/// terminal row, with the corner nodes (which carry lateral data) excluded.
fn terminal_value<S: Scalar>(field: &Field<S>, x: S) -> S {
    let g = field.grid();
    let lo = g.x(1);
    let hi = g.x(g.nx());
    let k = field.k_end();
    field.interp(x.max(lo).min(hi), g.t(k)).unwrap_or(S::zero()).max(S::zero())
}

/// Simulated Brownian path with the exit detected as in the Monte Carlo
/// oracles (same draws for the same `(seed, index)`).
struct RawPath<S> {
    times: Vec<S>,
    w: Vec<S>,
    exit: Option<(usize, S)>,
}

fn raw_path<S: Scalar, R: Rng>(x0: S, t0: S, params: &ProblemParams<S>, cfg: &McConfig<S>, rng: &mut R) -> RawPath<S> {
    let t_end = params.t_end();
    let l = params.l();
    let n = (((t_end - t0) / cfg.dt_sim).f64() - 1e-9).ceil().max(1.0) as usize;
    let h = (t_end - t0) / S::usize(n);
    let sq = h.sqrt();
    let two = S::lit(2.0);
    let mut times = Vec::with_capacity(n + 1);
    let mut w = Vec::with_capacity(n + 1);
    times.push(t0);
    w.push(x0);
    let mut exit = None;
    for k in 0..n {
        let x = w[k];
        let inc = sq * S::lit(normal(rng));
        let x_next = x + inc;
        let t_next = if k + 1 == n { t_end } else { t0 + S::usize(k + 1) * h };
        if exit.is_none() {
            let mid = times[k] + h * S::lit(0.5);
            if x_next <= S::zero() || x_next >= l {
                exit = Some((k + 1, mid));
            } else if cfg.bridge_correction {
                let p0 = (-two * x * x_next / h).exp();
                let p1 = (-two * (l - x) * (l - x_next) / h).exp();
                if S::lit(uniform(rng)) < p0 + p1 - p0 * p1 {
                    exit = Some((k + 1, mid));
                }
            }
        }
        times.push(t_next);
        w.push(x_next);
    }
    RawPath { times, w, exit }
}

fn check_start<S: Scalar>(x0: S, params: &ProblemParams<S>) -> Result<()> {
    if !(x0 > S::zero() && x0 < params.l()) {
        return domain(format!("x0 = {x0} is not inside (0, L); the problem is trivial there"));
    }
    Ok(())
}

/// Simulates path number `index` of the stream `cfg.seed` from `W_0 = x0`.
pub fn simulate_path<S: Scalar>(
    x0: S,
    field: &Field<S>,
    params: &ProblemParams<S>,
    cfg: &McConfig<S>,
    index: u64,
) -> Result<SamplePath<S>> {
    simulate_path_from(x0, S::zero(), field, params, cfg, index)
}

/// As [`simulate_path`], started from `W_{t0} = x0`.
pub fn simulate_path_from<S: Scalar>(
    x0: S,
    t0: S,
    field: &Field<S>,
    params: &ProblemParams<S>,
    cfg: &McConfig<S>,
    index: u64,
) -> Result<SamplePath<S>> {
    cfg.validate()?;
    check_start(x0, params)?;
    check_field(field, params)?;
    if !(t0 >= S::zero() && t0 < params.t_end()) {
        return domain(format!("start time {t0} must lie in [0, T)"));
    }
    let mut rng = path_rng(cfg.seed, index);
    let raw = raw_path(x0, t0, params, cfg, &mut rng);
    let n = raw.times.len() - 1;
    let mut y = Vec::with_capacity(n + 1);
    let mut z = Vec::with_capacity(n + 1);
    let mut capped = false;
    let tau_index = raw.exit.map(|e| e.0);
    for k in 0..=n {
        let t = raw.times[k];
        let after = tau_index.is_some_and(|j| k >= j);
        let (yk, zk) = match (after, params.regime()) {
            (true, Regime::OutsideBall) => {
                if k == n {
                    capped = true;
                    (params.y_of_gap(params.t_end() - raw.times[n - 1]), S::zero())
                } else {
                    (params.y_of_gap(params.t_end() - t), S::zero())
                }
            }
            (true, Regime::InsideBall) => (S::zero(), S::zero()),
            (false, _) if k == n => (terminal_value(field, raw.w[k]), S::zero()),
            (false, _) => field_pair(field, raw.w[k], t),
        };
        y.push(yk);
        z.push(zk);
    }
    Ok(SamplePath {
        times: raw.times,
        w: raw.w,
        tau_index,
        tau: raw.exit.map(|e| e.1),
        y,
        z,
        regime: params.regime(),
        q: params.q(),
        capped,
    })
}

/// `|Y_s − Y_t + Σ Y_k^q h_k + Σ Z_k ΔW_k|` with left-point sums over
/// `k = s_index..t_index`.
pub fn bsde_residual<S: Scalar>(path: &SamplePath<S>, s_index: usize, t_index: usize) -> Result<ResidualReport<S>> {
    if s_index >= t_index || t_index >= path.len() {
        return Err(Error::Index(format!("need s < t < {}, got ({s_index}, {t_index})", path.len())));
    }
    let mut acc = path.y[s_index] - path.y[t_index];
    for k in s_index..t_index {
        let h = path.times[k + 1] - path.times[k];
        acc = acc + path.y[k].powf(path.q) * h + path.z[k] * (path.w[k + 1] - path.w[k]);
    }
    Ok(ResidualReport {
        interval: (path.times[s_index], path.times[t_index]),
        residual: acc.abs(),
        dt_sim: path.times[1] - path.times[0],
    })
}

/// Residual from `t = 0` to the last pre-exit node at or before `frac·T`.
/// Zero when that node is the initial one.
pub fn pre_exit_residual<S: Scalar>(path: &SamplePath<S>, frac: S) -> Result<S> {
    let t_cut = frac * path.times[path.len() - 1];
    let mut k = path.last_pre_exit().min(path.len() - 2);
    while k > 0 && path.times[k] > t_cut * (S::one() + S::lit(1e-12)) {
        k -= 1;
    }
    if k == 0 {
        return Ok(S::zero());
    }
    Ok(bsde_residual(path, 0, k)?.residual)
}

/// Root mean square of [`pre_exit_residual`] over `cfg.n_paths` paths.
pub fn residual_rms<S: Scalar>(
    x0: S,
    field: &Field<S>,
    params: &ProblemParams<S>,
    cfg: &McConfig<S>,
    frac: S,
) -> Result<S> {
    cfg.validate()?;
    check_start(x0, params)?;
    check_field(field, params)?;
    let summary = reduce_paths::<1, _>(cfg.n_paths, |i| {
        let path = simulate_path(x0, field, params, cfg, i).expect("validated inputs");
        let r = pre_exit_residual(&path, frac).unwrap_or(S::zero()).f64();
        PathOutcome { values: [r * r], exited: path.exited(), flagged: path.capped }
    });
    Ok(S::lit(summary.moments[0].mean.sqrt()))
}

/// Simulates paths `0..cfg.n_paths` (kept in memory; meant for modest counts).
pub fn simulate_paths<S: Scalar>(
    x0: S,
    field: &Field<S>,
    params: &ProblemParams<S>,
    cfg: &McConfig<S>,
) -> Result<Vec<SamplePath<S>>> {
    use rayon::prelude::*;
    cfg.validate()?;
    check_start(x0, params)?;
    check_field(field, params)?;
    (0..cfg.n_paths as u64).into_par_iter().map(|i| simulate_path(x0, field, params, cfg, i)).collect()
}

/// Terminal behaviour of one class of paths.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassStats<S> {
    pub count: usize,
    pub mean_terminal: S,
    pub max_abs_terminal: S,
    /// Largest `|Y_k − target_k|` after the exit, where the target is `y_{t_k}`
    /// or 0 depending on the regime (capped terminal nodes excluded).
    pub max_post_exit_gap: S,
    /// Largest `|Y_{τ⁻} − Y_{τ}|` over the class.
    pub max_jump_at_exit: S,
}

/// Terminal statistics split into exited and surviving paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalStats<S> {
    pub exited: ClassStats<S>,
    pub survived: ClassStats<S>,
    pub exit_fraction: McEstimate<S>,
}

fn post_exit_target<S: Scalar>(path: &SamplePath<S>, k: usize) -> S {
    match path.regime {
        Regime::OutsideBall => {
            let t_end = path.times[path.len() - 1];
            let gap = t_end - path.times[k];
            let p = path.q / (path.q - S::one());
            ((path.q - S::one()) * gap).powf(S::one() - p)
        }
        Regime::InsideBall => S::zero(),
    }
}

fn class_stats<S: Scalar>(paths: &[&SamplePath<S>]) -> ClassStats<S> {
    let mut s: ClassStats<S> = ClassStats { count: paths.len(), ..Default::default() };
    let mut sum = S::zero();
    for p in paths {
        let last = p.len() - 1;
        let yt = p.y[last];
        sum = sum + yt;
        s.max_abs_terminal = s.max_abs_terminal.max(yt.abs());
        if let Some(j) = p.tau_index {
            for k in j..last {
                s.max_post_exit_gap = s.max_post_exit_gap.max((p.y[k] - post_exit_target(p, k)).abs());
            }
            if !(p.capped && p.regime == Regime::OutsideBall) {
                s.max_post_exit_gap = s.max_post_exit_gap.max((p.y[last] - post_exit_target(p, last)).abs());
            }
            if j < last {
                s.max_jump_at_exit = s.max_jump_at_exit.max((p.y[j - 1] - p.y[j]).abs());
            }
        }
    }
    if !paths.is_empty() {
        s.mean_terminal = sum / S::usize(paths.len());
    }
    s
}

/// Splits the paths by exit before `T` and summarises `Y_T` in each class.
pub fn terminal_statistics<S: Scalar>(paths: &[SamplePath<S>]) -> Result<TerminalStats<S>> {
    let Some(first) = paths.first() else {
        return domain("no paths");
    };
    if paths.iter().any(|p| p.regime != first.regime || p.len() != first.len()) {
        return domain("paths must share regime and time grid");
    }
    let (exited, survived): (Vec<&SamplePath<S>>, Vec<&SamplePath<S>>) = paths.iter().partition(|p| p.exited());
    let n = paths.len();
    let frac = exited.len() as f64 / n as f64;
    let se = if n > 1 { (frac * (1.0 - frac) / (n - 1) as f64).sqrt() } else { 0.0 };
    Ok(TerminalStats {
        exited: class_stats(&exited),
        survived: class_stats(&survived),
        exit_fraction: McEstimate {
            mean: S::lit(frac),
            std_error: S::lit(se),
            n_paths: n,
            n_exited_before_t: exited.len(),
            n_flagged: paths.iter().filter(|p| p.capped).count(),
        },
    })
}

/// Largest `|Y_k|` over surviving paths and nodes with `t_k ≥ t_from`.
pub fn survivor_envelope<S: Scalar>(paths: &[SamplePath<S>], t_from: S) -> S {
    let mut m = S::zero();
    for p in paths.iter().filter(|p| !p.exited()) {
        for k in 0..p.len() {
            if p.times[k] >= t_from {
                m = m.max(p.y[k].abs());
            }
        }
    }
    m
}

/// Exit fraction and terminal counts without storing the paths.
pub fn exit_fraction<S: Scalar>(x0: S, params: &ProblemParams<S>, cfg: &McConfig<S>) -> Result<McEstimate<S>> {
    cfg.validate()?;
    check_start(x0, params)?;
    let summary = reduce_paths::<1, _>(cfg.n_paths, |i| {
        let mut rng = path_rng(cfg.seed, i);
        let raw = raw_path(x0, S::zero(), params, cfg, &mut rng);
        let e = raw.exit.is_some();
        PathOutcome { values: [e as u8 as f64], exited: e, flagged: false }
    });
    Ok(summary.estimate(0))
}

/// One row of the `u_n` ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderRow<S> {
    pub n: u64,
    /// `u_n(x0, t)`.
    pub value: S,
    /// Nodes where `u_n` is below the previous rung by more than `1e-12`.
    pub order_violations: usize,
    /// Largest `u − u_n` over interior nodes with `t ≤ T − eps`.
    pub gap_to_limit: S,
}

/// Solves the ladder `u_n` (lateral data `y_{t−1/n}`, terminal data 0) and
/// compares it with the limit field `u`.
pub fn minimality_probe<S: Scalar>(
    x0: S,
    t: S,
    n_list: &[u64],
    grid: &Grid<S>,
    u_limit: &Field<S>,
    eps: S,
) -> Result<Vec<LadderRow<S>>> {
    let params = grid.params();
    if params.regime() != Regime::OutsideBall {
        return Err(Error::Regime("the ladder needs the outside regime".into()));
    }
    check_start(x0, params)?;
    let mut rows = Vec::with_capacity(n_list.len());
    let mut prev: Option<Field<S>> = None;
    for &n in n_list {
        let f = solve_un(n, grid)?;
        let mut violations = 0;
        if let Some(g) = &prev {
            for k in 0..=f.k_end().min(g.k_end()) {
                for i in 1..=grid.nx() {
                    if f.at(i, k) < g.at(i, k) - S::lit(1e-12) {
                        violations += 1;
                    }
                }
            }
        }
        let mut gap = S::zero();
        let k_last = f.k_end().min(u_limit.k_end());
        for k in 0..k_last {
            if grid.t(k) > params.t_end() - eps {
                break;
            }
            for i in 1..=grid.nx() {
                gap = gap.max(u_limit.at(i, k) - f.at(i, k));
            }
        }
        rows.push(LadderRow { n, value: f.interp(x0, t)?, order_violations: violations, gap_to_limit: gap });
        prev = Some(f);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{solve_linear_v0, solve_umn, solve_vbar_n};

    fn outside() -> (ProblemParams<f64>, Field<f64>) {
        let p = ProblemParams::new(3.0, 3.0, 1.0, Regime::OutsideBall).unwrap();
        let g = Grid::from_steps(p, 0.1, 0.01).unwrap();
        (p, solve_umn(100, 200, &g).unwrap())
    }

    #[test]
    fn exited_paths_follow_blowup_curve() {
        let (p, f) = outside();
        let cfg = McConfig::new(1, 0.01, 9);
        let mut seen = 0;
        for i in 0..40 {
            let path = simulate_path(1.5, &f, &p, &cfg, i).unwrap();
            if let Some(j) = path.tau_index {
                seen += 1;
                for k in j..path.len() - 1 {
                    assert_eq!(path.y[k], p.y_of_gap(1.0 - path.times[k]));
                    assert_eq!(path.z[k], 0.0);
                }
                assert!(path.capped);
            } else {
                assert_eq!(*path.y.last().unwrap(), 0.0);
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn inside_regime_zero_after_exit() {
        let p = ProblemParams::new(2.0, 2.0, 1.0, Regime::InsideBall).unwrap();
        let g = Grid::from_steps(p, 0.1, 0.01).unwrap();
        let f = solve_vbar_n(20, &g).unwrap();
        let cfg = McConfig::new(1, 0.01, 4);
        for i in 0..30 {
            let path = simulate_path(0.4, &f, &p, &cfg, i).unwrap();
            if let Some(j) = path.tau_index {
                let r = bsde_residual(&path, j, path.len() - 1).unwrap();
                assert_eq!(r.residual, 0.0);
                assert!(path.y[j..].iter().all(|&v| v == 0.0));
            }
            assert!(path.y.iter().all(|&v| v >= 0.0 && v <= p.y_of_gap(0.05)));
        }
    }

    #[test]
    fn post_exit_residual_is_ode_error() {
        let (p, f) = outside();
        let cfg = McConfig::new(1, 0.001, 1);
        for i in 0..20 {
            let path = simulate_path(0.2, &f, &p, &cfg, i).unwrap();
            if let Some(j) = path.tau_index {
                let end = ((0.5 / 0.001) as usize).max(j + 1);
                if j < end {
                    let r = bsde_residual(&path, j, end).unwrap();
                    assert!(r.residual < 1e-3, "{}", r.residual);
                }
            }
        }
    }

    #[test]
    fn trivial_start_rejected() {
        let (p, f) = outside();
        let cfg = McConfig::new(1, 0.01, 1);
        assert!(simulate_path(0.0, &f, &p, &cfg, 0).is_err());
        assert!(simulate_path(3.0, &f, &p, &cfg, 0).is_err());
        let v0 = solve_linear_v0(f.grid()).unwrap();
        assert!(simulate_path(1.0, &v0, &p.with_regime(Regime::OutsideBall).unwrap(), &cfg, 0).is_ok());
    }

    #[test]
    fn csv_has_one_row_per_node() {
        let (p, f) = outside();
        let path = simulate_path(1.5, &f, &p, &McConfig::new(1, 0.05, 3), 0).unwrap();
        let csv = path.to_csv();
        assert!(csv.starts_with(PATH_CSV_HEADER));
        assert_eq!(csv.lines().count(), path.len() + 1);
    }

    #[test]
    fn ladder_increases() {
        let p = ProblemParams::new(3.0, 3.0, 1.0, Regime::OutsideBall).unwrap();
        let g = Grid::from_steps(p, 0.1, 0.01).unwrap();
        let u = solve_un(1024, &g).unwrap();
        let rows = minimality_probe(1.5, 0.0, &[4, 16, 64, 256], &g, &u, 0.0).unwrap();
        assert!(rows.iter().all(|r| r.order_violations == 0));
        assert!(rows.windows(2).all(|w| w[0].value <= w[1].value));
    }
}
