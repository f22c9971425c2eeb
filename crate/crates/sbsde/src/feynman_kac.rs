//! Monte Carlo estimates of the expectation representations, used as
//! independent checks of the PDE fields.
//!
//! Paths use exact Gaussian increments. With the bridge correction, a step
//! whose endpoints both lie inside `(0, L)` still counts as an exit with the
//! Brownian-bridge crossing probability `exp(−2(a−x₁)(a−x₂)/h)` of each
//! boundary `a`. An exit inside a step is placed at the step midpoint.

use rand::Rng;

use crate::error::{domain, Error, Result};
use crate::model::{ProblemParams, Regime};
use crate::pde::Field;
use crate::rng::{normal, path_rng, uniform};
use crate::stats::{reduce_paths, McEstimate, PathOutcome, Summary};
use crate::Scalar;

/// Simulation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig<S> {
    pub n_paths: usize,
    pub dt_sim: S,
    pub seed: u64,
    pub bridge_correction: bool,
}

impl<S: Scalar> McConfig<S> {
    pub fn new(n_paths: usize, dt_sim: S, seed: u64) -> Self {
        Self { n_paths, dt_sim, seed, bridge_correction: true }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return domain("n_paths must be at least 1");
        }
        if !(self.dt_sim > S::zero()) {
            return domain("dt_sim must be positive");
        }
        Ok(())
    }
}

/// First exit from `(0, L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitEvent<S> {
    pub time: S,
    /// Boundary point that was hit (0 or `L`).
    pub at: S,
    /// Index of the last node inside the interval.
    pub last_index: usize,
}

/// Number of steps from `t0` to `horizon` (the last one may be shorter).
pub(crate) fn step_count<S: Scalar>(t0: S, horizon: S, dt: S) -> usize {
    let r = ((horizon - t0) / dt).f64();
    (r - 1e-9).ceil().max(0.0) as usize
}

/// Time of node `k` of a walk starting at `t0`.
#[inline]
pub(crate) fn node_time<S: Scalar>(t0: S, horizon: S, dt: S, k: usize, n_steps: usize) -> S {
    if k >= n_steps {
        horizon
    } else {
        t0 + S::usize(k) * dt
    }
}

/// Simulates one Brownian path from `(x0, t0)` until exit or `horizon`.
///
/// `on_node(k, t, x, dw)` is called for every node that lies inside the
/// interval, starting with the initial one (`dw` is the increment that led to
/// the node, zero for the first).
#[allow(clippy::too_many_arguments)]
pub(crate) fn walk<S: Scalar, R: Rng, F: FnMut(usize, S, S, S)>(
    x0: S,
    t0: S,
    horizon: S,
    l: S,
    dt: S,
    bridge: bool,
    rng: &mut R,
    mut on_node: F,
) -> Option<ExitEvent<S>> {
    let n_steps = step_count(t0, horizon, dt);
    let mut x = x0;
    let mut t = t0;
    on_node(0, t, x, S::zero());
    let two = S::lit(2.0);
    for k in 0..n_steps {
        let t_next = node_time(t0, horizon, dt, k + 1, n_steps);
        let h = t_next - t;
        let dw = h.sqrt() * S::lit(normal(rng));
        let x_next = x + dw;
        let mid = t + h * S::lit(0.5);
        if x_next <= S::zero() {
            return Some(ExitEvent { time: mid, at: S::zero(), last_index: k });
        }
        if x_next >= l {
            return Some(ExitEvent { time: mid, at: l, last_index: k });
        }
        if bridge {
            let p0 = (-two * x * x_next / h).exp();
            let p1 = (-two * (l - x) * (l - x_next) / h).exp();
            let u = S::lit(uniform(rng));
            if u < p0 {
                return Some(ExitEvent { time: mid, at: S::zero(), last_index: k });
            }
            if u < p0 + p1 - p0 * p1 {
                return Some(ExitEvent { time: mid, at: l, last_index: k });
            }
        }
        x = x_next;
        t = t_next;
        on_node(k + 1, t, x, dw);
    }
    None
}

fn check_start<S: Scalar>(x: S, t: S, horizon: S, params: &ProblemParams<S>) -> Result<()> {
    if !(x > S::zero() && x < params.l()) {
        return domain(format!("start point {x} must lie in (0, L)"));
    }
    if !(t >= S::zero() && t < horizon) {
        return domain(format!("start time {t} must lie in [0, {horizon})"));
    }
    Ok(())
}

fn require_regime<S: Scalar>(params: &ProblemParams<S>, regime: Regime) -> Result<()> {
    if params.regime() != regime {
        return Err(Error::Regime(format!("estimator needs the {} regime", regime.name())));
    }
    Ok(())
}

/// `y` at the exit time, with the time clamped to `T − dt/2`. Returns the
/// value and whether the clamp was active.
fn y_at_exit<S: Scalar>(tau: S, params: &ProblemParams<S>, dt: S) -> (S, bool) {
    let cap = params.t_end() - dt * S::lit(0.5);
    let clamped = tau > cap;
    (params.y_of_gap(params.t_end() - tau.min(cap)), clamped)
}

/// Estimates `P_{x,t}(τ ≤ s)`.
pub fn mc_exit_probability<S: Scalar>(
    x: S,
    t: S,
    s: S,
    params: &ProblemParams<S>,
    cfg: &McConfig<S>,
) -> Result<McEstimate<S>> {
    cfg.validate()?;
    check_start(x, t, s, params)?;
    let l = params.l();
    let summary: Summary<1> = reduce_paths(cfg.n_paths, |i| {
        let mut rng = path_rng(cfg.seed, i);
        let exit = walk(x, t, s, l, cfg.dt_sim, cfg.bridge_correction, &mut rng, |_, _, _, _| {});
        PathOutcome { values: [if exit.is_some() { 1.0 } else { 0.0 }], exited: exit.is_some(), flagged: false }
    });
    Ok(summary.estimate(0))
}

/// Estimates `v₀(x,t) = E_{x,t}[y_τ 1{τ<T}]`.
pub fn mc_v0<S: Scalar>(x: S, t: S, params: &ProblemParams<S>, cfg: &McConfig<S>) -> Result<McEstimate<S>> {
    require_regime(params, Regime::OutsideBall)?;
    cfg.validate()?;
    check_start(x, t, params.t_end(), params)?;
    let l = params.l();
    let summary: Summary<1> = reduce_paths(cfg.n_paths, |i| {
        let mut rng = path_rng(cfg.seed, i);
        match walk(x, t, params.t_end(), l, cfg.dt_sim, cfg.bridge_correction, &mut rng, |_, _, _, _| {}) {
            Some(e) => {
                let (y, clamped) = y_at_exit(e.time, params, cfg.dt_sim);
                PathOutcome { values: [y.f64()], exited: true, flagged: clamped }
            }
            None => PathOutcome { values: [0.0], exited: false, flagged: false },
        }
    });
    Ok(summary.estimate(0))
}

/// Field value for a path functional; times past the stored rows are read
/// from the last row. On the last row the corner nodes carry lateral data,
/// not terminal data, so `x` is kept between the first and last interior
/// nodes there.
#[inline]
fn field_at<S: Scalar>(field: &Field<S>, x: S, t: S) -> Result<S> {
    let t_max = field.t_max();
    if t >= t_max {
        let g = field.grid();
        return field.interp(x.max(g.x(1)).min(g.x(g.nx())), t_max);
    }
    field.interp(x, t)
}

/// Both representations on the same draws: index 0 is the multiplicative
/// functional, index 1 the additive one.
fn mc_u_pair<S: Scalar>(
    x: S,
    t: S,
    field: &Field<S>,
    params: &ProblemParams<S>,
    cfg: &McConfig<S>,
) -> Result<Summary<2>> {
    require_regime(params, Regime::OutsideBall)?;
    cfg.validate()?;
    check_start(x, t, params.t_end(), params)?;
    field_at(field, x, t)?;
    let l = params.l();
    let q = params.q();
    let qm1 = q - S::one();
    let half = S::lit(0.5);
    Ok(reduce_paths(cfg.n_paths, |i| {
        let mut rng = path_rng(cfg.seed, i);
        // Running integrals of u^{q-1} and u^q, and the last node (t, u).
        let (mut int_m, mut int_a) = (S::zero(), S::zero());
        let mut last = (t, S::zero(), S::zero());
        let exit = walk(x, t, params.t_end(), l, cfg.dt_sim, cfg.bridge_correction, &mut rng, |k, tk, xk, _| {
            let u = field_at(field, xk, tk).unwrap_or(S::zero()).max(S::zero());
            let (gm, ga) = (u.powf(qm1), u.powf(q));
            if k > 0 {
                int_m = int_m + half * (last.1 + gm) * (tk - last.0);
                int_a = int_a + half * (last.2 + ga) * (tk - last.0);
            }
            last = (tk, gm, ga);
        });
        match exit {
            Some(e) => {
                let (y, clamped) = y_at_exit(e.time, params, cfg.dt_sim);
                let u = field_at(field, e.at, e.time).unwrap_or(y).max(S::zero());
                let h = e.time - last.0;
                let total_m = int_m + half * (last.1 + u.powf(qm1)) * h;
                let total_a = int_a + half * (last.2 + u.powf(q)) * h;
                PathOutcome {
                    values: [((-total_m).exp() * y).f64(), (y - total_a).f64()],
                    exited: true,
                    flagged: clamped,
                }
            }
            None => PathOutcome { values: [0.0, (-int_a).f64()], exited: false, flagged: false },
        }
    }))
}

/// Estimates `E_{x,t}[exp(−∫_t^τ u^{q−1}(W_s,s)ds) y_τ 1{τ<T}]`.
pub fn mc_u_multiplicative<S: Scalar>(
    x: S,
    t: S,
    field_u: &Field<S>,
    params: &ProblemParams<S>,
    cfg: &McConfig<S>,
) -> Result<McEstimate<S>> {
    Ok(mc_u_pair(x, t, field_u, params, cfg)?.estimate(0))
}

/// Estimates `E_{x,t}[−∫_t^{τ∧T} u^q(W_s,s)ds + y_τ 1{τ<T}]`.
pub fn mc_u_additive<S: Scalar>(
    x: S,
    t: S,
    field_u: &Field<S>,
    params: &ProblemParams<S>,
    cfg: &McConfig<S>,
) -> Result<McEstimate<S>> {
    Ok(mc_u_pair(x, t, field_u, params, cfg)?.estimate(1))
}

/// Multiplicative and additive estimates from one set of paths.
pub fn mc_u_both<S: Scalar>(
    x: S,
    t: S,
    field_u: &Field<S>,
    params: &ProblemParams<S>,
    cfg: &McConfig<S>,
) -> Result<(McEstimate<S>, McEstimate<S>)> {
    let s = mc_u_pair(x, t, field_u, params, cfg)?;
    Ok((s.estimate(0), s.estimate(1)))
}

/// Estimates `E_{x,t}[exp(−∫_t^{T−1/n} ū_n^{q−1}) y_{T−2/n} 1{τ ≥ T−1/n}]`.
pub fn mc_ubar<S: Scalar>(
    x: S,
    t: S,
    n: u64,
    field_ubar_n: &Field<S>,
    params: &ProblemParams<S>,
    cfg: &McConfig<S>,
) -> Result<McEstimate<S>> {
    require_regime(params, Regime::InsideBall)?;
    cfg.validate()?;
    let inv = S::one() / S::lit(n as f64);
    let horizon = params.t_end() - inv;
    check_start(x, t, horizon, params)?;
    field_at(field_ubar_n, x, t)?;
    let l = params.l();
    let power = params.q() - S::one();
    let terminal = params.y_of_gap(S::lit(2.0) * inv);
    let half = S::lit(0.5);
    let summary: Summary<1> = reduce_paths(cfg.n_paths, |i| {
        let mut rng = path_rng(cfg.seed, i);
        let mut integral = S::zero();
        let mut last = (t, S::zero());
        let exit = walk(x, t, horizon, l, cfg.dt_sim, cfg.bridge_correction, &mut rng, |k, tk, xk, _| {
            let g = field_at(field_ubar_n, xk, tk).unwrap_or(S::zero()).max(S::zero()).powf(power);
            if k > 0 {
                integral = integral + half * (last.1 + g) * (tk - last.0);
            }
            last = (tk, g);
        });
        match exit {
            Some(_) => PathOutcome { values: [0.0], exited: true, flagged: false },
            None => PathOutcome { values: [((-integral).exp() * terminal).f64()], exited: false, flagged: false },
        }
    });
    Ok(summary.estimate(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::{exit_cdf, Truncation};
    use crate::pde::{solve_ubar_n, Grid};

    fn outside() -> ProblemParams<f64> {
        ProblemParams::new(3.0, 3.0, 1.0, Regime::OutsideBall).unwrap()
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let p = outside();
        let cfg = McConfig::new(2000, 0.01, 11);
        let a = mc_v0(1.5, 0.0, &p, &cfg).unwrap();
        let b = mc_v0(1.5, 0.0, &p, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_field_reduces_to_v0() {
        let p = outside();
        let g = Grid::from_steps(p, 0.1, 0.01).unwrap();
        let mut zero = crate::pde::solve_linear_v0(&g).unwrap();
        zero.values.iter_mut().for_each(|v| *v = 0.0);
        let cfg = McConfig::new(3000, 0.01, 5);
        let base = mc_v0(1.0, 0.2, &p, &cfg).unwrap();
        let mult = mc_u_multiplicative(1.0, 0.2, &zero, &p, &cfg).unwrap();
        let add = mc_u_additive(1.0, 0.2, &zero, &p, &cfg).unwrap();
        assert_eq!(base.mean, mult.mean);
        assert_eq!(base.mean, add.mean);
    }

    #[test]
    fn start_near_edge_exits_immediately() {
        let p = outside();
        let cfg = McConfig::new(4000, 1e-3, 2);
        let est = mc_v0(3e-3, 0.3, &p, &cfg).unwrap();
        let y = p.y(0.3).unwrap();
        assert!((est.mean - y).abs() < 3.0 * est.std_error + 0.02, "{est:?} vs {y}");
    }

    #[test]
    fn ubar_with_zero_field_is_scaled_survival() {
        let p = ProblemParams::new(2.0, 2.0, 1.0, Regime::InsideBall).unwrap();
        let g = Grid::from_steps(p, 0.1, 0.01).unwrap();
        let mut zero = solve_ubar_n(50, &g).unwrap();
        zero.values.iter_mut().for_each(|v| *v = 0.0);
        let cfg = McConfig::new(20_000, 0.01, 3);
        let est = mc_ubar(1.0, 0.5, 50, &zero, &p, &cfg).unwrap();
        let surv = 1.0 - exit_cdf(1.0, 0.5, 0.98, &p, Truncation::default()).unwrap().value;
        let expect: f64 = p.y_of_gap(0.04) * surv;
        assert!((est.mean - expect).abs() < 3.0 * est.std_error, "{} {}", est.mean, expect);
    }

    #[test]
    fn rejects_bad_start() {
        let p = outside();
        let cfg = McConfig::new(10, 0.01, 1);
        assert!(mc_v0(0.0, 0.0, &p, &cfg).is_err());
        assert!(mc_v0(1.0, 1.0, &p, &cfg).is_err());
        assert!(mc_v0(1.0, 0.0, &p, &McConfig::new(0, 0.01, 1)).is_err());
    }
}
