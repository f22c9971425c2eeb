//! The control problem attached to the BSDE: drive a position `C` to zero
//! at rate `α` with running cost `(p−1)^{p−1}|α|^p` and terminal penalty
//! `ξ|C_T|^p`. Its value is `|c|^p Y_t`.

use std::fmt::Write as _;

use crate::bsde::{simulate_path_from, SamplePath};
use crate::error::{domain, Result};
use crate::feynman_kac::{mc_exit_probability, McConfig};
use crate::model::{ProblemParams, Regime};
use crate::pde::Field;
use crate::stats::{reduce_paths, McEstimate, PathOutcome};
use crate::Scalar;

/// A control `α` and the position `C_u = c + ∫_t^u α ds` on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlState<S> {
    pub c: S,
    pub t: S,
    pub times: Vec<S>,
    pub alpha: Vec<S>,
    pub position: Vec<S>,
    /// Set when the path's `Y` was capped near `T`, so `C_T` is only small,
    /// not zero.
    pub clamped: bool,
}

/// `V(c, t) = |c|^p Y_t`.
pub fn value_function<S: Scalar>(c: S, y_t: S, params: &ProblemParams<S>) -> Result<S> {
    if !(y_t >= S::zero()) {
        return domain(format!("Y_t = {y_t} must be nonnegative"));
    }
    if c == S::zero() {
        return Ok(S::zero());
    }
    Ok(c.abs().powf(params.p()) * y_t)
}

/// Optimal feedback along a sampled path:
/// `C_u = c·exp(−(q−1)∫_t^u Y^{q−1} ds)` (trapezoid in the exponent) and
/// `α = −(q−1)·C·Y^{q−1}`.
pub fn optimal_control_path<S: Scalar>(path: &SamplePath<S>, c: S, params: &ProblemParams<S>) -> ControlState<S> {
    let qm1 = params.q() - S::one();
    let half = S::lit(0.5);
    let rate: Vec<S> = path.y.iter().map(|&y| qm1 * y.max(S::zero()).powf(qm1)).collect();
    let mut position = Vec::with_capacity(path.len());
    let mut exponent = S::zero();
    position.push(c);
    for k in 1..path.len() {
        let h = path.times[k] - path.times[k - 1];
        exponent = exponent + half * (rate[k - 1] + rate[k]) * h;
        position.push(c * (-exponent).exp());
    }
    let alpha = position.iter().zip(&rate).map(|(&x, &r)| -r * x).collect();
    ControlState { c, t: path.times[0], times: path.times.clone(), alpha, position, clamped: path.capped }
}

impl<S: Scalar> ControlState<S> {
    /// Largest `|(C_{k+1} − C_k)/h − α_k|` over the grid.
    pub fn feedback_defect(&self) -> S {
        let mut d = S::zero();
        for k in 0..self.times.len().saturating_sub(1) {
            let h = self.times[k + 1] - self.times[k];
            d = d.max(((self.position[k + 1] - self.position[k]) / h - self.alpha[k]).abs());
        }
        d
    }

    /// CSV with columns `t,alpha,C`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,alpha,C\n");
        for k in 0..self.times.len() {
            let _ = writeln!(out, "{:?},{:?},{:?}", self.times[k], self.alpha[k], self.position[k]);
        }
        out
    }
}

/// Cost of the optimal control on one path started at `(x0, t)` with
/// position `c`. Before the exit the running cost `(q−1)C^pY^q` is
/// integrated by the trapezoid rule, the exit node being `(τ, y_τ)` or
/// `(τ, 0)`. After the exit the outside regime uses the closed-form
/// segment `C_s = C_τ(T−s)/(T−τ)` with cost `C_τ^p y_τ` and `C_T = 0`; the
/// inside regime has `Y = α = 0`. Returns `None` when the terminal penalty is
/// infinite.
fn optimal_cost<S: Scalar>(path: &SamplePath<S>, c: S, params: &ProblemParams<S>) -> Option<S> {
    let q = params.q();
    let p = params.p();
    let qm1 = q - S::one();
    let half = S::lit(0.5);
    let c = c.abs();
    let last = path.last_pre_exit();
    let mut exponent = S::zero();
    let mut cost = S::zero();
    let mut prev_rate = qm1 * path.y[0].powf(qm1);
    let mut prev_run = qm1 * c.powf(p) * path.y[0].powf(q);
    let mut pos = c;
    for k in 1..=last {
        let h = path.times[k] - path.times[k - 1];
        let y = path.y[k];
        let rate = qm1 * y.powf(qm1);
        exponent = exponent + half * (prev_rate + rate) * h;
        pos = c * (-exponent).exp();
        let run = qm1 * pos.powf(p) * y.powf(q);
        cost = cost + half * (prev_run + run) * h;
        prev_rate = rate;
        prev_run = run;
    }
    match (path.tau, path.regime) {
        (Some(tau), Regime::OutsideBall) => {
            let h = tau - path.times[last];
            let y_tau = params.y_of_gap(params.t_end() - tau);
            let rate = qm1 * y_tau.powf(qm1);
            let pos_tau = c * (-(exponent + half * (prev_rate + rate) * h)).exp();
            let run = qm1 * pos_tau.powf(p) * y_tau.powf(q);
            cost = cost + half * (prev_run + run) * h;
            Some(cost + pos_tau.powf(p) * y_tau)
        }
        (Some(tau), Regime::InsideBall) => {
            let h = tau - path.times[last];
            Some(cost + half * prev_run * h)
        }
        (None, Regime::OutsideBall) => Some(cost),
        (None, Regime::InsideBall) => {
            if pos == S::zero() {
                Some(cost)
            } else {
                None
            }
        }
    }
}

/// Outcome of the cost identity at one probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck<S> {
    pub x0: S,
    pub t: S,
    pub c: S,
    /// `|c|^p · V(x0, t)`.
    pub lhs: S,
    /// Monte Carlo cost of the optimal control.
    pub rhs: McEstimate<S>,
    /// `|lhs − rhs.mean|`.
    pub gap: S,
    /// Paths with an infinite terminal penalty (they invalidate `rhs`).
    pub n_infinite: usize,
    /// Cost of the constant-rate control `α = −c/(T−t)`: `|c|^p y_t`.
    pub constant_rate_cost: S,
    /// Cost of liquidating at rate `−2c/(T−t)` on the first half:
    /// `2^{p−1}|c|^p y_t`.
    pub bang_bang_cost: S,
}

/// Compares `|c|^p V(x0, t)` with the Monte Carlo cost of the optimal control.
pub fn cost_identity_check<S: Scalar>(
    x0: S,
    t: S,
    c: S,
    field: &Field<S>,
    params: &ProblemParams<S>,
    cfg: &McConfig<S>,
) -> Result<IdentityCheck<S>> {
    cfg.validate()?;
    let v = field.interp(x0, t.min(field.t_max()))?;
    let lhs = value_function(c, v.max(S::zero()), params)?;
    simulate_path_from(x0, t, field, params, cfg, 0)?;
    let summary = reduce_paths::<1, _>(cfg.n_paths, |i| {
        let path = simulate_path_from(x0, t, field, params, cfg, i).expect("validated inputs");
        match optimal_cost(&path, c, params) {
            Some(cost) => PathOutcome { values: [cost.f64()], exited: path.exited(), flagged: false },
            None => PathOutcome { values: [0.0], exited: path.exited(), flagged: true },
        }
    });
    let mut rhs: McEstimate<S> = summary.estimate(0);
    let n_infinite = rhs.n_flagged;
    if n_infinite > 0 {
        rhs.mean = S::infinity();
    }
    let cp = c.abs().powf(params.p());
    let y_t = params.y_of_gap(params.t_end() - t);
    Ok(IdentityCheck {
        x0,
        t,
        c,
        lhs,
        rhs,
        gap: (lhs - rhs.mean).abs(),
        n_infinite,
        constant_rate_cost: cp * y_t,
        bang_bang_cost: S::lit(2.0).powf(params.p() - S::one()) * cp * y_t,
    })
}

/// Monte Carlo probability of `{ξ = ∞}` against the value function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityBound<S> {
    pub x0: S,
    pub t: S,
    pub mc_prob: McEstimate<S>,
    /// `(p−1)^{p−1} P / (T−t)^{p−1}`.
    pub scaled: S,
    /// Standard error of `scaled`.
    pub scaled_se: S,
    /// `V(x0, t)`.
    pub field_value: S,
    /// `scaled / field_value`.
    pub ratio: S,
}

impl<S: Scalar> ProbabilityBound<S> {
    /// `scaled ≤ field_value + 3·SE`.
    pub fn holds(&self) -> bool {
        self.scaled <= self.field_value + S::lit(3.0) * self.scaled_se
    }
}

/// Estimates `P_t[ξ = ∞]` (exit before `T` in the outside regime, survival
/// in the inside regime) and compares it with the value function.
pub fn conditional_probability_bound<S: Scalar>(
    x0: S,
    t: S,
    field: &Field<S>,
    params: &ProblemParams<S>,
    cfg: &McConfig<S>,
) -> Result<ProbabilityBound<S>> {
    let exit = mc_exit_probability(x0, t, params.t_end(), params, cfg)?;
    let mc_prob = match params.regime() {
        Regime::OutsideBall => exit,
        Regime::InsideBall => McEstimate { mean: S::one() - exit.mean, ..exit },
    };
    let p = params.p();
    let factor = (p - S::one()).powf(p - S::one()) / (params.t_end() - t).powf(p - S::one());
    let field_value = field.interp(x0, t.min(field.t_max()))?;
    let scaled = factor * mc_prob.mean;
    Ok(ProbabilityBound {
        x0,
        t,
        mc_prob,
        scaled,
        scaled_se: factor * mc_prob.std_error,
        field_value,
        ratio: scaled / field_value,
    })
}

/// CSV of identity checks: `t,lhs,rhs,std_error`.
pub fn identity_csv<S: Scalar>(checks: &[IdentityCheck<S>]) -> String {
    let mut out = String::from("t,lhs,rhs,std_error\n");
    for c in checks {
        let _ = writeln!(out, "{:?},{:?},{:?},{:?}", c.t, c.lhs, c.rhs.mean, c.rhs.std_error);
    }
    out
}
