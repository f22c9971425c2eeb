//! Exit-time law and killed transition density of Brownian motion on `(0, L)`,
//! and the linear baseline `v₀(x,t) = E_{x,t}[y_τ 1{τ<T}]`.
//!
//! For `s - t ≤ L²/2` the method of images is used; for longer horizons the
//! sine (eigenfunction) expansion is used instead, which converges after a
//! handful of terms and does not suffer from cancellation.

use crate::error::{domain, Error, Result};
use crate::model::{ProblemParams, Regime};
use crate::quadrature::{gauss_kronrod, tanh_sinh};
use crate::Scalar;

/// Truncation actually used for a series evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesTruncation<S> {
    /// Image terms `|n| ≤ n_max`, or number of sine modes for long horizons.
    pub n_max: usize,
    /// Bound on the dropped terms.
    pub tail_bound: S,
}

/// A series value together with its truncation certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue<S> {
    pub value: S,
    pub trunc: SeriesTruncation<S>,
}

/// Requested accuracy of a series evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation<S> {
    pub tol: S,
}

impl<S: Scalar> Default for Truncation<S> {
    fn default() -> Self {
        Self { tol: S::lit(1e-14).max(S::epsilon()) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadScheme {
    TanhSinh,
    GaussLegendreComposite,
}

/// How `v₀` integrates over the exit time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec<S> {
    pub scheme: QuadScheme,
    pub abs_tol: S,
    /// Power of the endpoint singularity, `1 - p`.
    pub singularity_exponent: S,
}

impl<S: Scalar> QuadratureSpec<S> {
    pub fn for_params(params: &ProblemParams<S>) -> Self {
        Self { scheme: QuadScheme::TanhSinh, abs_tol: S::lit(1e-9), singularity_exponent: S::one() - params.p() }
    }

    pub fn validate(&self, params: &ProblemParams<S>) -> Result<()> {
        if !(self.abs_tol > S::zero()) {
            return domain("quadrature tolerance must be positive");
        }
        let e = self.singularity_exponent;
        if params.regime() == Regime::OutsideBall && !(e > -S::one() && e < S::zero()) {
            return domain(format!("singularity exponent {e} outside (-1, 0)"));
        }
        Ok(())
    }
}

const SPECTRAL_SWITCH: f64 = 0.5;
const MIN_IMAGES: usize = 8;
const MAX_TERMS: usize = 100_000;

fn use_spectral<S: Scalar>(gap: S, l: S) -> bool {
    gap > S::lit(SPECTRAL_SWITCH) * l * l
}

fn image_count<S: Scalar>(gap: S, l: S, tol: S) -> Result<(usize, S)> {
    let two = S::lit(2.0);
    let mut n = MIN_IMAGES;
    loop {
        let nl = S::usize(n) * l;
        // evaluated in log form: for tiny gaps the prefactor overflows
        let log_bound = two.ln() - nl * nl / (two * gap) + (nl + l).ln() - S::lit(1.5) * gap.ln();
        if log_bound <= tol.ln() {
            return Ok((n, log_bound.exp()));
        }
        n *= 2;
        if n > MAX_TERMS {
            return Err(Error::Domain(format!("series truncation failed for s-t = {gap}")));
        }
    }
}

/// Decay rate `π²(s-t)/(2L²)` of the first sine mode.
fn mode_rate<S: Scalar>(gap: S, l: S) -> S {
    S::PI() * S::PI() * gap / (S::lit(2.0) * l * l)
}

/// Number of sine modes and a bound on `Σ_{k>K} k^j e^{-a k²}` (j = 0 or 1).
fn mode_count<S: Scalar>(a: S, weight: S, linear: bool, tol: S) -> Result<(usize, S)> {
    let mut k = 1usize;
    loop {
        let kk = S::usize(k + 1);
        let e = (-a * kk * kk).exp();
        let bound = if linear {
            weight * e * (kk + S::one() / (S::lit(2.0) * a))
        } else {
            weight * e * (S::one() + S::one() / (S::lit(2.0) * a * kk))
        };
        if bound <= tol {
            return Ok((k, bound));
        }
        k += 1;
        if k > MAX_TERMS {
            return Err(Error::Domain("sine series truncation failed".into()));
        }
    }
}

/// `Φ(b) − Φ(a)` for `a ≤ b` without cancellation in the tails.
fn normal_mass<S: Scalar>(a: S, b: S) -> S {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let (a, b) = (a.f64(), b.f64());
    let v = if a >= 0.0 {
        0.5 * (libm::erfc(a * r) - libm::erfc(b * r))
    } else if b <= 0.0 {
        0.5 * (libm::erfc(-b * r) - libm::erfc(-a * r))
    } else {
        1.0 - 0.5 * libm::erfc(-a * r) - 0.5 * libm::erfc(b * r)
    };
    S::lit(v)
}

fn check_gap<S: Scalar>(t: S, s: S) -> Result<S> {
    if !(s > t) {
        return domain(format!("need s > t, got s = {s}, t = {t}"));
    }
    Ok(s - t)
}

fn check_x<S: Scalar>(x: S, l: S, open: bool) -> Result<()> {
    let ok = if open { x > S::zero() && x < l } else { x >= S::zero() && x <= l };
    if ok {
        Ok(())
    } else {
        domain(format!("position {x} outside the interval of width {l}"))
    }
}

/// Survival probability `P_{x}(τ > t + gap)` on `(0, l)`, interior `x`.
pub(crate) fn survival_gap<S: Scalar>(x: S, gap: S, l: S, tol: S) -> Result<SeriesValue<S>> {
    if use_spectral(gap, l) {
        let a = mode_rate(gap, l);
        let w = S::lit(4.0) / S::PI();
        let (k_max, tail) = mode_count(a, w, false, tol)?;
        let mut sum = S::zero();
        let mut k = 1;
        while k <= k_max {
            let kk = S::usize(k);
            sum = sum + w / kk * (kk * S::PI() * x / l).sin() * (-a * kk * kk).exp();
            k += 2;
        }
        return Ok(SeriesValue {
            value: sum.max(S::zero()).min(S::one()),
            trunc: SeriesTruncation { n_max: k_max, tail_bound: tail },
        });
    }
    let (n_max, tail) = image_count(gap, l, tol)?;
    let sigma = gap.sqrt();
    let mut sum = S::zero();
    for n in -(n_max as i64)..=(n_max as i64) {
        let nn = S::lit(n as f64);
        let two_n = S::lit(2.0) * nn;
        let a0 = (two_n * l - x) / sigma;
        let a1 = ((two_n + S::one()) * l - x) / sigma;
        let a2 = ((two_n + S::lit(2.0)) * l - x) / sigma;
        sum = sum + normal_mass(a0, a1) - normal_mass(a1, a2);
    }
    Ok(SeriesValue { value: sum.max(S::zero()).min(S::one()), trunc: SeriesTruncation { n_max, tail_bound: tail } })
}

/// Density of the exit time at `t + gap`, interior `x`.
pub(crate) fn exit_density_gap<S: Scalar>(x: S, gap: S, l: S, tol: S) -> Result<SeriesValue<S>> {
    let two = S::lit(2.0);
    if use_spectral(gap, l) {
        let a = mode_rate(gap, l);
        let w = two * S::PI() / (l * l);
        let (k_max, tail) = mode_count(a, w, true, tol)?;
        let mut sum = S::zero();
        let mut k = 1;
        while k <= k_max {
            let kk = S::usize(k);
            sum = sum + w * kk * (kk * S::PI() * x / l).sin() * (-a * kk * kk).exp();
            k += 2;
        }
        return Ok(SeriesValue {
            value: sum.max(S::zero()),
            trunc: SeriesTruncation { n_max: k_max, tail_bound: tail },
        });
    }
    let (n_max, tail) = image_count(gap, l, tol)?;
    let mut sum = S::zero();
    for n in -(n_max as i64)..=(n_max as i64) {
        let two_n = two * S::lit(n as f64);
        let b1 = (two_n + S::one()) * l - x;
        let b0 = two_n * l - x;
        sum = sum + b1 * (-(b1 * b1) / (two * gap)).exp() - b0 * (-(b0 * b0) / (two * gap)).exp();
    }
    let norm = S::one() / ((two * S::PI()).sqrt() * gap.powf(S::lit(1.5)));
    Ok(SeriesValue { value: (sum * norm).max(S::zero()), trunc: SeriesTruncation { n_max, tail_bound: tail } })
}

/// Killed transition density at `a` after `gap`, interior `x` and `a`.
pub(crate) fn constrained_density_gap<S: Scalar>(x: S, gap: S, a: S, l: S, tol: S) -> Result<SeriesValue<S>> {
    let two = S::lit(2.0);
    if use_spectral(gap, l) {
        let r = mode_rate(gap, l);
        let w = two / l;
        let (k_max, tail) = mode_count(r, w, false, tol)?;
        let mut sum = S::zero();
        for k in 1..=k_max {
            let kk = S::usize(k);
            let phase = kk * S::PI() / l;
            sum = sum + w * (phase * x).sin() * (phase * a).sin() * (-r * kk * kk).exp();
        }
        return Ok(SeriesValue {
            value: sum.max(S::zero()),
            trunc: SeriesTruncation { n_max: k_max, tail_bound: tail },
        });
    }
    let (n_max, tail) = image_count(gap, l, tol)?;
    let mut sum = S::zero();
    for n in -(n_max as i64)..=(n_max as i64) {
        let two_nl = two * S::lit(n as f64) * l;
        let d1 = a + two_nl - x;
        let d2 = two_nl - a - x;
        sum = sum + (-(d1 * d1) / (two * gap)).exp() - (-(d2 * d2) / (two * gap)).exp();
    }
    let norm = S::one() / (two * S::PI() * gap).sqrt();
    Ok(SeriesValue { value: (sum * norm).max(S::zero()), trunc: SeriesTruncation { n_max, tail_bound: tail } })
}

/// `P_{x,t}(τ ≤ s)`.
pub fn exit_cdf<S: Scalar>(
    x: S,
    t: S,
    s: S,
    params: &ProblemParams<S>,
    trunc: Truncation<S>,
) -> Result<SeriesValue<S>> {
    let gap = check_gap(t, s)?;
    let l = params.l();
    check_x(x, l, false)?;
    if x == S::zero() || x == l {
        return Ok(SeriesValue { value: S::one(), trunc: SeriesTruncation { n_max: 0, tail_bound: S::zero() } });
    }
    let sv = survival_gap(x, gap, l, trunc.tol)?;
    Ok(SeriesValue { value: S::one() - sv.value, trunc: sv.trunc })
}

/// Density `f_τ(x,t,s)` of the first exit time from `(0, L)`.
pub fn exit_density<S: Scalar>(
    x: S,
    t: S,
    s: S,
    params: &ProblemParams<S>,
    trunc: Truncation<S>,
) -> Result<SeriesValue<S>> {
    let gap = check_gap(t, s)?;
    check_x(x, params.l(), true)?;
    exit_density_gap(x, gap, params.l(), trunc.tol)
}

/// Sub-probability density `f_W(x,t,s,a)` of `W_s` at `a` on `{τ > s}`.
pub fn constrained_density<S: Scalar>(
    x: S,
    t: S,
    s: S,
    a: S,
    params: &ProblemParams<S>,
    trunc: Truncation<S>,
) -> Result<SeriesValue<S>> {
    let gap = check_gap(t, s)?;
    check_x(x, params.l(), true)?;
    check_x(a, params.l(), true)?;
    constrained_density_gap(x, gap, a, params.l(), trunc.tol)
}

/// `v₀(x,t) = ∫_t^T f_τ(x,t,s) y_s ds`.
pub fn v0<S: Scalar>(
    x: S,
    t: S,
    params: &ProblemParams<S>,
    quad: QuadratureSpec<S>,
    trunc: Truncation<S>,
) -> Result<S> {
    if params.regime() != Regime::OutsideBall {
        return Err(Error::Regime("v0 is defined for the outside-ball condition (q > 2)".into()));
    }
    quad.validate(params)?;
    let l = params.l();
    let t_end = params.t_end();
    check_x(x, l, false)?;
    if t < S::zero() || t > t_end {
        return domain(format!("time {t} outside [0, T]"));
    }
    let on_edge = x == S::zero() || x == l;
    if t == t_end {
        if on_edge {
            return domain("v0 is undefined at the corners (0,T) and (L,T)");
        }
        return Ok(S::zero());
    }
    if on_edge {
        return params.y(t);
    }
    let width = t_end - t;
    let mut failure = None;
    let value = match quad.scheme {
        QuadScheme::TanhSinh => {
            tanh_sinh(
                |_s, dl, dr| match exit_density_gap(x, dl, l, trunc.tol) {
                    Ok(f) => f.value * params.y_of_gap(dr),
                    Err(e) => {
                        failure = Some(e);
                        S::zero()
                    }
                },
                t,
                t_end,
                quad.abs_tol,
            )
            .value
        }
        QuadScheme::GaussLegendreComposite => {
            // s = T - width·u²: the endpoint power becomes u^{3-2p}.
            let two = S::lit(2.0);
            gauss_kronrod(
                |u: S| {
                    let dr = width * u * u;
                    let dl = width - dr;
                    if dl <= S::zero() || dr <= S::zero() {
                        return S::zero();
                    }
                    match exit_density_gap(x, dl, l, trunc.tol) {
                        Ok(f) => f.value * params.y_of_gap(dr) * two * width * u,
                        Err(e) => {
                            failure = Some(e);
                            S::zero()
                        }
                    }
                },
                S::zero(),
                S::one(),
                quad.abs_tol,
                2000,
            )
            .value
        }
    };
    match failure {
        Some(e) => Err(e),
        None => Ok(value),
    }
}
