//! Problem parameters, the blow-up curve, the mollifier and the boundary
//! family `ψ_{m,n}`.

use std::sync::OnceLock;

use crate::error::{domain, Error, Result};
use crate::quadrature::gauss_kronrod;
use crate::Scalar;

/// Which singular terminal condition is being solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `ξ = ∞` on paths that leave `(0, L)` before `T`, zero otherwise.
    OutsideBall,
    /// `ξ = ∞` on paths that stay in `(0, L)` up to `T`, zero otherwise.
    InsideBall,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::OutsideBall => "outside",
            Regime::InsideBall => "inside",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "outside" | "OutsideBall" | "xi1" => Ok(Regime::OutsideBall),
            "inside" | "InsideBall" | "xi2" => Ok(Regime::InsideBall),
            other => Err(Error::Parse(format!("unknown regime '{other}'"))),
        }
    }
}

/// One problem instance. The conjugate exponent `p` is always derived from `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams<S> {
    q: S,
    l: S,
    t_end: S,
    regime: Regime,
}

impl<S: Scalar> ProblemParams<S> {
    /// Validates and builds the parameters.
    pub fn new(q: S, l: S, t_end: S, regime: Regime) -> Result<Self> {
        if !(q > S::one()) {
            return domain(format!("q must exceed 1, got {q}"));
        }
        if regime == Regime::OutsideBall && !(q > S::lit(2.0)) {
            return Err(Error::Regime(format!("the outside-ball terminal condition requires q > 2, got q = {q}")));
        }
        if !(l > S::zero()) || !l.is_finite() {
            return domain(format!("L must be positive and finite, got {l}"));
        }
        if !(t_end > S::zero()) || !t_end.is_finite() {
            return domain(format!("T must be positive and finite, got {t_end}"));
        }
        Ok(Self { q, l, t_end, regime })
    }

    pub fn q(&self) -> S {
        self.q
    }

    pub fn p(&self) -> S {
        self.q / (self.q - S::one())
    }

    pub fn l(&self) -> S {
        self.l
    }

    pub fn t_end(&self) -> S {
        self.t_end
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// Same parameters with another regime (validated again).
    pub fn with_regime(&self, regime: Regime) -> Result<Self> {
        Self::new(self.q, self.l, self.t_end, regime)
    }

    /// `y` as a function of the remaining time `T - t`, which must be positive.
    #[inline]
    pub fn y_of_gap(&self, gap: S) -> S {
        ((self.q - S::one()) * gap).powf(S::one() - self.p())
    }

    /// The blow-up solution `y_t = ((q-1)(T-t))^{1-p}`.
    pub fn y(&self, t: S) -> Result<S> {
        blowup_solution(t, self)
    }

    /// `γ_{n,q} = (q-1)^{1-p} n^{p-1}`, the bound of the shifted solution.
    pub fn gamma(&self, n: u64) -> S {
        let p = self.p();
        (self.q - S::one()).powf(S::one() - p) * S::lit(n as f64).powf(p - S::one())
    }
}

/// Conjugate exponent `p = q/(q-1)`.
pub fn holder_conjugate<S: Scalar>(q: S) -> Result<S> {
    if !(q > S::one()) {
        return domain(format!("conjugate exponent needs q > 1, got {q}"));
    }
    Ok(q / (q - S::one()))
}

/// `y_t` for `0 ≤ t < T`.
pub fn blowup_solution<S: Scalar>(t: S, params: &ProblemParams<S>) -> Result<S> {
    if !(t < params.t_end) || t < S::zero() {
        return domain(format!("blow-up curve needs 0 <= t < T, got t = {t}"));
    }
    Ok(params.y_of_gap(params.t_end - t))
}

/// `y^{(n)}_t = y_{t - 1/n}`. Negative times are allowed: the curve extends
/// to the left of zero.
pub fn shifted_solution<S: Scalar>(t: S, n: u64, params: &ProblemParams<S>) -> Result<S> {
    if n == 0 {
        return domain("shift index n must be at least 1");
    }
    let gap = params.t_end - t + S::one() / S::lit(n as f64);
    if !(gap > S::zero()) {
        return domain(format!("shifted curve undefined at t = {t}, n = {n}"));
    }
    Ok(params.y_of_gap(gap))
}

fn bump(y: f64) -> f64 {
    let s = 4.0 * y * (1.0 - y);
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

const MOLLIFIER_TOL: f64 = 1e-12;

fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| gauss_kronrod(bump, 0.0, 1.0, MOLLIFIER_TOL, 200).value)
}

/// The mollifier `η`: 1 on `(-∞, 0]`, 0 on `[1, ∞)`, smooth and strictly
/// decreasing in between (normalised integral of a bump).
pub fn mollifier<S: Scalar>(x: S) -> S {
    let xf = x.f64();
    if !(xf > 0.0) {
        return S::one();
    }
    if xf >= 1.0 {
        return S::zero();
    }
    let mass = bump_mass();
    let v = if xf <= 0.5 {
        1.0 - gauss_kronrod(bump, 0.0, xf, MOLLIFIER_TOL, 200).value / mass
    } else {
        gauss_kronrod(bump, xf, 1.0, MOLLIFIER_TOL, 200).value / mass
    };
    S::lit(v.clamp(0.0, 1.0))
}

/// Smoothing and level indices of `ψ_{m,n}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundaryIndices {
    pub m: u64,
    pub n: u64,
}

impl BoundaryIndices {
    pub fn new(m: u64, n: u64) -> Self {
        Self { m, n }
    }

    /// Checks `m > max(2/L, 1)` and `n ≥ 1`.
    pub fn validate<S: Scalar>(&self, params: &ProblemParams<S>) -> Result<()> {
        let m = S::lit(self.m as f64);
        let bound = (S::lit(2.0) / params.l()).max(S::one());
        if !(m > bound) {
            return domain(format!("psi needs m > max(2/L, 1) = {bound}, got m = {}", self.m));
        }
        if self.n == 0 {
            return domain("psi needs n >= 1");
        }
        Ok(())
    }
}

/// Corner-mollified boundary data `ψ_{m,n}(x, t)`.
pub fn psi_mn<S: Scalar>(x: S, t: S, idx: BoundaryIndices, params: &ProblemParams<S>) -> Result<S> {
    idx.validate(params)?;
    let l = params.l();
    if x < S::zero() || x > l || t < S::zero() || t > params.t_end() {
        return domain(format!("psi evaluated outside [0,L]x[0,T] at ({x}, {t})"));
    }
    let y = shifted_solution(t, idx.n, params)?;
    let m = S::lit(idx.m as f64);
    let half = S::lit(0.5);
    let left_arg = (m * m * x - S::one()) / (m - S::one());
    let right_arg = (m * m * (l - x) - S::one()) / (m - S::one());
    let mut v = S::zero();
    if left_arg < S::one() {
        v = v + y * (S::one() - x * m * half) * mollifier(left_arg);
    }
    if right_arg < S::one() {
        v = v + y * (S::one() - (l - x) * m * half) * mollifier(right_arg);
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(q: f64, l: f64, t: f64) -> ProblemParams<f64> {
        ProblemParams::new(q, l, t, Regime::OutsideBall).unwrap()
    }

    #[test]
    fn conjugate_examples() {
        assert_relative_eq!(holder_conjugate(2.0).unwrap(), 2.0);
        assert_relative_eq!(holder_conjugate(3.0).unwrap(), 1.5);
        assert_relative_eq!(holder_conjugate(1.25).unwrap(), 5.0, max_relative = 1e-14);
        assert!(holder_conjugate(1.0).is_err());
        assert!(holder_conjugate(0.5).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ProblemParams::new(2.0, 1.0, 1.0, Regime::OutsideBall).is_err());
        assert!(ProblemParams::new(1.5, 1.0, 1.0, Regime::InsideBall).is_ok());
        assert!(ProblemParams::new(1.0, 1.0, 1.0, Regime::InsideBall).is_err());
        assert!(ProblemParams::new(3.0, 0.0, 1.0, Regime::OutsideBall).is_err());
        assert!(ProblemParams::new(3.0, 1.0, -1.0, Regime::OutsideBall).is_err());
        let p = params(3.0, 1.0, 1.0);
        assert_relative_eq!(1.0 / p.p() + 1.0 / p.q(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn blowup_examples() {
        let p = params(3.0, 1.0, 1.0);
        assert_relative_eq!(p.y(0.5).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(p.y(0.0).unwrap(), 0.707_106_781_186_547_5, max_relative = 1e-14);
        let p2 = ProblemParams::new(2.0, 1.0, 1.0, Regime::InsideBall).unwrap();
        assert_relative_eq!(p2.y(0.9).unwrap(), 10.0, max_relative = 1e-12);
        assert!(p.y(1.0).is_err());
        assert!(p.y(1.5).is_err());
    }

    #[test]
    fn shifted_examples() {
        let p = params(3.0, 1.0, 1.0);
        assert_relative_eq!(shifted_solution(1.0, 2, &p).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(shifted_solution(1.0, 50, &p).unwrap(), 5.0, max_relative = 1e-12);
        assert_relative_eq!(p.gamma(50), 5.0, max_relative = 1e-12);
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            assert!(shifted_solution(t, 50, &p).unwrap() <= p.gamma(50) * (1.0 + 1e-14));
        }
        assert!(shifted_solution(1.0, 0, &p).is_err());
    }

    #[test]
    fn mollifier_plateaus_and_midpoint() {
        assert_eq!(mollifier(-3.0), 1.0);
        assert_eq!(mollifier(0.0), 1.0);
        assert_eq!(mollifier(1.0), 0.0);
        assert_eq!(mollifier(7.0), 0.0);
        assert!((mollifier(0.5f64) - 0.5).abs() < 1e-12);
        assert!(mollifier(0.25) > mollifier(0.3));
        assert!((mollifier(0.2f64) + mollifier(0.8f64) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psi_examples() {
        let p = params(3.0, 3.0, 1.0);
        let idx = BoundaryIndices::new(10, 50);
        for &t in &[0.0, 0.3, 1.0] {
            let y = shifted_solution(t, 50, &p).unwrap();
            assert_relative_eq!(psi_mn(0.0, t, idx, &p).unwrap(), y, max_relative = 1e-14);
            assert_relative_eq!(psi_mn(3.0, t, idx, &p).unwrap(), y, max_relative = 1e-14);
            assert_eq!(psi_mn(1.5, t, idx, &p).unwrap(), 0.0);
        }
        assert!(psi_mn(0.0, 0.0, BoundaryIndices::new(1, 5), &p).is_err());
        assert!(psi_mn(-0.1, 0.0, idx, &p).is_err());
    }

    #[test]
    fn psi_symmetric() {
        let p = params(3.0, 3.0, 1.0);
        let idx = BoundaryIndices::new(3, 8);
        for i in 0..=30 {
            let x = i as f64 * 0.1;
            let a = psi_mn(x, 0.4, idx, &p).unwrap();
            let b = psi_mn(3.0 - x, 0.4, idx, &p).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ode_satisfied() {
        let p = params(3.0, 1.0, 1.0);
        let h = 1e-4;
        for k in 1..=80 {
            let t = k as f64 * 0.01;
            let d = (p.y(t + h).unwrap() - p.y(t - h).unwrap()) / (2.0 * h);
            let y = p.y(t).unwrap();
            assert_relative_eq!(d, y.powf(3.0), max_relative = 1e-6);
        }
    }
}
