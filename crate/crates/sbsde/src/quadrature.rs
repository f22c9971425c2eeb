//! Numerical integration: adaptive Gauss–Kronrod and tanh-sinh.

use crate::Scalar;

/// Result of a quadrature with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad<S> {
    pub value: S,
    pub error: S,
    pub evaluations: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15<S: Scalar, F: FnMut(S) -> S>(f: &mut F, a: S, b: S) -> (S, S) {
    let half = S::lit(0.5);
    let c = (a + b) * half;
    let h = (b - a) * half;
    let fc = f(c);
    let mut kron = fc * S::lit(WGK[7]);
    let mut gauss = fc * S::lit(WG[3]);
    for j in 0..7 {
        let dx = h * S::lit(XGK[j]);
        let s = f(c - dx) + f(c + dx);
        kron = kron + s * S::lit(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + s * S::lit(WG[j / 2]);
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive Gauss–Kronrod (7/15) on `[a, b]`.
///
/// Subdivides the interval with the largest error estimate until the summed
/// estimate falls below `abs_tol` or `max_intervals` is reached.
pub fn gauss_kronrod<S: Scalar, F: FnMut(S) -> S>(mut f: F, a: S, b: S, abs_tol: S, max_intervals: usize) -> Quad<S> {
    let mut parts = vec![{
        let (v, e) = gk15(&mut f, a, b);
        (a, b, v, e)
    }];
    let mut evaluations = 15;
    loop {
        let total_err: S = parts.iter().map(|p| p.3).sum();
        if total_err <= abs_tol || parts.len() >= max_intervals {
            break;
        }
        let (idx, _) =
            parts.iter().enumerate().fold((0, S::zero()), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (lo, hi, _, _) = parts.swap_remove(idx);
        let mid = (lo + hi) * S::lit(0.5);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        evaluations += 30;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    parts.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
    Quad { value: parts.iter().map(|p| p.2).sum(), error: parts.iter().map(|p| p.3).sum(), evaluations }
}

/// Tanh-sinh quadrature on `(a, b)`.
///
/// The integrand receives `(x, x - a, b - x)`; the two distances are computed
/// without cancellation so that endpoint singularities such as `(b - x)^{-1/2}`
/// can be evaluated accurately right up to the endpoint.
pub fn tanh_sinh<S: Scalar, F: FnMut(S, S, S) -> S>(mut f: F, a: S, b: S, abs_tol: S) -> Quad<S> {
    let half_width = (b - a) * S::lit(0.5);
    let centre = a + half_width;
    let pi_2 = S::FRAC_PI_2();
    let t_max = S::lit(6.5);
    let two = S::lit(2.0);
    let mut evaluations = 0;

    // Contribution of the abscissa pair at ±t.
    let mut pair = |t: S, evaluations: &mut usize| -> S {
        let u = pi_2 * t.sinh();
        let e = (-two * u).exp();
        let dist = half_width * two * e / (S::one() + e);
        if t == S::zero() {
            *evaluations += 1;
            return f(centre, half_width, half_width);
        }
        if dist <= S::zero() {
            return S::zero();
        }
        let w = half_width * pi_2 * t.cosh() * S::lit(4.0) * e / ((S::one() + e) * (S::one() + e));
        let right = f(b - dist, two * half_width - dist, dist);
        let left = f(a + dist, dist, two * half_width - dist);
        *evaluations += 2;
        w * (left + right)
    };

    let mut h = S::one();
    let mut sum = half_width * pi_2 * pair(S::zero(), &mut evaluations);
    let mut k = 1;
    while S::usize(k) * h <= t_max {
        sum = sum + pair(S::usize(k) * h, &mut evaluations);
        k += 1;
    }
    let mut estimate = sum * h;
    let mut error = S::infinity();
    for level in 1..=12 {
        h = h * S::lit(0.5);
        let mut k = 1;
        let mut add = S::zero();
        while S::usize(k) * h <= t_max {
            add = add + pair(S::usize(k) * h, &mut evaluations);
            k += 2;
        }
        sum = sum + add;
        let next = sum * h;
        error = (next - estimate).abs();
        estimate = next;
        if level >= 3 && error <= abs_tol {
            break;
        }
    }
    Quad { value: estimate, error, evaluations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_kronrod_polynomial_exact() {
        let q = gauss_kronrod(|x: f64| x.powi(5) - 3.0 * x * x, 0.0, 2.0, 1e-14, 50);
        assert_abs_diff_eq!(q.value, 64.0 / 6.0 - 8.0, epsilon = 1e-13);
    }

    #[test]
    fn gauss_kronrod_smooth() {
        let q = gauss_kronrod(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-13, 100);
        assert_abs_diff_eq!(q.value, 2.0, epsilon = 1e-13);
    }

    #[test]
    fn tanh_sinh_inverse_sqrt_endpoint() {
        // ∫_0^1 (1-x)^{-1/2} dx = 2
        let q = tanh_sinh(|_x: f64, _l, r: f64| r.powf(-0.5), 0.0, 1.0, 1e-12);
        assert_abs_diff_eq!(q.value, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn tanh_sinh_log_endpoint() {
        // ∫_0^1 ln x dx = -1
        let q = tanh_sinh(|_x: f64, l: f64, _r| l.ln(), 0.0, 1.0, 1e-12);
        assert_abs_diff_eq!(q.value, -1.0, epsilon = 1e-10);
    }

    #[test]
    fn tanh_sinh_f32() {
        let q = tanh_sinh(|x: f32, _l, _r| x * x, -1.0f32, 1.0, 1e-5);
        assert!((q.value - 2.0 / 3.0).abs() < 1e-5);
    }
}
