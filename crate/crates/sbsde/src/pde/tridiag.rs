use crate::Scalar;

/// Thomas algorithm for `sub[i]·x[i-1] + diag[i]·x[i] + sup[i]·x[i+1] = rhs[i]`.
///
/// `sub[0]` and `sup[n-1]` are ignored. The matrix must not need pivoting
/// (diagonally dominant systems are fine). The solution overwrites `rhs`.
pub fn solve_tridiagonal<S: Scalar>(sub: &[S], diag: &[S], sup: &[S], rhs: &mut [S], scratch: &mut Vec<S>) {
    let n = diag.len();
    debug_assert!(sub.len() == n && sup.len() == n && rhs.len() == n);
    if n == 0 {
        return;
    }
    scratch.clear();
    scratch.resize(n, S::zero());
    let mut beta = diag[0];
    rhs[0] = rhs[0] / beta;
    for i in 1..n {
        scratch[i] = sup[i - 1] / beta;
        beta = diag[i] - sub[i] * scratch[i];
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] = rhs[i] - scratch[i + 1] * rhs[i + 1];
    }
}
