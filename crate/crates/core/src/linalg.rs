//! Tridiagonal kernels shared by the implicit stepper and the eigen-solver.

/// Solve `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]` in place
/// (Thomas algorithm, no pivoting). `lower[0]` and `upper[n-1]` are ignored.
/// Returns `false` on a zero pivot.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> bool {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut b = diag[0];
    if b == 0.0 || !b.is_finite() {
        return false;
    }
    rhs[0] /= b;
    for i in 1..n {
        c[i - 1] = upper[i - 1] / b;
        b = diag[i] - lower[i] * c[i - 1];
        if b == 0.0 || !b.is_finite() {
            return false;
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / b;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    true
}

/// Number of eigenvalues below `x` of the symmetric tridiagonal matrix
/// with diagonal `d` and off-diagonal `e` (Sturm sequence).
pub fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = d[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..d.len() {
        let prev = if q == 0.0 {
            f64::EPSILON * (d[i - 1].abs() + 1.0)
        } else {
            q
        };
        q = d[i] - x - e[i - 1] * e[i - 1] / prev;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}
