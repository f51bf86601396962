//! Dense symmetric-positive-definite linear algebra for the residual GP:
//! Cholesky factorization, triangular solves, and log-determinant. Matrices
//! are row-major `Vec<f64>`; sizes top out at the GP's subsample cap, so a
//! textbook O(n^3/6) factorization is plenty.

/// Lower Cholesky factor L with A = L L^T, or None when a pivot is
/// non-positive or non-finite (A not positive definite).
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0 && d.is_finite()) {
            return None;
        }
        let dj = d.sqrt();
        l[j * n + j] = dj;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / dj;
        }
    }
    Some(l)
}

/// Forward substitution: solve L y = b.
pub fn solve_lower(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(b.len(), n);
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    y
}

/// Back substitution: solve L^T x = y.
pub fn solve_lower_transpose(l: &[f64], n: usize, y: &[f64]) -> Vec<f64> {
    debug_assert_eq!(y.len(), n);
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

/// Solve (L L^T) x = b given the Cholesky factor.
pub fn solve_spd(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    solve_lower_transpose(l, n, &solve_lower(l, n, b))
}

/// ln det(L L^T) = 2 * sum ln L_jj.
pub fn logdet_from_chol(l: &[f64], n: usize) -> f64 {
    (0..n).map(|j| l[j * n + j].ln()).sum::<f64>() * 2.0
}
