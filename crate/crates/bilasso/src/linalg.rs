//! Dense linear-algebra helpers shared by the sampler and the
//! marginal-likelihood surface: LAPACK Cholesky with a jitter-then-fail
//! retry policy, triangular substitution, and power iteration.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use ndarray_linalg::{Cholesky, UPLO};

use crate::error::{Error, Result};

/// Lower Cholesky factor of a symmetric positive definite matrix. On
/// failure, adds jitter 1e-10·trace(M)/d to the diagonal and retries once
/// before failing with a conditioning error.
pub fn cholesky_jitter(m: &Array2<f64>) -> Result<Array2<f64>> {
    if let Ok(l) = m.cholesky(UPLO::Lower) {
        return Ok(l);
    }
    let d = m.nrows();
    let jitter = 1e-10 * m.diag().sum() / d as f64;
    let mut jittered = m.clone();
    for i in 0..d {
        jittered[[i, i]] += jitter;
    }
    jittered.cholesky(UPLO::Lower).map_err(|e| {
        Error::IllConditioned(format!(
            "Cholesky failed even after jitter {jitter:.3e}: {e}"
        ))
    })
}

/// Forward substitution: solve L x = b with L lower triangular.
pub fn solve_lower(l: &Array2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let n = b.len();
    let mut x = b.to_owned();
    for i in 0..n {
        let mut s = x[i];
        for j in 0..i {
            s -= l[[i, j]] * x[j];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Back substitution: solve Lᵀ x = b with L lower triangular.
pub fn solve_lower_transpose(l: &Array2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let n = b.len();
    let mut x = b.to_owned();
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in (i + 1)..n {
            s -= l[[j, i]] * x[j];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Solve (L Lᵀ) x = b.
pub fn chol_solve(l: &Array2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    solve_lower_transpose(l, solve_lower(l, b).view())
}

/// log|M| from its lower Cholesky factor.
pub fn log_det_from_chol(l: &Array2<f64>) -> f64 {
    2.0 * l.diag().iter().map(|v| v.ln()).sum::<f64>()
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by
/// power iteration.
pub fn largest_eigenvalue_sym(m: ArrayView2<f64>, max_iters: usize, tol: f64) -> f64 {
    let n = m.nrows();
    let mut v = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..max_iters {
        let mv = m.dot(&v);
        let norm = mv.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = &mv / norm;
        let lambda_next = next.dot(&m.dot(&next));
        let done = (lambda_next - lambda).abs() <= tol * (1.0 + lambda_next.abs());
        v = next;
        lambda = lambda_next;
        if done {
            break;
        }
    }
    lambda
}
