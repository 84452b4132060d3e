//! Small dense helpers that nalgebra does not provide directly.

use nalgebra::{DMatrix, DVector};

const MAX_POWER_ITERS: usize = 200_000;

/// Dominant eigenvalue of a symmetric positive semi-definite matrix by power
/// iteration with a Rayleigh-quotient readout.
pub fn largest_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    // Fixed, irregular start vector; all-ones would be orthogonal to the top
    // eigenvector of too many structured matrices.
    let mut v = DVector::from_fn(n, |i, _| 1.5 + (1.3 * i as f64 + 0.7).sin());
    v /= v.norm();
    let mut lambda = 0.0_f64;
    let mut stable = 0;
    for _ in 0..MAX_POWER_ITERS {
        let w = a * &v;
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - lambda).abs() <= 1e-15 * next.abs() {
            stable += 1;
            if stable >= 3 {
                return next.max(lambda);
            }
        } else {
            stable = 0;
        }
        lambda = next;
    }
    lambda
}

/// Smallest eigenvalue of a symmetric positive semi-definite matrix, via the
/// dominant eigenvalue of `λ_max I − A`.
pub fn smallest_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let top = largest_eigenvalue(a);
    let shifted = DMatrix::identity(a.nrows(), a.ncols()) * top - a;
    top - largest_eigenvalue(&shifted)
}

pub fn is_symmetric(a: &DMatrix<f64>, tol: f64) -> bool {
    a.is_square()
        && (0..a.nrows()).all(|i| (0..i).all(|j| (a[(i, j)] - a[(j, i)]).abs() <= tol))
}
