//! Dense Cholesky factorization for symmetric positive-definite systems.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Lower-triangular `L` with `a = L Lᵀ`. Fails when a pivot is not
/// positive relative to the largest diagonal entry.
pub fn cholesky<T: Real>(a: &Array2<T>) -> Result<Array2<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!(
            "Cholesky needs a square matrix, got {:?}",
            a.dim()
        )));
    }
    let max_diag = (0..n).map(|i| a[[i, i]].abs()).fold(T::zero(), T::max);
    let tol = max_diag * T::epsilon() * T::from_usize_lossy(4 * n.max(1));
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut pivot = a[[j, j]];
        for k in 0..j {
            pivot -= l[[j, k]] * l[[j, k]];
        }
        if !(pivot > tol) {
            return Err(Error::Singular(format!(
                "pivot {j} is {} (tolerance {}), matrix is not numerically positive definite",
                pivot, tol
            )));
        }
        let d = pivot.sqrt();
        l[[j, j]] = d;
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ X = B` by forward then backward substitution.
pub fn cholesky_solve<T: Real>(l: &Array2<T>, b: &Array2<T>) -> Array2<T> {
    let n = l.nrows();
    let mut x = b.clone();
    for mut col in x.columns_mut() {
        for i in 0..n {
            let mut s = col[i];
            for k in 0..i {
                s -= l[[i, k]] * col[k];
            }
            col[i] = s / l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = col[i];
            for k in i + 1..n {
                s -= l[[k, i]] * col[k];
            }
            col[i] = s / l[[i, i]];
        }
    }
    x
}
