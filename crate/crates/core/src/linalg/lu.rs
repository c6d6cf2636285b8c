use super::{DenseMatrix, LinalgError};
use crate::Scalar;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn lu_solve<T: Scalar>(a: &DenseMatrix<T>, b: &[T]) -> Result<Vec<T>, LinalgError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(LinalgError::DimensionMismatch {
            what: "lu_solve (square matrix)",
            expected: n,
            found: a.cols(),
        });
    }
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch {
            what: "lu_solve (right-hand side)",
            expected: n,
            found: b.len(),
        });
    }
    let mut lu = a.clone();
    let mut x = b.to_vec();
    let tiny = a.max_abs() * T::epsilon() * T::count(n);

    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, lu[(i, k)].abs()))
            .fold((k, -T::one()), |acc, c| if c.1 > acc.1 { c } else { acc });
        if pmax <= tiny || pmax == T::zero() {
            return Err(LinalgError::Singular { pivot: k });
        }
        if p != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = t;
            }
            x.swap(k, p);
        }
        let piv = lu[(k, k)];
        for i in k + 1..n {
            let l = lu[(i, k)] / piv;
            if l == T::zero() {
                continue;
            }
            for j in k + 1..n {
                let u = lu[(k, j)];
                lu[(i, j)] -= l * u;
            }
            let xk = x[k];
            x[i] -= l * xk;
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for j in k + 1..n {
            s -= lu[(k, j)] * x[j];
        }
        x[k] = s / lu[(k, k)];
    }
    Ok(x)
}
