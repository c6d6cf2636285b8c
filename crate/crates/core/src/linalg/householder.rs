//! Householder QR without the usual sign convention, plus forward-mode
//! derivative propagation through the factorization.
//!
//! Column `k` is reflected onto `+‖Π_k Y_k‖ e_k`, which keeps `Q` smooth in
//! `Y` away from the aligned configuration. Only the reflector vectors are
//! stored; `Q` and `DQ` are applied to vectors in `O(mq)`.

use super::vecops::{axpy, dot, norm};
use super::{DenseMatrix, LinalgError, OpCount, OpTally};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QrOptions<T> {
    /// A column is dependent when its remaining norm is at most
    /// `rank_tol` times its original norm.
    pub rank_tol: T,
    /// The reflection is skipped when `‖w‖ ≤ skip_tol · ‖Π_k Y_k‖`.
    pub skip_tol: T,
}

impl<T: Scalar> Default for QrOptions<T> {
    fn default() -> Self {
        Self {
            rank_tol: T::lit(1e-12),
            skip_tol: T::lit(1e-14),
        }
    }
}

/// One elementary reflection `I - 2 v vᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Reflector<T> {
    /// Column was already aligned with `+e_k`; the reflection is the identity.
    Identity,
    /// Unit vector of length `m` whose first `k` entries are zero.
    Householder(Vec<T>),
}

impl<T> Reflector<T> {
    pub fn is_identity(&self) -> bool {
        matches!(self, Reflector::Identity)
    }

    pub fn vector(&self) -> Option<&[T]> {
        match self {
            Reflector::Identity => None,
            Reflector::Householder(v) => Some(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QrFactors<T> {
    m: usize,
    q: usize,
    reflectors: Vec<Reflector<T>>,
    r: DenseMatrix<T>,
}

impl<T: Scalar> QrFactors<T> {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn reflectors(&self) -> &[Reflector<T>] {
        &self.reflectors
    }

    /// Upper-triangular `q × q` factor. Kept for diagnostics only.
    pub fn r(&self) -> &DenseMatrix<T> {
        &self.r
    }

    /// Ratio of smallest to largest diagonal entry of `R`; a cheap
    /// conditioning indicator for the stacked gradients.
    pub fn diagonal_ratio(&self) -> T {
        let diag: Vec<T> = (0..self.q).map(|k| self.r[(k, k)].abs()).collect();
        let max = diag.iter().copied().fold(T::zero(), T::max);
        let min = diag.iter().copied().fold(T::infinity(), T::min);
        if max > T::zero() {
            min / max
        } else {
            T::zero()
        }
    }

    /// Materializes the full `m × m` orthogonal factor. Test and
    /// diagnostic use only.
    pub fn explicit_q(&self) -> DenseMatrix<T> {
        let cols: Vec<Vec<T>> = (0..self.m)
            .map(|j| {
                let mut e = vec![T::zero(); self.m];
                e[j] = T::one();
                apply_q_impl(self, &mut e, &mut ());
                e
            })
            .collect();
        DenseMatrix::from_columns(&cols)
    }
}

/// Derivatives `Dv_k` of the reflector vectors along one input direction.
#[derive(Debug, Clone, PartialEq)]
pub struct QrDerivativeFactors<T> {
    derivative_reflectors: Vec<Vec<T>>,
}

impl<T: Scalar> QrDerivativeFactors<T> {
    pub fn derivative_reflectors(&self) -> &[Vec<T>] {
        &self.derivative_reflectors
    }
}

pub fn householder_qr<T: Scalar>(y: &DenseMatrix<T>, opts: &QrOptions<T>) -> Result<QrFactors<T>, LinalgError> {
    factorize(y, None, opts, &mut ()).map(|(f, _)| f)
}

/// Factorizes `y` and propagates the derivative `dy` of `y` through every
/// reflector.
pub fn householder_qr_with_derivative<T: Scalar>(
    y: &DenseMatrix<T>,
    dy: &DenseMatrix<T>,
    opts: &QrOptions<T>,
) -> Result<(QrFactors<T>, QrDerivativeFactors<T>), LinalgError> {
    let (f, d) = factorize(y, Some(dy), opts, &mut ())?;
    Ok((f, d.expect("derivative requested")))
}

/// As [`householder_qr_with_derivative`], also returning the flop count.
pub fn householder_qr_with_derivative_counted<T: Scalar>(
    y: &DenseMatrix<T>,
    dy: &DenseMatrix<T>,
    opts: &QrOptions<T>,
) -> Result<(QrFactors<T>, QrDerivativeFactors<T>, u64), LinalgError> {
    let mut count = OpCount::default();
    let (f, d) = factorize(y, Some(dy), opts, &mut count)?;
    Ok((f, d.expect("derivative requested"), count.0))
}

fn factorize<T: Scalar, C: OpTally>(
    y: &DenseMatrix<T>,
    dy: Option<&DenseMatrix<T>>,
    opts: &QrOptions<T>,
    tally: &mut C,
) -> Result<(QrFactors<T>, Option<QrDerivativeFactors<T>>), LinalgError> {
    let (m, q) = (y.rows(), y.cols());
    if q > m {
        return Err(LinalgError::DimensionMismatch {
            what: "householder_qr (need rows >= cols)",
            expected: m,
            found: q,
        });
    }
    if let Some(dy) = dy {
        if dy.rows() != m || dy.cols() != q {
            return Err(LinalgError::DimensionMismatch {
                what: "householder_qr_with_derivative (DY shape)",
                expected: m * q,
                found: dy.rows() * dy.cols(),
            });
        }
    }
    let two = T::lit(2.0);
    let mut cols = y.columns();
    let mut dcols = dy.map(DenseMatrix::columns);
    let original_norms: Vec<T> = cols.iter().map(|c| norm(c)).collect();
    tally.add(2 * (m * q) as u64);

    let mut reflectors = Vec::with_capacity(q);
    let mut dreflectors = dcols.as_ref().map(|_| Vec::with_capacity(q));
    let mut r = DenseMatrix::zeros(q, q);

    for k in 0..q {
        let len = (m - k) as u64;
        let x = cols[k][k..].to_vec();
        let nx = norm(&x);
        tally.add(2 * len);
        if !(nx > opts.rank_tol * original_norms[k]) {
            let ratio = if original_norms[k] > T::zero() {
                (nx / original_norms[k]).as_f64()
            } else {
                0.0
            };
            return Err(LinalgError::RankDeficient { column: k, ratio });
        }
        r[(k, k)] = nx;

        let mut w = x.clone();
        w[0] -= nx;
        let nw = norm(&w);
        tally.add(2 * len);

        // Dw = Π DY_k - (xᵀ Π DY_k / ‖x‖) e_1
        let dw = dcols.as_ref().map(|dc| {
            let dx = &dc[k][k..];
            let mut dw = dx.to_vec();
            dw[0] -= dot(&x, dx) / nx;
            dw
        });
        if dw.is_some() {
            tally.add(2 * len);
        }

        if nw <= opts.skip_tol * nx {
            if let (Some(dw), Some(dc)) = (&dw, &dcols) {
                if norm(dw) > opts.rank_tol * norm(&dc[k][k..]) {
                    return Err(LinalgError::DerivativeBreakdown { column: k });
                }
            }
            reflectors.push(Reflector::Identity);
            if let Some(dr) = dreflectors.as_mut() {
                dr.push(vec![T::zero(); m]);
            }
        } else {
            let v: Vec<T> = w.iter().map(|&wi| wi / nw).collect();
            let dv = dw.map(|dw| {
                let c = dot(&w, &dw) / (nw * nw);
                w.iter().zip(&dw).map(|(&wi, &dwi)| (dwi - c * wi) / nw).collect::<Vec<T>>()
            });
            tally.add(3 * len);
            if dv.is_some() {
                tally.add(5 * len);
            }

            for rc in k + 1..q {
                let yr = &mut cols[rc][k..];
                let a = dot(&v, yr);
                tally.add(2 * len);
                if let (Some(dv), Some(dc)) = (&dv, dcols.as_mut()) {
                    let b = dot(dv, yr);
                    let dyr = &mut dc[rc][k..];
                    let c = dot(&v, dyr);
                    // DY_r ← DY_r − 2(vᵀDY_r v + vᵀY_r Dv + Dvᵀ Y_r v)
                    axpy(-two * (c + b), &v, dyr);
                    axpy(-two * a, dv, dyr);
                    tally.add(8 * len);
                }
                axpy(-two * a, &v, yr);
                tally.add(2 * len);
            }

            let mut full = vec![T::zero(); m];
            full[k..].copy_from_slice(&v);
            reflectors.push(Reflector::Householder(full));
            if let (Some(dr), Some(dv)) = (dreflectors.as_mut(), dv) {
                let mut full = vec![T::zero(); m];
                full[k..].copy_from_slice(&dv);
                dr.push(full);
            }
        }
        for rc in k + 1..q {
            r[(k, rc)] = cols[rc][k];
        }
    }

    Ok((
        QrFactors { m, q, reflectors, r },
        dreflectors.map(|derivative_reflectors| QrDerivativeFactors { derivative_reflectors }),
    ))
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), LinalgError> {
    if expected == found {
        Ok(())
    } else {
        Err(LinalgError::DimensionMismatch { what, expected, found })
    }
}

fn apply_q_impl<T: Scalar, C: OpTally>(f: &QrFactors<T>, x: &mut [T], tally: &mut C) {
    let two = T::lit(2.0);
    for (k, refl) in f.reflectors.iter().enumerate().rev() {
        if let Reflector::Householder(v) = refl {
            let a = dot(&v[k..], &x[k..]);
            axpy(-two * a, &v[k..], &mut x[k..]);
            tally.add(4 * (f.m - k) as u64);
        }
    }
}

fn apply_qt_impl<T: Scalar>(f: &QrFactors<T>, x: &mut [T]) {
    let two = T::lit(2.0);
    for (k, refl) in f.reflectors.iter().enumerate() {
        if let Reflector::Householder(v) = refl {
            let a = dot(&v[k..], &x[k..]);
            axpy(-two * a, &v[k..], &mut x[k..]);
        }
    }
}

/// `Q x = Q_1 ⋯ Q_q x`, reflections applied right to left.
pub fn apply_q<T: Scalar>(f: &QrFactors<T>, x: &[T]) -> Result<Vec<T>, LinalgError> {
    check_len("apply_q", f.m, x.len())?;
    let mut out = x.to_vec();
    apply_q_impl(f, &mut out, &mut ());
    Ok(out)
}

/// `Qᵀ x = Q_q ⋯ Q_1 x`.
pub fn apply_qt<T: Scalar>(f: &QrFactors<T>, x: &[T]) -> Result<Vec<T>, LinalgError> {
    check_len("apply_qt", f.m, x.len())?;
    let mut out = x.to_vec();
    apply_qt_impl(f, &mut out);
    Ok(out)
}

/// `T η` where `T` is the last `m − q` columns of `Q`.
pub fn tangent_basis_apply<T: Scalar>(f: &QrFactors<T>, eta: &[T]) -> Result<Vec<T>, LinalgError> {
    check_len("tangent_basis_apply", f.m - f.q, eta.len())?;
    let mut lifted = vec![T::zero(); f.m];
    lifted[f.q..].copy_from_slice(eta);
    apply_q_impl(f, &mut lifted, &mut ());
    Ok(lifted)
}

/// `Tᵀ x`: the last `m − q` entries of `Qᵀ x`.
pub fn tangent_basis_transpose_apply<T: Scalar>(f: &QrFactors<T>, x: &[T]) -> Result<Vec<T>, LinalgError> {
    let full = apply_qt(f, x)?;
    Ok(full[f.q..].to_vec())
}

fn apply_dq_impl<T: Scalar, C: OpTally>(
    f: &QrFactors<T>,
    df: &QrDerivativeFactors<T>,
    x: &[T],
    tally: &mut C,
) -> Vec<T> {
    let two = T::lit(2.0);
    let mut psi = x.to_vec();
    let mut phi = vec![T::zero(); f.m];
    for (k, refl) in f.reflectors.iter().enumerate().rev() {
        let Reflector::Householder(v) = refl else {
            continue;
        };
        let v = &v[k..];
        let dv = &df.derivative_reflectors[k][k..];
        let a = dot(v, &psi[k..]);
        let b = dot(dv, &psi[k..]);
        let c = dot(v, &phi[k..]);
        // φ ← φ − 2(vᵀψ Dv + Dvᵀψ v + vᵀφ v);  ψ ← ψ − 2 vᵀψ v
        axpy(-two * a, dv, &mut phi[k..]);
        axpy(-two * (b + c), v, &mut phi[k..]);
        axpy(-two * a, v, &mut psi[k..]);
        tally.add(12 * (f.m - k) as u64);
    }
    phi
}

/// `DQ x` via the downward product recursion.
pub fn apply_dq<T: Scalar>(
    f: &QrFactors<T>,
    df: &QrDerivativeFactors<T>,
    x: &[T],
) -> Result<Vec<T>, LinalgError> {
    check_len("apply_dq", f.m, x.len())?;
    check_len("apply_dq (derivative factors)", f.q, df.derivative_reflectors.len())?;
    Ok(apply_dq_impl(f, df, x, &mut ()))
}

/// As [`apply_dq`], also returning the flop count.
pub fn apply_dq_counted<T: Scalar>(
    f: &QrFactors<T>,
    df: &QrDerivativeFactors<T>,
    x: &[T],
) -> Result<(Vec<T>, u64), LinalgError> {
    check_len("apply_dq", f.m, x.len())?;
    check_len("apply_dq (derivative factors)", f.q, df.derivative_reflectors.len())?;
    let mut count = OpCount::default();
    let out = apply_dq_impl(f, df, x, &mut count);
    Ok((out, count.0))
}
