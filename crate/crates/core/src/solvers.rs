//! Fixed-point and Newton iterations for the implicit equations arising in
//! implicit Runge–Kutta stages, the projection schemes and the chart map.

use crate::error::{Error, Result};
use crate::linalg::{lu_solve, vecops, DenseMatrix, LinalgError};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<T> {
    pub converged: bool,
    pub iterations: usize,
    pub residual_norm: T,
    pub solution: Vec<T>,
    /// Set when Newton stopped on a singular Jacobian.
    pub singular: bool,
}

/// Tolerances shared by every implicit solve in a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    /// Absolute tolerance on the increment (and residual for Newton).
    pub tol: T,
    pub max_fixed_point: usize,
    pub max_newton: usize,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-12),
            max_fixed_point: 50,
            max_newton: 25,
        }
    }
}

impl<T: Scalar> SolverOptions<T> {
    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }
}

/// How Newton obtains the Jacobian of `F`.
pub enum Jacobian<'a, T> {
    Analytic(&'a mut dyn FnMut(&[T]) -> Result<DenseMatrix<T>>),
    /// Forward differences with step `1e-7 · (1 + ‖x‖)`.
    FiniteDifference,
}

/// Iterates `x ← G(x)` until `‖x_{k+1} − x_k‖ ≤ tol`.
///
/// Nonconvergence is reported through the returned report, not as an error;
/// errors raised by `g` itself are propagated.
pub fn fixed_point_solve<T, G>(mut g: G, x0: &[T], tol: T, max_iter: usize) -> Result<SolveReport<T>>
where
    T: Scalar,
    G: FnMut(&[T]) -> Result<Vec<T>>,
{
    assert!(tol > T::zero(), "tolerance must be positive");
    let mut x = x0.to_vec();
    let mut residual = T::infinity();
    for it in 1..=max_iter {
        let next = g(&x)?;
        residual = vecops::dist(&next, &x);
        x = next;
        if !residual.is_finite() {
            return Ok(SolveReport {
                converged: false,
                iterations: it,
                residual_norm: residual,
                solution: x,
                singular: false,
            });
        }
        if residual <= tol {
            return Ok(SolveReport {
                converged: true,
                iterations: it,
                residual_norm: residual,
                solution: x,
                singular: false,
            });
        }
    }
    Ok(SolveReport {
        converged: false,
        iterations: max_iter,
        residual_norm: residual,
        solution: x,
        singular: false,
    })
}

fn fd_jacobian<T, F>(f: &mut F, x: &[T], fx: &[T]) -> Result<DenseMatrix<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<Vec<T>>,
{
    let n = x.len();
    let step = T::lit(1e-7) * (T::one() + vecops::norm(x));
    let mut jac = DenseMatrix::zeros(fx.len(), n);
    let mut xp = x.to_vec();
    for j in 0..n {
        xp[j] = x[j] + step;
        let fp = f(&xp)?;
        xp[j] = x[j];
        for i in 0..fx.len() {
            jac[(i, j)] = (fp[i] - fx[i]) / step;
        }
    }
    Ok(jac)
}

/// Newton's method for `F(x) = 0`.
///
/// Converged when both the Newton increment and `‖F‖` at the new iterate
/// are within `tol`.
pub fn newton_solve<T, F>(
    mut f: F,
    x0: &[T],
    tol: T,
    max_iter: usize,
    mut jacobian: Jacobian<'_, T>,
) -> Result<SolveReport<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<Vec<T>>,
{
    assert!(tol > T::zero(), "tolerance must be positive");
    let mut x = x0.to_vec();
    let mut fx = f(&x)?;
    let mut residual = vecops::norm(&fx);
    for it in 1..=max_iter {
        let jac = match &mut jacobian {
            Jacobian::Analytic(j) => j(&x)?,
            Jacobian::FiniteDifference => fd_jacobian(&mut f, &x, &fx)?,
        };
        let step = match lu_solve(&jac, &fx) {
            Ok(s) => s,
            Err(LinalgError::Singular { .. }) => {
                return Ok(SolveReport {
                    converged: false,
                    iterations: it,
                    residual_norm: residual,
                    solution: x,
                    singular: true,
                })
            }
            Err(e) => return Err(e.into()),
        };
        for (xi, si) in x.iter_mut().zip(&step) {
            *xi -= *si;
        }
        fx = f(&x)?;
        residual = vecops::norm(&fx);
        let increment = vecops::norm(&step);
        if !residual.is_finite() || !increment.is_finite() {
            break;
        }
        if increment <= tol && residual <= tol {
            return Ok(SolveReport {
                converged: true,
                iterations: it,
                residual_norm: residual,
                solution: x,
                singular: false,
            });
        }
    }
    Ok(SolveReport {
        converged: false,
        iterations: max_iter,
        residual_norm: residual,
        solution: x,
        singular: false,
    })
}

/// Solves `x = G(x)`: fixed-point iteration first, then Newton on
/// `x − G(x)` from the same initial guess when that fails.
///
/// Returns the solution and the total iteration count, or
/// [`Error::SolverFailure`] tagged with `context`.
pub fn solve_fixed_point_escalating<T, G>(
    mut g: G,
    x0: &[T],
    opts: &SolverOptions<T>,
    context: &'static str,
) -> Result<(Vec<T>, usize)>
where
    T: Scalar,
    G: FnMut(&[T]) -> Result<Vec<T>>,
{
    let fp = fixed_point_solve(&mut g, x0, opts.tol, opts.max_fixed_point)?;
    if fp.converged {
        return Ok((fp.solution, fp.iterations));
    }
    let residual_map = |x: &[T]| -> Result<Vec<T>> {
        let gx = g(x)?;
        Ok(x.iter().zip(&gx).map(|(&a, &b)| a - b).collect())
    };
    let nw = newton_solve(residual_map, x0, opts.tol, opts.max_newton, Jacobian::FiniteDifference)?;
    let total = fp.iterations + nw.iterations;
    if nw.converged {
        Ok((nw.solution, total))
    } else {
        Err(Error::SolverFailure {
            context,
            iterations: total,
            residual: nw.residual_norm.as_f64().min(fp.residual_norm.as_f64()),
        })
    }
}
