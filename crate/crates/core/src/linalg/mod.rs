//! Dense linear algebra: row-major matrices, vector kernels, pivoted LU and
//! the sign-free Householder QR with derivative propagation.

mod householder;
mod lu;
mod matrix;
pub mod vecops;

pub use householder::{
    apply_dq, apply_dq_counted, apply_q, apply_qt, householder_qr, householder_qr_with_derivative,
    householder_qr_with_derivative_counted, tangent_basis_apply, tangent_basis_transpose_apply,
    QrDerivativeFactors, QrFactors, QrOptions, Reflector,
};
pub use lu::lu_solve;
pub use matrix::DenseMatrix;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    /// Column `column` (0-based) lies in the span of the previous columns.
    #[error("rank deficiency at column {column}: remaining norm ratio {ratio:e}")]
    RankDeficient { column: usize, ratio: f64 },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// The reflection for `column` was skipped (column already aligned with
    /// the positive axis) but the perturbation moves it off that axis, so the
    /// reflector has no derivative.
    #[error("reflector derivative undefined at column {column}: skipped reflection under a transverse perturbation")]
    DerivativeBreakdown { column: usize },

    #[error("singular matrix (pivot {pivot})")]
    Singular { pivot: usize },
}

/// Tally of floating-point work, used to check complexity contracts.
pub trait OpTally {
    fn add(&mut self, flops: u64);
}

impl OpTally for () {
    #[inline]
    fn add(&mut self, _flops: u64) {}
}

/// Counts flops (one multiply-add counts as two).
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCount(pub u64);

impl OpTally for OpCount {
    #[inline]
    fn add(&mut self, flops: u64) {
        self.0 += flops;
    }
}
