//! Integrators for ODEs with known first integrals that conserve any chosen
//! subset of them exactly, built from discrete gradients.
//!
//! Two families are provided, both wrapping an arbitrary Runge–Kutta
//! scheme of order `p` and retaining that order:
//!
//! * projection onto the *discrete tangent space* spanned orthogonally to
//!   the discrete gradients `∇̄H_i(yⁿ, yⁿ⁺¹)` ([`projection`]);
//! * local coordinates `y = y⁰ + T(y⁰, y) η` on the invariant leaf, with
//!   the basis `T` and its derivative obtained from a Householder QR with
//!   forward-mode derivative propagation ([`localcoords`], [`linalg`]).
//!
//! Every numerical routine is generic over [`Scalar`] (`f32` or `f64`);
//! the aliases at the crate root fix `f64`, which is what the experiment
//! driver uses.

pub mod dgrad;
pub mod error;
pub mod experiments;
pub mod integrator;
pub mod linalg;
pub mod localcoords;
pub mod problems;
pub mod projection;
pub mod rk;
mod scalar;
pub mod solvers;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = linalg::DenseMatrix<f64>;
pub type Matrix32 = linalg::DenseMatrix<f32>;
pub type Qr = linalg::QrFactors<f64>;
pub type QrDerivative = linalg::QrDerivativeFactors<f64>;
pub type Problem = problems::OdeProblem<f64>;
pub type Problem32 = problems::OdeProblem<f32>;
pub type Tableau = rk::ButcherTableau<f64>;
pub type Tableau32 = rk::ButcherTableau<f32>;
pub type Strategy = dgrad::DiscreteGradientStrategy<f64>;
pub type SolverOptions = solvers::SolverOptions<f64>;
pub type ProjectionConfig = projection::ProjectionMethodConfig<f64>;
pub type Integrator = integrator::Integrator<f64>;
