//! Local coordinates on the invariant leaf.
//!
//! Around a base point `y⁰` the chart `χ: η ↦ y` is defined implicitly by
//! `y − y⁰ = T(y⁰, y) η`, where `T(y⁰, y)` holds the last `m − q` columns
//! of the Householder `Q` of `Y(y) = [∇̄H_i(y⁰, y)]`. Every `y` in the
//! image conserves the selected invariants. A step integrates the
//! transformed field for `η` from `η = 0` with any Runge–Kutta method and
//! maps back through the chart; the base point is reset every step.

use crate::dgrad::{assemble_dy, assemble_y, DiscreteGradientStrategy, Invariant};
use crate::error::{Error, Result};
use crate::linalg::{
    apply_dq, householder_qr, householder_qr_with_derivative, tangent_basis_apply, tangent_basis_transpose_apply,
    QrFactors, QrOptions,
};
use crate::problems::OdeProblem;
use crate::projection::StepOutcome;
use crate::rk::{rk_flow, ButcherTableau};
use crate::solvers::{solve_fixed_point_escalating, SolverOptions};
use crate::Scalar;

/// Settings shared by every chart of a trajectory.
#[derive(Debug, Clone)]
pub struct LocalCoordinatesConfig<T> {
    pub tableau: ButcherTableau<T>,
    pub strategy: DiscreteGradientStrategy<T>,
    /// 0-based invariant indices; fixes the column order of `Y` and hence
    /// the `η` frame.
    pub invariant_subset: Vec<usize>,
    pub solver: SolverOptions<T>,
    pub qr: QrOptions<T>,
}

impl<T: Scalar> LocalCoordinatesConfig<T> {
    pub fn new(tableau: ButcherTableau<T>, strategy: DiscreteGradientStrategy<T>, invariant_subset: Vec<usize>) -> Self {
        Self {
            tableau,
            strategy,
            invariant_subset,
            solver: SolverOptions::default(),
            qr: QrOptions::default(),
        }
    }

    pub fn with_solver(mut self, solver: SolverOptions<T>) -> Self {
        self.solver = solver;
        self
    }

    pub fn validate(&self, problem: &OdeProblem<T>) -> Result<()> {
        problem.validate_subset(&self.invariant_subset)?;
        if self.invariant_subset.len() >= problem.dimension() {
            return Err(Error::Config(format!(
                "local coordinates need fewer invariants than the dimension ({} selected, m = {})",
                self.invariant_subset.len(),
                problem.dimension()
            )));
        }
        Ok(())
    }
}

/// A solved chart point `y = χ(η)` with the factorization at `(y⁰, y)`.
#[derive(Debug, Clone)]
pub struct ChartPoint<T> {
    pub state: Vec<T>,
    pub factors: QrFactors<T>,
    pub iterations: usize,
}

/// Chart centred at a base point.
pub struct Chart<'a, T: Scalar> {
    problem: &'a OdeProblem<T>,
    invariants: Vec<&'a dyn Invariant<T>>,
    base: Vec<T>,
    cfg: &'a LocalCoordinatesConfig<T>,
}

impl<'a, T: Scalar> Chart<'a, T> {
    /// Requires the exact gradients at `base` to be independent.
    pub fn new(problem: &'a OdeProblem<T>, cfg: &'a LocalCoordinatesConfig<T>, base: &[T]) -> Result<Self> {
        cfg.validate(problem)?;
        let invariants = problem.select(&cfg.invariant_subset)?;
        let chart = Self {
            problem,
            invariants,
            base: base.to_vec(),
            cfg,
        };
        chart.factors_at(base)?;
        Ok(chart)
    }

    pub fn base_point(&self) -> &[T] {
        &self.base
    }

    /// Dimension of `η`.
    pub fn local_dimension(&self) -> usize {
        self.base.len() - self.invariants.len()
    }

    /// Householder factors of `Y(y) = [∇̄H_i(y⁰, y)]`.
    pub fn factors_at(&self, y: &[T]) -> Result<QrFactors<T>> {
        let ymat = assemble_y(&self.cfg.strategy, &self.invariants, &self.base, y)?;
        Ok(householder_qr(&ymat, &self.cfg.qr)?)
    }

    /// `T(y⁰, y) η`.
    pub fn basis_apply(&self, y: &[T], eta: &[T]) -> Result<Vec<T>> {
        Ok(tangent_basis_apply(&self.factors_at(y)?, eta)?)
    }

    /// Solves `y = y⁰ + T(y⁰, y) η` by fixed-point iteration from `start`
    /// (default `y⁰`), escalating to Newton.
    pub fn solve(&self, eta: &[T], start: Option<&[T]>) -> Result<ChartPoint<T>> {
        if eta.len() != self.local_dimension() {
            return Err(crate::linalg::LinalgError::DimensionMismatch {
                what: "chart coordinates",
                expected: self.local_dimension(),
                found: eta.len(),
            }
            .into());
        }
        if eta.iter().all(|&x| x == T::zero()) {
            return Ok(ChartPoint {
                state: self.base.clone(),
                factors: self.factors_at(&self.base)?,
                iterations: 0,
            });
        }
        let (state, iterations) = solve_fixed_point_escalating(
            |y: &[T]| {
                let t_eta = self.basis_apply(y, eta)?;
                Ok(self.base.iter().zip(&t_eta).map(|(&a, &b)| a + b).collect())
            },
            start.unwrap_or(&self.base),
            &self.cfg.solver,
            "chart map",
        )?;
        let factors = self.factors_at(&state)?;
        Ok(ChartPoint {
            state,
            factors,
            iterations,
        })
    }

    /// `dη/dt = −Tᵀ DQ(f)[0; η] + Tᵀ f`, evaluated at `y = χ(η)` with
    /// `DY` the derivative of `Y` at `y` along `f(y)`.
    ///
    /// Returns the field value and the chart point it was evaluated at.
    pub fn transformed_field(&self, eta: &[T], start: Option<&[T]>) -> Result<(Vec<T>, ChartPoint<T>)> {
        let point = self.solve(eta, start)?;
        let y = &point.state;
        let f = self.problem.field(y)?;
        let mut out = tangent_basis_transpose_apply(&point.factors, &f)?;
        if eta.iter().any(|&x| x != T::zero()) {
            let ymat = assemble_y(&self.cfg.strategy, &self.invariants, &self.base, y)?;
            let dymat = assemble_dy(&self.cfg.strategy, &self.invariants, &self.base, y, &f)?;
            let (factors, dfactors) = householder_qr_with_derivative(&ymat, &dymat, &self.cfg.qr)?;
            let q = self.invariants.len();
            let mut lifted = vec![T::zero(); y.len()];
            lifted[q..].copy_from_slice(eta);
            let curvature = apply_dq(&factors, &dfactors, &lifted)?;
            let projected = tangent_basis_transpose_apply(&factors, &curvature)?;
            for (o, c) in out.iter_mut().zip(projected) {
                *o -= c;
            }
        }
        Ok((out, point))
    }
}

/// Free-function form of [`Chart::solve`].
pub fn chart_solve<T: Scalar>(chart: &Chart<'_, T>, eta: &[T]) -> Result<Vec<T>> {
    Ok(chart.solve(eta, None)?.state)
}

/// Free-function form of [`Chart::transformed_field`].
pub fn transformed_field<T: Scalar>(chart: &Chart<'_, T>, eta: &[T]) -> Result<Vec<T>> {
    Ok(chart.transformed_field(eta, None)?.0)
}

/// One local-coordinates step: chart at `yⁿ`, one Runge–Kutta step on `η`
/// from `0`, then `yⁿ⁺¹ = χ(η₁)`. Chart solves inside the step start from
/// the most recent solved point.
pub fn local_step<T: Scalar>(
    cfg: &LocalCoordinatesConfig<T>,
    problem: &OdeProblem<T>,
    yn: &[T],
    h: T,
) -> Result<StepOutcome<T>> {
    let chart = Chart::new(problem, cfg, yn)?;
    let mut last = yn.to_vec();
    let mut chart_iterations = 0usize;
    let eta0 = vec![T::zero(); chart.local_dimension()];
    let flow = rk_flow(
        &cfg.tableau,
        |eta: &[T]| {
            let (g, point) = chart.transformed_field(eta, Some(&last))?;
            chart_iterations += point.iterations;
            last = point.state;
            Ok(g)
        },
        &eta0,
        h,
        &cfg.solver,
    )?;
    let end = chart.solve(&flow.state, Some(&last))?;
    Ok(StepOutcome {
        state: end.state,
        iterations: flow.iterations + chart_iterations + end.iterations,
    })
}
