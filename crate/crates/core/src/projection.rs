//! Projection onto the discrete tangent space, the two projection schemes
//! built on it, and the standard orthogonal projection used as a baseline.
//!
//! Scheme A solves `y = yⁿ + P(yⁿ, y)(φ_h(yⁿ) − yⁿ)`, scheme B solves
//! `y = yⁿ + h P(yⁿ, y) ψ_h(yⁿ, y)`, where `P = I − QQᵀ` and `QR` is the
//! reduced QR factorization of the discrete gradients `∇̄H_i(yⁿ, y)`.
//! Since `∇̄H_i(yⁿ, y)ᵀ(y − yⁿ) = 0` at the solution, the selected
//! invariants are conserved up to the discrete-gradient identity error and
//! the solver tolerance.

use std::fmt;
use std::str::FromStr;

use crate::dgrad::{assemble_y, DiscreteGradientStrategy, Invariant};
use crate::error::{Error, Result};
use crate::linalg::{apply_q, apply_qt, householder_qr, DenseMatrix, LinalgError, QrFactors, QrOptions};
use crate::problems::OdeProblem;
use crate::rk::{increment_function, rk_flow, supports_increment_form, ButcherTableau};
use crate::solvers::{newton_solve, solve_fixed_point_escalating, Jacobian, SolverOptions};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionVariant {
    SchemeA,
    SchemeB,
    StandardOrthogonal,
}

impl ProjectionVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            ProjectionVariant::SchemeA => "scheme_a",
            ProjectionVariant::SchemeB => "scheme_b",
            ProjectionVariant::StandardOrthogonal => "standard_orthogonal",
        }
    }
}

impl fmt::Display for ProjectionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProjectionVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "scheme_a" | "a" => Ok(ProjectionVariant::SchemeA),
            "scheme_b" | "b" => Ok(ProjectionVariant::SchemeB),
            "standard_orthogonal" | "standard" | "std" => Ok(ProjectionVariant::StandardOrthogonal),
            other => Err(Error::Config(format!("unknown projection variant `{other}`"))),
        }
    }
}

/// Everything a projected step needs besides the problem and the state.
#[derive(Debug, Clone)]
pub struct ProjectionMethodConfig<T> {
    pub variant: ProjectionVariant,
    pub tableau: ButcherTableau<T>,
    pub strategy: DiscreteGradientStrategy<T>,
    /// 0-based invariant indices; columns of `Y` follow this order.
    pub invariant_subset: Vec<usize>,
    pub solver: SolverOptions<T>,
    pub qr: QrOptions<T>,
}

impl<T: Scalar> ProjectionMethodConfig<T> {
    pub fn new(
        variant: ProjectionVariant,
        tableau: ButcherTableau<T>,
        strategy: DiscreteGradientStrategy<T>,
        invariant_subset: Vec<usize>,
    ) -> Result<Self> {
        if invariant_subset.is_empty() {
            return Err(Error::Config("projection needs at least one invariant".into()));
        }
        Ok(Self {
            variant,
            tableau,
            strategy,
            invariant_subset,
            solver: SolverOptions::default(),
            qr: QrOptions::default(),
        })
    }

    pub fn with_solver(mut self, solver: SolverOptions<T>) -> Self {
        self.solver = solver;
        self
    }

    /// Checks the subset against `problem` and the tableau against the
    /// variant.
    pub fn validate(&self, problem: &OdeProblem<T>) -> Result<()> {
        problem.validate_subset(&self.invariant_subset)?;
        if self.variant == ProjectionVariant::SchemeB && !supports_increment_form(&self.tableau) {
            return Err(Error::UnsupportedTableau(self.tableau.name().to_string()));
        }
        Ok(())
    }
}

/// `P = I − QQᵀ` for the reduced `Q` of a full-rank `m × q` matrix.
#[derive(Debug, Clone)]
pub struct Projector<T> {
    factors: QrFactors<T>,
}

impl<T: Scalar> Projector<T> {
    pub fn factors(&self) -> &QrFactors<T> {
        &self.factors
    }

    /// `x − Q[(Qᵀx)₁..q; 0]`.
    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        let mut c = apply_qt(&self.factors, x)?;
        for ci in c.iter_mut().skip(self.factors.q()) {
            *ci = T::zero();
        }
        let qc = apply_q(&self.factors, &c)?;
        Ok(x.iter().zip(&qc).map(|(&a, &b)| a - b).collect())
    }
}

pub fn discrete_projector<T: Scalar>(y: &DenseMatrix<T>) -> Result<Projector<T>> {
    discrete_projector_with(y, &QrOptions::default())
}

pub fn discrete_projector_with<T: Scalar>(y: &DenseMatrix<T>, opts: &QrOptions<T>) -> Result<Projector<T>> {
    Ok(Projector {
        factors: householder_qr(y, opts)?,
    })
}

/// Result of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<T> {
    pub state: Vec<T>,
    /// Nonlinear iterations spent in the step, all solves included.
    pub iterations: usize,
}

fn projector_at<T: Scalar>(
    cfg: &ProjectionMethodConfig<T>,
    invariants: &[&dyn Invariant<T>],
    v: &[T],
    u: &[T],
) -> Result<Projector<T>> {
    let y = assemble_y(&cfg.strategy, invariants, v, u)?;
    discrete_projector_with(&y, &cfg.qr)
}

fn check_state<T: Scalar>(problem: &OdeProblem<T>, y: &[T]) -> Result<()> {
    if y.len() != problem.dimension() {
        return Err(LinalgError::DimensionMismatch {
            what: "state",
            expected: problem.dimension(),
            found: y.len(),
        }
        .into());
    }
    Ok(())
}

/// Scheme A: `u = φ_h(yⁿ)`, then `y = yⁿ + P(yⁿ, y)(u − yⁿ)` by fixed-point
/// iteration from `u` (Newton if that stalls).
pub fn scheme_a_step<T: Scalar>(
    cfg: &ProjectionMethodConfig<T>,
    problem: &OdeProblem<T>,
    yn: &[T],
    h: T,
) -> Result<StepOutcome<T>> {
    check_state(problem, yn)?;
    let invariants = problem.select(&cfg.invariant_subset)?;
    let flow = rk_flow(&cfg.tableau, |y: &[T]| problem.field(y), yn, h, &cfg.solver)?;
    let du: Vec<T> = flow.state.iter().zip(yn).map(|(&a, &b)| a - b).collect();
    let (state, iters) = solve_fixed_point_escalating(
        |y: &[T]| {
            let p = projector_at(cfg, &invariants, yn, y)?;
            let step = p.apply(&du)?;
            Ok(yn.iter().zip(&step).map(|(&a, &b)| a + b).collect())
        },
        &flow.state,
        &cfg.solver,
        "scheme A projection",
    )?;
    Ok(StepOutcome {
        state,
        iterations: flow.iterations + iters,
    })
}

/// Scheme B: `y = yⁿ + h P(yⁿ, y) ψ_h(yⁿ, y)` from the guess `φ_h(yⁿ)`.
pub fn scheme_b_step<T: Scalar>(
    cfg: &ProjectionMethodConfig<T>,
    problem: &OdeProblem<T>,
    yn: &[T],
    h: T,
) -> Result<StepOutcome<T>> {
    check_state(problem, yn)?;
    if !supports_increment_form(&cfg.tableau) {
        return Err(Error::UnsupportedTableau(cfg.tableau.name().to_string()));
    }
    let invariants = problem.select(&cfg.invariant_subset)?;
    let flow = rk_flow(&cfg.tableau, |y: &[T]| problem.field(y), yn, h, &cfg.solver)?;
    // for explicit tableaus ψ does not depend on the unknown
    let fixed_psi = if cfg.tableau.is_explicit() {
        Some(increment_function(&cfg.tableau, |y: &[T]| problem.field(y), yn, yn, h)?)
    } else {
        None
    };
    let (state, iters) = solve_fixed_point_escalating(
        |y: &[T]| {
            let psi = match &fixed_psi {
                Some(p) => p.clone(),
                None => increment_function(&cfg.tableau, |x: &[T]| problem.field(x), yn, y, h)?,
            };
            let hpsi: Vec<T> = psi.iter().map(|&p| h * p).collect();
            let p = projector_at(cfg, &invariants, yn, y)?;
            let step = p.apply(&hpsi)?;
            Ok(yn.iter().zip(&step).map(|(&a, &b)| a + b).collect())
        },
        &flow.state,
        &cfg.solver,
        "scheme B projection",
    )?;
    Ok(StepOutcome {
        state,
        iterations: flow.iterations + iters,
    })
}

/// Standard orthogonal projection with the targets `H_i(yⁿ)`.
pub fn standard_projection_step<T: Scalar>(
    cfg: &ProjectionMethodConfig<T>,
    problem: &OdeProblem<T>,
    yn: &[T],
    h: T,
) -> Result<StepOutcome<T>> {
    check_state(problem, yn)?;
    problem.validate_subset(&cfg.invariant_subset)?;
    let targets = problem.invariant_values(&cfg.invariant_subset, yn)?;
    standard_projection_step_to(cfg, problem, yn, h, &targets)
}

/// Standard orthogonal projection: `u = φ_h(yⁿ)`, then Newton on
/// `y − u − G(u)λ = 0`, `H_i(y) = c_i`, with `G(u) = [∇H_i(u)]`.
pub fn standard_projection_step_to<T: Scalar>(
    cfg: &ProjectionMethodConfig<T>,
    problem: &OdeProblem<T>,
    yn: &[T],
    h: T,
    targets: &[T],
) -> Result<StepOutcome<T>> {
    check_state(problem, yn)?;
    let invariants = problem.select(&cfg.invariant_subset)?;
    let q = invariants.len();
    if targets.len() != q {
        return Err(LinalgError::DimensionMismatch {
            what: "projection targets",
            expected: q,
            found: targets.len(),
        }
        .into());
    }
    let m = yn.len();
    let flow = rk_flow(&cfg.tableau, |y: &[T]| problem.field(y), yn, h, &cfg.solver)?;
    let u = flow.state;
    let grads = invariants.iter().map(|h| h.gradient(&u)).collect::<Result<Vec<_>>>()?;

    let residual = |x: &[T]| -> Result<Vec<T>> {
        let (y, lambda) = x.split_at(m);
        let mut out = Vec::with_capacity(m + q);
        for i in 0..m {
            let mut gi = T::zero();
            for (g, &l) in grads.iter().zip(lambda) {
                gi += g[i] * l;
            }
            out.push(y[i] - u[i] - gi);
        }
        for (hi, &c) in invariants.iter().zip(targets) {
            out.push(hi.value(y)? - c);
        }
        Ok(out)
    };
    let mut jac = |x: &[T]| -> Result<DenseMatrix<T>> {
        let y = &x[..m];
        let mut j = DenseMatrix::zeros(m + q, m + q);
        for i in 0..m {
            j[(i, i)] = T::one();
            for (k, g) in grads.iter().enumerate() {
                j[(i, m + k)] = -g[i];
            }
        }
        for (k, hk) in invariants.iter().enumerate() {
            for (i, gi) in hk.gradient(y)?.into_iter().enumerate() {
                j[(m + k, i)] = gi;
            }
        }
        Ok(j)
    };
    let mut x0 = u.clone();
    x0.resize(m + q, T::zero());
    let report = newton_solve(residual, &x0, cfg.solver.tol, cfg.solver.max_newton, Jacobian::Analytic(&mut jac))?;
    if !report.converged {
        return Err(Error::SolverFailure {
            context: "standard orthogonal projection",
            iterations: report.iterations,
            residual: report.residual_norm.as_f64(),
        });
    }
    let mut state = report.solution;
    state.truncate(m);
    Ok(StepOutcome {
        state,
        iterations: flow.iterations + report.iterations,
    })
}

/// Dispatches on `cfg.variant`. `targets` only affects the standard
/// projection; when absent, `H_i(yⁿ)` is used.
pub fn projected_step<T: Scalar>(
    cfg: &ProjectionMethodConfig<T>,
    problem: &OdeProblem<T>,
    yn: &[T],
    h: T,
    targets: Option<&[T]>,
) -> Result<StepOutcome<T>> {
    match cfg.variant {
        ProjectionVariant::SchemeA => scheme_a_step(cfg, problem, yn, h),
        ProjectionVariant::SchemeB => scheme_b_step(cfg, problem, yn, h),
        ProjectionVariant::StandardOrthogonal => match targets {
            Some(c) => standard_projection_step_to(cfg, problem, yn, h, c),
            None => standard_projection_step(cfg, problem, yn, h),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vecops::norm;
    use crate::problems::{harmonic_oscillator, kepler_problem};

    fn cfg(variant: ProjectionVariant, tab: ButcherTableau<f64>, subset: Vec<usize>) -> ProjectionMethodConfig<f64> {
        ProjectionMethodConfig::new(variant, tab, DiscreteGradientStrategy::sci(), subset).unwrap()
    }

    #[test]
    fn projector_on_axis() {
        let y = DenseMatrix::from_columns(&[vec![1.0, 0.0]]);
        let p = discrete_projector(&y).unwrap();
        assert_eq!(p.apply(&[1.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(p.apply(&[0.0, 1.0]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn projector_rank_deficiency_reported() {
        let y = DenseMatrix::from_columns(&[vec![1.0, 2.0, 0.0], vec![2.0, 4.0, 0.0]]);
        match discrete_projector(&y) {
            Err(Error::Linalg(LinalgError::RankDeficient { column, .. })) => assert_eq!(column, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_subset_rejected() {
        let r = ProjectionMethodConfig::<f64>::new(
            ProjectionVariant::SchemeA,
            ButcherTableau::rk4_classical(),
            DiscreteGradientStrategy::sci(),
            vec![],
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn harmonic_euler_stays_on_circle() {
        let p = harmonic_oscillator();
        for variant in [ProjectionVariant::SchemeA, ProjectionVariant::SchemeB, ProjectionVariant::StandardOrthogonal] {
            let c = cfg(variant, ButcherTableau::euler(), vec![0]);
            let y1 = projected_step(&c, &p, &[1.0, 0.0], 0.1, None).unwrap().state;
            assert!((norm(&y1) - 1.0).abs() < 1e-12, "{variant}");
        }
    }

    #[test]
    fn kepler_energy_after_one_step() {
        let p = kepler_problem(0.6).unwrap();
        let c = cfg(ProjectionVariant::SchemeA, ButcherTableau::rk4_classical(), vec![0]);
        let y1 = scheme_a_step(&c, &p, p.initial_state(), 0.2).unwrap().state;
        assert!((p.invariants()[0].value(&y1).unwrap() + 0.5).abs() < 1e-11);
    }

    #[test]
    fn zero_field_is_fixed() {
        let p = OdeProblem::new("still", vec![0.6, 0.8], |y: &[f64]| Ok(vec![0.0; y.len()])).with_invariant(
            crate::dgrad::FnInvariant::new("H", |y: &[f64]| 0.5 * (y[0] * y[0] + y[1] * y[1]), |y: &[f64]| y.to_vec()),
        );
        for variant in [ProjectionVariant::SchemeA, ProjectionVariant::SchemeB, ProjectionVariant::StandardOrthogonal] {
            let c = cfg(variant, ButcherTableau::implicit_midpoint(), vec![0]);
            let y1 = projected_step(&c, &p, &[0.6, 0.8], 0.1, None).unwrap().state;
            assert_eq!(y1, vec![0.6, 0.8], "{variant}");
        }
    }

    #[test]
    fn scheme_b_rejects_general_implicit_tableau() {
        let gauss2 = ButcherTableau::parse(
            "gauss2",
            "0.25 -0.0386751345948129\n0.5386751345948129 0.25\n0.5 0.5\n0.2113248654051871 0.7886751345948129\n4\n",
        )
        .unwrap();
        let p = harmonic_oscillator();
        let c = cfg(ProjectionVariant::SchemeB, gauss2, vec![0]);
        assert!(matches!(c.validate(&p), Err(Error::UnsupportedTableau(_))));
        assert!(matches!(scheme_b_step(&c, &p, &[1.0, 0.0], 0.1), Err(Error::UnsupportedTableau(_))));
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("scheme-a".parse::<ProjectionVariant>().unwrap(), ProjectionVariant::SchemeA);
        assert_eq!("standard".parse::<ProjectionVariant>().unwrap(), ProjectionVariant::StandardOrthogonal);
        assert!("c".parse::<ProjectionVariant>().is_err());
    }
}
