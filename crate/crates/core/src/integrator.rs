//! Uniform stepping interface over the plain Runge–Kutta method, the
//! projection schemes and the local-coordinates method.

use std::fmt;
use std::str::FromStr;

use crate::dgrad::DiscreteGradientStrategy;
use crate::error::{Error, Result};
use crate::localcoords::{local_step, LocalCoordinatesConfig};
use crate::problems::OdeProblem;
use crate::projection::{projected_step, ProjectionMethodConfig, ProjectionVariant, StepOutcome};
use crate::rk::{rk_flow, ButcherTableau};
use crate::solvers::SolverOptions;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodVariant {
    /// The underlying Runge–Kutta method alone.
    Plain,
    SchemeA,
    SchemeB,
    StandardOrthogonal,
    LocalCoordinates,
}

impl MethodVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodVariant::Plain => "plain",
            MethodVariant::SchemeA => "scheme_a",
            MethodVariant::SchemeB => "scheme_b",
            MethodVariant::StandardOrthogonal => "standard_orthogonal",
            MethodVariant::LocalCoordinates => "local_coordinates",
        }
    }

    pub fn uses_invariants(self) -> bool {
        self != MethodVariant::Plain
    }
}

impl fmt::Display for MethodVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "plain" | "rk" | "none" => Ok(MethodVariant::Plain),
            "local_coordinates" | "local" | "localcoords" => Ok(MethodVariant::LocalCoordinates),
            other => match other.parse::<ProjectionVariant>() {
                Ok(ProjectionVariant::SchemeA) => Ok(MethodVariant::SchemeA),
                Ok(ProjectionVariant::SchemeB) => Ok(MethodVariant::SchemeB),
                Ok(ProjectionVariant::StandardOrthogonal) => Ok(MethodVariant::StandardOrthogonal),
                Err(_) => Err(Error::Config(format!("unknown method `{s}`"))),
            },
        }
    }
}

#[derive(Debug, Clone)]
enum Inner<T> {
    Plain {
        tableau: ButcherTableau<T>,
        solver: SolverOptions<T>,
    },
    Projection(ProjectionMethodConfig<T>),
    Local(LocalCoordinatesConfig<T>),
}

/// A configured one-step method.
#[derive(Debug, Clone)]
pub struct Integrator<T> {
    variant: MethodVariant,
    inner: Inner<T>,
}

impl<T: Scalar> Integrator<T> {
    /// `invariant_subset` (0-based) is ignored by [`MethodVariant::Plain`].
    pub fn new(
        variant: MethodVariant,
        tableau: ButcherTableau<T>,
        strategy: DiscreteGradientStrategy<T>,
        invariant_subset: Vec<usize>,
        solver: SolverOptions<T>,
    ) -> Result<Self> {
        let inner = match variant {
            MethodVariant::Plain => Inner::Plain { tableau, solver },
            MethodVariant::LocalCoordinates => {
                if invariant_subset.is_empty() {
                    return Err(Error::Config("local coordinates need at least one invariant".into()));
                }
                Inner::Local(LocalCoordinatesConfig::new(tableau, strategy, invariant_subset).with_solver(solver))
            }
            MethodVariant::SchemeA | MethodVariant::SchemeB | MethodVariant::StandardOrthogonal => {
                let pv = match variant {
                    MethodVariant::SchemeA => ProjectionVariant::SchemeA,
                    MethodVariant::SchemeB => ProjectionVariant::SchemeB,
                    _ => ProjectionVariant::StandardOrthogonal,
                };
                Inner::Projection(
                    ProjectionMethodConfig::new(pv, tableau, strategy, invariant_subset)?.with_solver(solver),
                )
            }
        };
        Ok(Self { variant, inner })
    }

    pub fn variant(&self) -> MethodVariant {
        self.variant
    }

    pub fn tableau(&self) -> &ButcherTableau<T> {
        match &self.inner {
            Inner::Plain { tableau, .. } => tableau,
            Inner::Projection(c) => &c.tableau,
            Inner::Local(c) => &c.tableau,
        }
    }

    /// Selected invariants (0-based); empty for the plain method.
    pub fn invariant_subset(&self) -> &[usize] {
        match &self.inner {
            Inner::Plain { .. } => &[],
            Inner::Projection(c) => &c.invariant_subset,
            Inner::Local(c) => &c.invariant_subset,
        }
    }

    pub fn validate(&self, problem: &OdeProblem<T>) -> Result<()> {
        match &self.inner {
            Inner::Plain { .. } => Ok(()),
            Inner::Projection(c) => c.validate(problem),
            Inner::Local(c) => c.validate(problem),
        }
    }

    /// One step from `y`. `targets` fixes the constraint values of the
    /// standard projection (per-trajectory `H_i(y⁰)`); other variants
    /// ignore it.
    pub fn step(&self, problem: &OdeProblem<T>, y: &[T], h: T, targets: Option<&[T]>) -> Result<StepOutcome<T>> {
        match &self.inner {
            Inner::Plain { tableau, solver } => {
                let s = rk_flow(tableau, |x: &[T]| problem.field(x), y, h, solver)?;
                Ok(StepOutcome {
                    state: s.state,
                    iterations: s.iterations,
                })
            }
            Inner::Projection(c) => projected_step(c, problem, y, h, targets),
            Inner::Local(c) => local_step(c, problem, y, h),
        }
    }

    /// `steps` steps from `y0`; returns all `steps + 1` states.
    pub fn integrate(&self, problem: &OdeProblem<T>, y0: &[T], h: T, steps: usize) -> Result<Vec<Vec<T>>> {
        self.validate(problem)?;
        let targets = if self.variant == MethodVariant::StandardOrthogonal {
            Some(problem.invariant_values(self.invariant_subset(), y0)?)
        } else {
            None
        };
        let mut out = Vec::with_capacity(steps + 1);
        out.push(y0.to_vec());
        for _ in 0..steps {
            let next = self.step(problem, out.last().expect("nonempty"), h, targets.as_deref())?.state;
            out.push(next);
        }
        Ok(out)
    }
}
