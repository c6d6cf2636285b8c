//! Benchmark problems: the Kepler two-body problem with its four first
//! integrals, and the harmonic oscillator.

use std::fmt;
use std::sync::Arc;

use crate::dgrad::{FnInvariant, Invariant};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::Scalar;

pub type FieldFn<T> = Arc<dyn Fn(&[T]) -> Result<Vec<T>> + Send + Sync>;
pub type ReferenceFn<T> = Arc<dyn Fn(T) -> Result<Vec<T>> + Send + Sync>;

/// An autonomous ODE `ẏ = f(y)` together with its known first integrals.
#[derive(Clone)]
pub struct OdeProblem<T> {
    name: String,
    field: FieldFn<T>,
    invariants: Vec<Arc<dyn Invariant<T>>>,
    reference: Option<ReferenceFn<T>>,
    initial_state: Vec<T>,
}

impl<T: Scalar> OdeProblem<T> {
    pub fn new(
        name: impl Into<String>,
        initial_state: Vec<T>,
        field: impl Fn(&[T]) -> Result<Vec<T>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            field: Arc::new(field),
            invariants: Vec::new(),
            reference: None,
            initial_state,
        }
    }

    pub fn with_invariant(mut self, h: impl Invariant<T> + 'static) -> Self {
        self.invariants.push(Arc::new(h));
        self
    }

    pub fn with_reference(mut self, r: impl Fn(T) -> Result<Vec<T>> + Send + Sync + 'static) -> Self {
        self.reference = Some(Arc::new(r));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.initial_state.len()
    }

    pub fn initial_state(&self) -> &[T] {
        &self.initial_state
    }

    pub fn field(&self, y: &[T]) -> Result<Vec<T>> {
        (self.field)(y)
    }

    pub fn invariants(&self) -> &[Arc<dyn Invariant<T>>] {
        &self.invariants
    }

    pub fn has_reference(&self) -> bool {
        self.reference.is_some()
    }

    pub fn reference(&self, t: T) -> Result<Vec<T>> {
        match &self.reference {
            Some(r) => r(t),
            None => Err(Error::Config(format!("problem `{}` has no reference solution", self.name))),
        }
    }

    /// Checks a 0-based invariant subset: nonempty, in range, no repeats.
    pub fn validate_subset(&self, subset: &[usize]) -> Result<()> {
        if subset.is_empty() {
            return Err(Error::Config("invariant subset must not be empty".into()));
        }
        for (k, &i) in subset.iter().enumerate() {
            if i >= self.invariants.len() {
                return Err(Error::Config(format!(
                    "invariant index {} out of range for `{}` ({} invariants)",
                    i + 1,
                    self.name,
                    self.invariants.len()
                )));
            }
            if subset[..k].contains(&i) {
                return Err(Error::Config(format!("invariant index {} repeated", i + 1)));
            }
        }
        if subset.len() > self.dimension() {
            return Err(Error::Config("more invariants selected than the state dimension".into()));
        }
        Ok(())
    }

    /// Borrowed views of the selected invariants, in subset order.
    pub fn select(&self, subset: &[usize]) -> Result<Vec<&dyn Invariant<T>>> {
        self.validate_subset(subset)?;
        Ok(subset.iter().map(|&i| &*self.invariants[i]).collect())
    }

    /// Values of the selected invariants at `y`.
    pub fn invariant_values(&self, subset: &[usize], y: &[T]) -> Result<Vec<T>> {
        subset.iter().map(|&i| self.invariants[i].value(y)).collect()
    }
}

impl<T: Scalar> fmt::Debug for OdeProblem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeProblem")
            .field("name", &self.name)
            .field("invariants", &self.invariants.iter().map(|h| h.name().to_string()).collect::<Vec<_>>())
            .field("reference", &self.reference.is_some())
            .finish()
    }
}

/// Radius below which Kepler evaluations are refused.
pub const COLLISION_RADIUS: f64 = 1e-8;

fn radius<T: Scalar>(y: &[T]) -> Result<T> {
    let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
    if !(r > T::lit(COLLISION_RADIUS)) {
        return Err(Error::Singularity(format!("Kepler evaluation at radius {r} (collision)")));
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeplerIntegral {
    /// `½(y₃² + y₄²) − 1/r`
    Energy,
    /// `y₁y₄ − y₂y₃`
    AngularMomentum,
    /// `y₂y₃² − y₁y₃y₄ − y₂/r`
    RungeLenzY,
    /// `y₁y₄² − y₂y₃y₄ − y₁/r`
    RungeLenzX,
}

#[derive(Debug, Clone, Copy)]
pub struct KeplerInvariant {
    which: KeplerIntegral,
}

impl KeplerInvariant {
    pub fn new(which: KeplerIntegral) -> Self {
        Self { which }
    }
}

impl<T: Scalar> Invariant<T> for KeplerInvariant {
    fn name(&self) -> &str {
        match self.which {
            KeplerIntegral::Energy => "H1",
            KeplerIntegral::AngularMomentum => "H2",
            KeplerIntegral::RungeLenzY => "H3",
            KeplerIntegral::RungeLenzX => "H4",
        }
    }

    fn value(&self, y: &[T]) -> Result<T> {
        let (y1, y2, y3, y4) = (y[0], y[1], y[2], y[3]);
        let half = T::lit(0.5);
        Ok(match self.which {
            KeplerIntegral::AngularMomentum => y1 * y4 - y2 * y3,
            KeplerIntegral::Energy => half * (y3 * y3 + y4 * y4) - radius(y)?.recip(),
            KeplerIntegral::RungeLenzY => y2 * y3 * y3 - y1 * y3 * y4 - y2 / radius(y)?,
            KeplerIntegral::RungeLenzX => y1 * y4 * y4 - y2 * y3 * y4 - y1 / radius(y)?,
        })
    }

    fn gradient(&self, y: &[T]) -> Result<Vec<T>> {
        let (y1, y2, y3, y4) = (y[0], y[1], y[2], y[3]);
        let two = T::lit(2.0);
        Ok(match self.which {
            KeplerIntegral::AngularMomentum => vec![y4, -y3, -y2, y1],
            KeplerIntegral::Energy => {
                let r3 = radius(y)?.powi(3);
                vec![y1 / r3, y2 / r3, y3, y4]
            }
            KeplerIntegral::RungeLenzY => {
                let r3 = radius(y)?.powi(3);
                vec![
                    -y3 * y4 + y1 * y2 / r3,
                    y3 * y3 - y1 * y1 / r3,
                    two * y2 * y3 - y1 * y4,
                    -y1 * y3,
                ]
            }
            KeplerIntegral::RungeLenzX => {
                let r3 = radius(y)?.powi(3);
                vec![
                    y4 * y4 - y2 * y2 / r3,
                    -y3 * y4 + y1 * y2 / r3,
                    -y2 * y4,
                    two * y1 * y4 - y2 * y3,
                ]
            }
        })
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn hessian(&self, y: &[T]) -> Result<DenseMatrix<T>> {
        let (y1, y2, y3, y4) = (y[0], y[1], y[2], y[3]);
        let (z, one, two, three) = (T::zero(), T::one(), T::lit(2.0), T::lit(3.0));
        let sym = |entries: [[T; 4]; 4]| DenseMatrix::from_rows(&entries.map(|r| r.to_vec()));
        Ok(match self.which {
            KeplerIntegral::AngularMomentum => sym([[z, z, z, one], [z, z, -one, z], [z, -one, z, z], [one, z, z, z]]),
            KeplerIntegral::Energy => {
                let r = radius(y)?;
                let (r3, r5) = (r.powi(3), r.powi(5));
                let h11 = one / r3 - three * y1 * y1 / r5;
                let h12 = -three * y1 * y2 / r5;
                let h22 = one / r3 - three * y2 * y2 / r5;
                sym([[h11, h12, z, z], [h12, h22, z, z], [z, z, one, z], [z, z, z, one]])
            }
            KeplerIntegral::RungeLenzY => {
                let r = radius(y)?;
                let (r3, r5) = (r.powi(3), r.powi(5));
                // −y₂/r part
                let g11 = y2 / r3 - three * y1 * y1 * y2 / r5;
                let g12 = y1 / r3 - three * y1 * y2 * y2 / r5;
                let g22 = three * y1 * y1 * y2 / r5;
                sym([
                    [g11, g12, -y4, -y3],
                    [g12, g22, two * y3, z],
                    [-y4, two * y3, two * y2, -y1],
                    [-y3, z, -y1, z],
                ])
            }
            KeplerIntegral::RungeLenzX => {
                let r = radius(y)?;
                let (r3, r5) = (r.powi(3), r.powi(5));
                // −y₁/r part
                let g11 = three * y1 * y2 * y2 / r5;
                let g12 = y2 / r3 - three * y1 * y1 * y2 / r5;
                let g22 = y1 / r3 - three * y1 * y2 * y2 / r5;
                sym([
                    [g11, g12, z, two * y4],
                    [g12, g22, -y4, -y3],
                    [z, -y4, z, -y2],
                    [two * y4, -y3, -y2, two * y1],
                ])
            }
        })
    }
}

/// Kepler vector field: `ẏ = (y₃, y₄, −y₁/r³, −y₂/r³)`.
pub fn kepler_field<T: Scalar>(y: &[T]) -> Result<Vec<T>> {
    let r3 = radius(y)?.powi(3);
    Ok(vec![y[2], y[3], -y[0] / r3, -y[1] / r3])
}

/// Initial state `(1 − e, 0, 0, √((1+e)/(1−e)))` (pericentre, period 2π).
pub fn kepler_initial_state<T: Scalar>(e: T) -> Vec<T> {
    let one = T::one();
    vec![one - e, T::zero(), T::zero(), ((one + e) / (one - e)).sqrt()]
}

/// Exact Kepler orbit at time `t`, through the eccentric anomaly
/// `E − e sin E = t` solved by Newton from `E₀ = t`.
pub fn kepler_reference<T: Scalar>(e: T, t: T) -> Result<Vec<T>> {
    let two_pi = T::lit(std::f64::consts::TAU);
    let pi = T::lit(std::f64::consts::PI);
    // reduce the mean anomaly to [−π, π)
    let turns = ((t + pi) / two_pi).floor();
    let mean = t - turns * two_pi;
    let mut big_e = mean;
    let tol = T::lit(1e-14).max(T::epsilon() * T::lit(8.0));
    let mut converged = false;
    let mut residual = T::infinity();
    for _ in 0..50 {
        let f = big_e - e * big_e.sin() - mean;
        let df = T::one() - e * big_e.cos();
        let step = f / df;
        big_e -= step;
        residual = f.abs();
        if step.abs() <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SolverFailure {
            context: "Kepler equation",
            iterations: 50,
            residual: residual.as_f64(),
        });
    }
    let (s, c) = big_e.sin_cos();
    let root = (T::one() - e * e).sqrt();
    let denom = T::one() - e * c;
    Ok(vec![c - e, root * s, -s / denom, root * c / denom])
}

/// Kepler problem with invariants `[H1, H2, H3, H4]` and the exact
/// reference orbit.
pub fn kepler_problem<T: Scalar>(e: T) -> Result<OdeProblem<T>> {
    if !(e >= T::zero() && e < T::one()) {
        return Err(Error::Config(format!("eccentricity must lie in [0, 1), got {e}")));
    }
    Ok(OdeProblem::new(format!("kepler(e={e})"), kepler_initial_state(e), kepler_field)
        .with_invariant(KeplerInvariant::new(KeplerIntegral::Energy))
        .with_invariant(KeplerInvariant::new(KeplerIntegral::AngularMomentum))
        .with_invariant(KeplerInvariant::new(KeplerIntegral::RungeLenzY))
        .with_invariant(KeplerInvariant::new(KeplerIntegral::RungeLenzX))
        .with_reference(move |t| kepler_reference(e, t)))
}

/// `ẏ = (y₂, −y₁)` from `(1, 0)` with `H = ½(y₁² + y₂²)`.
pub fn harmonic_oscillator<T: Scalar>() -> OdeProblem<T> {
    let half = T::lit(0.5);
    OdeProblem::new("harmonic", vec![T::one(), T::zero()], |y: &[T]| Ok(vec![y[1], -y[0]]))
        .with_invariant(
            FnInvariant::new("H", move |y: &[T]| half * (y[0] * y[0] + y[1] * y[1]), |y: &[T]| y.to_vec())
                .with_hessian(|_| DenseMatrix::identity(2)),
        )
        .with_reference(|t: T| Ok(vec![t.cos(), -t.sin()]))
}
