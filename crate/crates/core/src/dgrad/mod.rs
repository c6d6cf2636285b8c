//! Discrete gradients and their derivatives with respect to the second
//! argument.
//!
//! A discrete gradient `∇̄H(v, u)` satisfies
//! `H(u) − H(v) = ∇̄H(v, u)ᵀ (u − v)` and `∇̄H(u, u) = ∇H(u)`. Three
//! constructions are available: the averaged vector field (AVF) gradient,
//! the coordinate increment (CI) gradient and its symmetrization (SCI).
//! The CI/SCI identities are exact up to rounding; the AVF identity holds
//! up to the Gauss–Legendre quadrature error, so AVF is exact only for
//! invariants whose gradient is polynomial of low enough degree.

mod quadrature;

use std::fmt;

pub use quadrature::GaussLegendre;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::Scalar;

/// A first integral `H: ℝᵐ → ℝ` with its derivatives.
pub trait Invariant<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;

    fn value(&self, y: &[T]) -> Result<T>;

    fn gradient(&self, y: &[T]) -> Result<Vec<T>>;

    fn has_hessian(&self) -> bool {
        false
    }

    fn hessian(&self, _y: &[T]) -> Result<DenseMatrix<T>> {
        Err(Error::MissingHessian(self.name().to_string()))
    }
}

type ValueFn<T> = Box<dyn Fn(&[T]) -> T + Send + Sync>;
type GradientFn<T> = Box<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;
type HessianFn<T> = Box<dyn Fn(&[T]) -> DenseMatrix<T> + Send + Sync>;

/// Invariant assembled from closures.
pub struct FnInvariant<T> {
    name: String,
    value: ValueFn<T>,
    gradient: GradientFn<T>,
    hessian: Option<HessianFn<T>>,
}

impl<T: Scalar> FnInvariant<T> {
    pub fn new(
        name: impl Into<String>,
        value: impl Fn(&[T]) -> T + Send + Sync + 'static,
        gradient: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            value: Box::new(value),
            gradient: Box::new(gradient),
            hessian: None,
        }
    }

    pub fn with_hessian(mut self, hessian: impl Fn(&[T]) -> DenseMatrix<T> + Send + Sync + 'static) -> Self {
        self.hessian = Some(Box::new(hessian));
        self
    }
}

impl<T> fmt::Debug for FnInvariant<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnInvariant")
            .field("name", &self.name)
            .field("hessian", &self.hessian.is_some())
            .finish()
    }
}

impl<T: Scalar> Invariant<T> for FnInvariant<T> {
    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, y: &[T]) -> Result<T> {
        Ok((self.value)(y))
    }

    fn gradient(&self, y: &[T]) -> Result<Vec<T>> {
        Ok((self.gradient)(y))
    }

    fn has_hessian(&self) -> bool {
        self.hessian.is_some()
    }

    fn hessian(&self, y: &[T]) -> Result<DenseMatrix<T>> {
        match &self.hessian {
            Some(h) => Ok(h(y)),
            None => Err(Error::MissingHessian(self.name.clone())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiscreteGradientKind {
    /// Averaged vector field.
    Avf,
    /// Coordinate increment (Itoh–Abe).
    Ci,
    /// Symmetrized coordinate increment.
    Sci,
}

impl DiscreteGradientKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Avf => "avf",
            Self::Ci => "ci",
            Self::Sci => "sci",
        }
    }
}

impl fmt::Display for DiscreteGradientKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DiscreteGradientKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "avf" => Ok(Self::Avf),
            "ci" => Ok(Self::Ci),
            "sci" => Ok(Self::Sci),
            other => Err(Error::Config(format!("unknown discrete gradient `{other}` (expected avf, ci or sci)"))),
        }
    }
}

/// Immutable configuration selecting and tuning a discrete gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteGradientStrategy<T> {
    kind: DiscreteGradientKind,
    rule: GaussLegendre<T>,
    degeneracy_tolerance: T,
    near_coincidence_tolerance: T,
    hessian_fallback: bool,
}

impl<T: Scalar> DiscreteGradientStrategy<T> {
    pub const DEFAULT_AVF_NODES: usize = 8;

    pub fn new(kind: DiscreteGradientKind) -> Self {
        Self {
            kind,
            rule: GaussLegendre::new(Self::DEFAULT_AVF_NODES),
            degeneracy_tolerance: T::lit(1e-7),
            near_coincidence_tolerance: T::lit(1e-3),
            hessian_fallback: false,
        }
    }

    pub fn avf(nodes: usize) -> Self {
        Self::new(DiscreteGradientKind::Avf).with_quadrature_nodes(nodes)
    }

    pub fn ci() -> Self {
        Self::new(DiscreteGradientKind::Ci)
    }

    pub fn sci() -> Self {
        Self::new(DiscreteGradientKind::Sci)
    }

    pub fn with_quadrature_nodes(mut self, nodes: usize) -> Self {
        self.rule = GaussLegendre::new(nodes);
        self
    }

    /// Relative threshold below which `|u_i − v_i|` is treated as zero in
    /// the CI/SCI difference quotients.
    pub fn with_degeneracy_tolerance(mut self, tol: T) -> Self {
        self.degeneracy_tolerance = tol;
        self
    }

    /// Allows finite differences of the AVF gradient when an invariant has
    /// no Hessian.
    pub fn with_hessian_fallback(mut self, enabled: bool) -> Self {
        self.hessian_fallback = enabled;
        self
    }

    pub fn kind(&self) -> DiscreteGradientKind {
        self.kind
    }

    pub fn quadrature_nodes(&self) -> usize {
        self.rule.nodes()
    }

    pub fn degeneracy_tolerance(&self) -> T {
        self.degeneracy_tolerance
    }

    pub fn hessian_fallback(&self) -> bool {
        self.hessian_fallback
    }

    /// `∇̄H(v, u)`.
    pub fn gradient<H: Invariant<T> + ?Sized>(&self, h: &H, v: &[T], u: &[T]) -> Result<Vec<T>> {
        match self.kind {
            DiscreteGradientKind::Avf => avf_gradient(h, v, u, &self.rule),
            DiscreteGradientKind::Ci => ci_gradient(h, v, u, self.degeneracy_tolerance),
            DiscreteGradientKind::Sci => sci_gradient(h, v, u, self.degeneracy_tolerance),
        }
    }

    /// Directional derivative of `∇̄H(v, u)` with respect to `u` along `zeta`.
    pub fn derivative<H: Invariant<T> + ?Sized>(&self, h: &H, v: &[T], u: &[T], zeta: &[T]) -> Result<Vec<T>> {
        match self.kind {
            DiscreteGradientKind::Avf => avf_gradient_derivative(h, v, u, zeta, &self.rule, self.hessian_fallback),
            DiscreteGradientKind::Ci | DiscreteGradientKind::Sci => Ok(self.jacobian(h, v, u)?.matvec(zeta)),
        }
    }

    /// Jacobian of `∇̄H(v, u)` with respect to `u`.
    pub fn jacobian<H: Invariant<T> + ?Sized>(&self, h: &H, v: &[T], u: &[T]) -> Result<DenseMatrix<T>> {
        match self.kind {
            DiscreteGradientKind::Avf => avf_gradient_jacobian(h, v, u, &self.rule, self.hessian_fallback),
            DiscreteGradientKind::Ci => ci_gradient_jacobian_with(h, v, u, self),
            DiscreteGradientKind::Sci => sci_gradient_jacobian_with(h, v, u, self),
        }
    }
}

fn check_dims<T>(what: &str, v: &[T], u: &[T]) -> Result<()> {
    if v.len() != u.len() || v.is_empty() {
        return Err(Error::Config(format!("{what}: state lengths {} and {} differ", v.len(), u.len())));
    }
    Ok(())
}

/// AVF gradient `∫₀¹ ∇H(ξu + (1−ξ)v) dξ` by Gauss–Legendre quadrature.
///
/// The result is bit-for-bit symmetric in `(v, u)`.
pub fn avf_gradient<T: Scalar, H: Invariant<T> + ?Sized>(
    h: &H,
    v: &[T],
    u: &[T],
    rule: &GaussLegendre<T>,
) -> Result<Vec<T>> {
    check_dims("avf_gradient", v, u)?;
    let m = v.len();
    let mut acc = vec![T::zero(); m];
    let mut p1 = vec![T::zero(); m];
    let mut p2 = vec![T::zero(); m];
    for &(a, b, w) in rule.pairs() {
        for i in 0..m {
            p1[i] = a * u[i] + b * v[i];
            p2[i] = b * u[i] + a * v[i];
        }
        let g1 = h.gradient(&p1)?;
        let g2 = h.gradient(&p2)?;
        for i in 0..m {
            acc[i] += w * (g1[i] + g2[i]);
        }
    }
    if let Some(w) = rule.center_weight() {
        let half = T::lit(0.5);
        let mid: Vec<T> = (0..m).map(|i| half * u[i] + half * v[i]).collect();
        let g = h.gradient(&mid)?;
        for i in 0..m {
            acc[i] += w * g[i];
        }
    }
    Ok(acc)
}

/// `∫₀¹ ξ ∇²H(ξu + (1−ξ)v) dξ`, the Jacobian of the AVF gradient in `u`.
fn avf_hessian_average<T: Scalar, H: Invariant<T> + ?Sized>(
    h: &H,
    v: &[T],
    u: &[T],
    rule: &GaussLegendre<T>,
) -> Result<DenseMatrix<T>> {
    let m = v.len();
    let mut acc = DenseMatrix::zeros(m, m);
    let mut add = |xi: T, w: T, p: &[T]| -> Result<()> {
        let hess = h.hessian(p)?;
        for i in 0..m {
            for j in 0..m {
                acc[(i, j)] += w * xi * hess[(i, j)];
            }
        }
        Ok(())
    };
    let mut p = vec![T::zero(); m];
    for &(a, b, w) in rule.pairs() {
        for (xi, eta) in [(a, b), (b, a)] {
            for i in 0..m {
                p[i] = xi * u[i] + eta * v[i];
            }
            add(xi, w, &p)?;
        }
    }
    if let Some(w) = rule.center_weight() {
        let half = T::lit(0.5);
        for i in 0..m {
            p[i] = half * u[i] + half * v[i];
        }
        add(half, w, &p)?;
    }
    Ok(acc)
}

fn fd_step<T: Scalar>(u: &[T]) -> T {
    T::lit(1e-6) * (T::one() + crate::linalg::vecops::norm(u))
}

/// Directional derivative of the AVF gradient with respect to `u`.
///
/// Uses the invariant's Hessian; without one, central differences of
/// [`avf_gradient`] are used when `allow_fallback` is set.
pub fn avf_gradient_derivative<T: Scalar, H: Invariant<T> + ?Sized>(
    h: &H,
    v: &[T],
    u: &[T],
    zeta: &[T],
    rule: &GaussLegendre<T>,
    allow_fallback: bool,
) -> Result<Vec<T>> {
    check_dims("avf_gradient_derivative", v, u)?;
    if zeta.len() != u.len() {
        return Err(Error::Config("avf_gradient_derivative: direction length mismatch".into()));
    }
    if h.has_hessian() {
        return Ok(avf_hessian_average(h, v, u, rule)?.matvec(zeta));
    }
    if !allow_fallback {
        return Err(Error::MissingHessian(h.name().to_string()));
    }
    let zn = crate::linalg::vecops::norm(zeta);
    if zn == T::zero() {
        return Ok(vec![T::zero(); u.len()]);
    }
    // step along ζ of length 1e-6·(1+‖u‖)
    let eps = fd_step(u) / zn;
    let up: Vec<T> = u.iter().zip(zeta).map(|(&x, &z)| x + eps * z).collect();
    let um: Vec<T> = u.iter().zip(zeta).map(|(&x, &z)| x - eps * z).collect();
    let gp = avf_gradient(h, v, &up, rule)?;
    let gm = avf_gradient(h, v, &um, rule)?;
    let two_eps = eps + eps;
    Ok(gp.iter().zip(&gm).map(|(&a, &b)| (a - b) / two_eps).collect())
}

fn avf_gradient_jacobian<T: Scalar, H: Invariant<T> + ?Sized>(
    h: &H,
    v: &[T],
    u: &[T],
    rule: &GaussLegendre<T>,
    allow_fallback: bool,
) -> Result<DenseMatrix<T>> {
    check_dims("avf_gradient_jacobian", v, u)?;
    if h.has_hessian() {
        return avf_hessian_average(h, v, u, rule);
    }
    let m = u.len();
    let cols = (0..m)
        .map(|j| {
            let mut e = vec![T::zero(); m];
            e[j] = T::one();
            avf_gradient_derivative(h, v, u, &e, rule, allow_fallback)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DenseMatrix::from_columns(&cols))
}

/// Point `(b₀, …, b_{k−1}, a_k, …, a_{m−1})`.
fn sweep_point<T: Scalar>(a: &[T], b: &[T], k: usize) -> Vec<T> {
    b[..k].iter().chain(&a[k..]).copied().collect()
}

fn is_degenerate<T: Scalar>(a: T, b: T, tol: T) -> bool {
    (b - a).abs() <= tol * (T::one() + a.abs() + b.abs())
}

/// Coordinate increment gradient `∇̄_CI H(v, u)`.
///
/// Component `i` is the difference quotient of `H` between the sweep
/// points that switch coordinate `i` from `v_i` to `u_i`. When
/// `|u_i − v_i| ≤ tol · (1 + |u_i| + |v_i|)` the quotient is replaced by
/// its limit `∂H/∂y_i` at the point `(u₁..u_{i−1}, v_i..v_m)`.
pub fn ci_gradient<T: Scalar, H: Invariant<T> + ?Sized>(h: &H, v: &[T], u: &[T], tol: T) -> Result<Vec<T>> {
    check_dims("ci_gradient", v, u)?;
    let m = v.len();
    let mut out = Vec::with_capacity(m);
    let mut z_prev = v.to_vec();
    let mut h_prev = h.value(&z_prev)?;
    for i in 0..m {
        let mut z_next = z_prev.clone();
        z_next[i] = u[i];
        let h_next = h.value(&z_next)?;
        if is_degenerate(v[i], u[i], tol) {
            out.push(h.gradient(&z_prev)?[i]);
        } else {
            out.push((h_next - h_prev) / (u[i] - v[i]));
        }
        z_prev = z_next;
        h_prev = h_next;
    }
    Ok(out)
}

/// Symmetrized coordinate increment gradient
/// `½(∇̄_CI H(v, u) + ∇̄_CI H(u, v))`.
pub fn sci_gradient<T: Scalar, H: Invariant<T> + ?Sized>(h: &H, v: &[T], u: &[T], tol: T) -> Result<Vec<T>> {
    let a = ci_gradient(h, v, u, tol)?;
    let b = ci_gradient(h, u, v, tol)?;
    let half = T::lit(0.5);
    Ok(a.iter().zip(&b).map(|(&x, &y)| half * (x + y)).collect())
}

/// Hessian, analytic when available, otherwise central differences of the
/// gradient.
fn hessian_or_fd<T: Scalar, H: Invariant<T> + ?Sized>(h: &H, y: &[T]) -> Result<DenseMatrix<T>> {
    if h.has_hessian() {
        return h.hessian(y);
    }
    let m = y.len();
    let mut out = DenseMatrix::zeros(m, m);
    let base = T::epsilon().cbrt();
    let mut yp = y.to_vec();
    for j in 0..m {
        let step = base * (T::one() + y[j].abs());
        yp[j] = y[j] + step;
        let gp = h.gradient(&yp)?;
        yp[j] = y[j] - step;
        let gm = h.gradient(&yp)?;
        yp[j] = y[j];
        for i in 0..m {
            out[(i, j)] = (gp[i] - gm[i]) / (step + step);
        }
    }
    let half = T::lit(0.5);
    for i in 0..m {
        for j in 0..i {
            let s = half * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = s;
            out[(j, i)] = s;
        }
    }
    Ok(out)
}

/// Jacobians of `∇̄_CI H(a, b)` with respect to its second argument `b`
/// (lower triangular) and first argument `a` (upper triangular).
struct CiJacobians<T> {
    wrt_second: DenseMatrix<T>,
    wrt_first: DenseMatrix<T>,
}

fn ci_jacobians<T: Scalar, H: Invariant<T> + ?Sized>(
    h: &H,
    a: &[T],
    b: &[T],
    near_tol: T,
) -> Result<CiJacobians<T>> {
    let m = a.len();
    let points: Vec<Vec<T>> = (0..=m).map(|k| sweep_point(a, b, k)).collect();
    let values = points.iter().map(|p| h.value(p)).collect::<Result<Vec<T>>>()?;
    let grads = points.iter().map(|p| h.gradient(p)).collect::<Result<Vec<Vec<T>>>>()?;
    let mut js = DenseMatrix::zeros(m, m);
    let mut jf = DenseMatrix::zeros(m, m);
    let rule = GaussLegendre::<T>::new(4);

    for i in 0..m {
        let d = b[i] - a[i];
        if !is_degenerate(a[i], b[i], near_tol) {
            let (g0, g1) = (&grads[i], &grads[i + 1]);
            let dh = values[i + 1] - values[i];
            for j in 0..i {
                js[(i, j)] = (g1[j] - g0[j]) / d;
            }
            js[(i, i)] = g1[i] / d - dh / (d * d);
            for j in i + 1..m {
                jf[(i, j)] = (g1[j] - g0[j]) / d;
            }
            jf[(i, i)] = -g0[i] / d + dh / (d * d);
        } else {
            // Near-coincident coordinate: the closed forms cancel
            // catastrophically, so integrate the Hessian along the segment
            // Z_i + t d e_i instead. Row i of the CI gradient equals
            // ∫₀¹ ∂_i H(Z_i + t d e_i) dt.
            let mut p = points[i].clone();
            for &(lo, hi, w) in rule.pairs() {
                for t in [lo, hi] {
                    p[i] = a[i] + t * d;
                    let hess = hessian_or_fd(h, &p)?;
                    for j in 0..i {
                        js[(i, j)] += w * hess[(i, j)];
                    }
                    js[(i, i)] += w * t * hess[(i, i)];
                    for j in i + 1..m {
                        jf[(i, j)] += w * hess[(i, j)];
                    }
                    jf[(i, i)] += w * (T::one() - t) * hess[(i, i)];
                }
            }
        }
    }
    Ok(CiJacobians {
        wrt_second: js,
        wrt_first: jf,
    })
}

fn ci_gradient_jacobian_with<T: Scalar, H: Invariant<T> + ?Sized>(
    h: &H,
    v: &[T],
    u: &[T],
    s: &DiscreteGradientStrategy<T>,
) -> Result<DenseMatrix<T>> {
    check_dims("ci_gradient_jacobian", v, u)?;
    Ok(ci_jacobians(h, v, u, s.near_coincidence_tolerance)?.wrt_second)
}

fn sci_gradient_jacobian_with<T: Scalar, H: Invariant<T> + ?Sized>(
    h: &H,
    v: &[T],
    u: &[T],
    s: &DiscreteGradientStrategy<T>,
) -> Result<DenseMatrix<T>> {
    check_dims("sci_gradient_jacobian", v, u)?;
    let forward = ci_jacobians(h, v, u, s.near_coincidence_tolerance)?.wrt_second;
    let reverse = ci_jacobians(h, u, v, s.near_coincidence_tolerance)?.wrt_first;
    let m = u.len();
    let half = T::lit(0.5);
    let mut out = DenseMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            out[(i, j)] = half * (forward[(i, j)] + reverse[(i, j)]);
        }
    }
    Ok(out)
}

/// Jacobian of `∇̄_CI H(v, u)` with respect to `u`; lower triangular.
pub fn ci_gradient_jacobian<T: Scalar, H: Invariant<T> + ?Sized>(h: &H, v: &[T], u: &[T]) -> Result<DenseMatrix<T>> {
    ci_gradient_jacobian_with(h, v, u, &DiscreteGradientStrategy::ci())
}

/// Jacobian of `∇̄_SCI H(v, u)` with respect to `u`.
pub fn sci_gradient_jacobian<T: Scalar, H: Invariant<T> + ?Sized>(h: &H, v: &[T], u: &[T]) -> Result<DenseMatrix<T>> {
    sci_gradient_jacobian_with(h, v, u, &DiscreteGradientStrategy::sci())
}

/// `Y = [∇̄H₁(v,u), …, ∇̄H_q(v,u)]` (`m × q`), columns in the given order.
pub fn assemble_y<T: Scalar>(
    strategy: &DiscreteGradientStrategy<T>,
    invariants: &[&dyn Invariant<T>],
    v: &[T],
    u: &[T],
) -> Result<DenseMatrix<T>> {
    if invariants.is_empty() {
        return Err(Error::Config("at least one invariant is required".into()));
    }
    let cols = invariants
        .iter()
        .map(|h| strategy.gradient(*h, v, u))
        .collect::<Result<Vec<_>>>()?;
    Ok(DenseMatrix::from_columns(&cols))
}

/// `DY`: column `r` is the derivative of `∇̄H_r(v, u)` in `u` along `zeta`.
pub fn assemble_dy<T: Scalar>(
    strategy: &DiscreteGradientStrategy<T>,
    invariants: &[&dyn Invariant<T>],
    v: &[T],
    u: &[T],
    zeta: &[T],
) -> Result<DenseMatrix<T>> {
    if invariants.is_empty() {
        return Err(Error::Config("at least one invariant is required".into()));
    }
    let cols = invariants
        .iter()
        .map(|h| strategy.derivative(*h, v, u, zeta))
        .collect::<Result<Vec<_>>>()?;
    Ok(DenseMatrix::from_columns(&cols))
}
