use crate::Scalar;

/// Gauss–Legendre rule on `[0, 1]`, stored as mirrored node pairs
/// `(ξ, 1 − ξ)` so that integrands of the form `g(ξu + (1−ξ)v)` are
/// evaluated bit-for-bit symmetrically in `(u, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre<T> {
    n: usize,
    /// `(ξ, 1 − ξ, weight)` with `ξ < ½`.
    pairs: Vec<(T, T, T)>,
    /// Weight of the node at `ξ = ½` (odd `n` only).
    center: Option<T>,
}

impl<T: Scalar> GaussLegendre<T> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature needs at least one node");
        let mut pairs = Vec::with_capacity(n / 2);
        let mut center = None;
        for i in 0..n.div_ceil(2) {
            let (z, w) = legendre_root(n, i);
            if n % 2 == 1 && i == n / 2 {
                center = Some(T::lit(w / 2.0));
            } else {
                // z ∈ (0, 1] maps to ξ = (1 − z)/2 < ½
                let lo = T::lit((1.0 - z) / 2.0);
                let hi = T::lit((1.0 + z) / 2.0);
                pairs.push((lo, hi, T::lit(w / 2.0)));
            }
        }
        Self { n, pairs, center }
    }

    pub fn nodes(&self) -> usize {
        self.n
    }

    /// `(ξ, 1 − ξ, w)` node pairs.
    pub fn pairs(&self) -> &[(T, T, T)] {
        &self.pairs
    }

    pub fn center_weight(&self) -> Option<T> {
        self.center
    }

    /// Integrates a scalar function over `[0, 1]`.
    pub fn integrate(&self, mut g: impl FnMut(T) -> T) -> T {
        let mut acc = T::zero();
        for &(lo, hi, w) in &self.pairs {
            acc += w * (g(lo) + g(hi));
        }
        if let Some(w) = self.center {
            acc += w * g(T::lit(0.5));
        }
        acc
    }
}

/// Root `i` (descending from +1) of the degree-`n` Legendre polynomial and
/// its weight on `[-1, 1]`.
fn legendre_root(n: usize, i: usize) -> (f64, f64) {
    if n % 2 == 1 && i == n / 2 {
        let (_, dp) = legendre(n, 0.0);
        return (0.0, 2.0 / (dp * dp));
    }
    let nf = n as f64;
    let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
    for _ in 0..100 {
        let (p, dp) = legendre(n, z);
        let dz = p / dp;
        z -= dz;
        if dz.abs() <= 1e-16 {
            break;
        }
    }
    let (_, dp) = legendre(n, z);
    (z, 2.0 / ((1.0 - z * z) * dp * dp))
}

/// `(P_n(z), P_n'(z))` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = if (1.0 - z * z).abs() < 1e-300 {
        nf * (nf + 1.0) / 2.0
    } else {
        nf * (p0 - z * p1) / (1.0 - z * z)
    };
    (p1, dp)
}
