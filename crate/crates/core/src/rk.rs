//! Runge–Kutta schemes: Butcher tableaus, the one-step flow `φ_h`, and the
//! two-point increment function `ψ_h` used by the increment-form projection
//! scheme.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::solvers::{solve_fixed_point_escalating, SolverOptions};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau<T> {
    name: String,
    a: DenseMatrix<T>,
    b: Vec<T>,
    c: Vec<T>,
    order: u32,
    explicit: bool,
}

impl<T: Scalar> ButcherTableau<T> {
    /// Validates `Σb = 1` and `c_i = Σ_j a_ij`.
    pub fn new(name: impl Into<String>, a: DenseMatrix<T>, b: Vec<T>, c: Vec<T>, order: u32) -> Result<Self> {
        let name = name.into();
        let s = b.len();
        if s == 0 || a.rows() != s || a.cols() != s || c.len() != s {
            return Err(Error::Tableau(format!(
                "{name}: inconsistent stage counts (a {}x{}, b {}, c {})",
                a.rows(),
                a.cols(),
                s,
                c.len()
            )));
        }
        if order == 0 {
            return Err(Error::Tableau(format!("{name}: declared order must be at least 1")));
        }
        let tol = T::lit(1e-14).max(T::epsilon() * T::lit(64.0));
        let bsum: T = b.iter().copied().sum();
        if (bsum - T::one()).abs() > tol {
            return Err(Error::Tableau(format!("{name}: weights sum to {bsum}, not 1")));
        }
        for (i, &ci) in c.iter().enumerate() {
            let row: T = a.row(i).iter().copied().sum();
            if (row - ci).abs() > tol {
                return Err(Error::Tableau(format!("{name}: row {i} of a sums to {row} but c = {ci}")));
            }
        }
        let explicit = (0..s).all(|i| (i..s).all(|j| a[(i, j)] == T::zero()));
        Ok(Self {
            name,
            a,
            b,
            c,
            order,
            explicit,
        })
    }

    fn from_f64(name: &str, a: &[&[f64]], b: &[f64], order: u32) -> Self {
        let s = b.len();
        let mut am = DenseMatrix::zeros(s, s);
        for (i, row) in a.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                am[(i, j)] = T::lit(x);
            }
        }
        let c = (0..s).map(|i| a.get(i).map_or(0.0, |r| r.iter().sum::<f64>())).map(T::lit).collect();
        Self::new(name, am, b.iter().map(|&x| T::lit(x)).collect(), c, order).expect("builtin tableau is consistent")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &DenseMatrix<T> {
        &self.a
    }

    pub fn b(&self) -> &[T] {
        &self.b
    }

    pub fn c(&self) -> &[T] {
        &self.c
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn is_explicit(&self) -> bool {
        self.explicit
    }

    /// The one-stage implicit midpoint rule (`a = ½`, `b = 1`).
    pub fn is_implicit_midpoint(&self) -> bool {
        self.stages() == 1 && self.a[(0, 0)] == T::lit(0.5) && self.b[0] == T::one()
    }

    pub fn euler() -> Self {
        Self::from_f64("euler", &[&[0.0]], &[1.0], 1)
    }

    pub fn rk2_midpoint_explicit() -> Self {
        Self::from_f64("rk2_midpoint_explicit", &[&[0.0, 0.0], &[0.5, 0.0]], &[0.0, 1.0], 2)
    }

    pub fn heun() -> Self {
        Self::from_f64("heun", &[&[0.0, 0.0], &[1.0, 0.0]], &[0.5, 0.5], 2)
    }

    pub fn rk4_classical() -> Self {
        Self::from_f64(
            "rk4_classical",
            &[&[0.0; 4], &[0.5, 0.0, 0.0, 0.0], &[0.0, 0.5, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0]],
            &[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            4,
        )
    }

    /// Six-stage fifth-order solution of the Dormand–Prince 5(4) pair.
    pub fn rk5() -> Self {
        Self::from_f64(
            "rk5",
            &[
                &[0.0; 6],
                &[1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                &[3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
                &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
                &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
                &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
            ],
            &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
            5,
        )
    }

    /// Seventh-order solution of Fehlberg's 7(8) pair (eleven stages).
    pub fn rk7() -> Self {
        Self::from_f64(
            "rk7",
            &[
                &[0.0; 11],
                &[2.0 / 27.0],
                &[1.0 / 36.0, 1.0 / 12.0],
                &[1.0 / 24.0, 0.0, 1.0 / 8.0],
                &[5.0 / 12.0, 0.0, -25.0 / 16.0, 25.0 / 16.0],
                &[1.0 / 20.0, 0.0, 0.0, 1.0 / 4.0, 1.0 / 5.0],
                &[-25.0 / 108.0, 0.0, 0.0, 125.0 / 108.0, -65.0 / 27.0, 125.0 / 54.0],
                &[31.0 / 300.0, 0.0, 0.0, 0.0, 61.0 / 225.0, -2.0 / 9.0, 13.0 / 900.0],
                &[2.0, 0.0, 0.0, -53.0 / 6.0, 704.0 / 45.0, -107.0 / 9.0, 67.0 / 90.0, 3.0],
                &[-91.0 / 108.0, 0.0, 0.0, 23.0 / 108.0, -976.0 / 135.0, 311.0 / 54.0, -19.0 / 60.0, 17.0 / 6.0, -1.0 / 12.0],
                &[
                    2383.0 / 4100.0,
                    0.0,
                    0.0,
                    -341.0 / 164.0,
                    4496.0 / 1025.0,
                    -301.0 / 82.0,
                    2133.0 / 4100.0,
                    45.0 / 82.0,
                    45.0 / 164.0,
                    18.0 / 41.0,
                ],
            ],
            &[
                41.0 / 840.0,
                0.0,
                0.0,
                0.0,
                0.0,
                34.0 / 105.0,
                9.0 / 35.0,
                9.0 / 35.0,
                9.0 / 280.0,
                9.0 / 280.0,
                41.0 / 840.0,
            ],
            7,
        )
    }

    pub fn implicit_midpoint() -> Self {
        Self::from_f64("implicit_midpoint", &[&[0.5]], &[1.0], 2)
    }

    /// Looks up a builtin tableau by name (case-insensitive, with the
    /// short aliases `rk2`, `rk4`, `midpoint`).
    pub fn builtin(name: &str) -> Result<Self> {
        let t = match name.to_ascii_lowercase().as_str() {
            "euler" | "rk1" => Self::euler(),
            "rk2" | "rk2_midpoint_explicit" => Self::rk2_midpoint_explicit(),
            "heun" => Self::heun(),
            "rk4" | "rk4_classical" => Self::rk4_classical(),
            "rk5" => Self::rk5(),
            "rk7" => Self::rk7(),
            "midpoint" | "implicit_midpoint" | "mid" => Self::implicit_midpoint(),
            other => return Err(Error::Config(format!("unknown tableau `{other}`"))),
        };
        Ok(t)
    }

    /// Parses the plain-text tableau format.
    ///
    /// Lines hold whitespace-separated numbers (decimal or `p/q`); `#`
    /// starts a comment. The first `s` lines are the rows of `a` (`s` is
    /// the entry count of the first row), followed by one line of `b`,
    /// one line of `c`, and one line with the declared order.
    pub fn parse(name: &str, text: &str) -> Result<Self> {
        let lines: Vec<Vec<f64>> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(|l| l.split_whitespace().map(parse_number).collect::<Result<Vec<f64>>>())
            .collect::<Result<_>>()?;
        let s = lines.first().map_or(0, Vec::len);
        if s == 0 || lines.len() != s + 3 {
            return Err(Error::Tableau(format!(
                "{name}: expected {} non-empty lines (s rows of a, b, c, order), found {}",
                s + 3,
                lines.len()
            )));
        }
        let mut a = DenseMatrix::zeros(s, s);
        for (i, row) in lines[..s].iter().enumerate() {
            if row.len() != s {
                return Err(Error::Tableau(format!("{name}: row {i} of a has {} entries, expected {s}", row.len())));
            }
            for (j, &x) in row.iter().enumerate() {
                a[(i, j)] = T::lit(x);
            }
        }
        let b = &lines[s];
        let c = &lines[s + 1];
        let order = &lines[s + 2];
        if order.len() != 1 || order[0] < 1.0 || order[0].fract() != 0.0 {
            return Err(Error::Tableau(format!("{name}: order line must be a single positive integer")));
        }
        Self::new(
            name,
            a,
            b.iter().map(|&x| T::lit(x)).collect(),
            c.iter().map(|&x| T::lit(x)).collect(),
            order[0] as u32,
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("custom");
        Self::parse(name, &text)
    }
}

impl<T: Scalar> fmt::Display for ButcherTableau<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (s={}, p={})", self.name, self.stages(), self.order)
    }
}

fn parse_number(tok: &str) -> Result<f64> {
    let bad = || Error::Tableau(format!("cannot parse `{tok}` as a number"));
    match tok.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.parse().map_err(|_| bad())?;
            let q: f64 = q.parse().map_err(|_| bad())?;
            if q == 0.0 {
                return Err(bad());
            }
            Ok(p / q)
        }
        None => tok.parse().map_err(|_| bad()),
    }
}

/// Names of all builtin tableaus.
pub fn builtin_tableaus<T: Scalar>() -> Vec<ButcherTableau<T>> {
    vec![
        ButcherTableau::euler(),
        ButcherTableau::rk2_midpoint_explicit(),
        ButcherTableau::heun(),
        ButcherTableau::rk4_classical(),
        ButcherTableau::rk5(),
        ButcherTableau::rk7(),
        ButcherTableau::implicit_midpoint(),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct RkStep<T> {
    pub state: Vec<T>,
    /// Nonlinear iterations spent on implicit stages (0 for explicit).
    pub iterations: usize,
}

/// Stage vectors `k_i` of one step from `y`.
fn stages<T, F>(tab: &ButcherTableau<T>, f: &mut F, y: &[T], h: T, opts: &SolverOptions<T>) -> Result<(Vec<Vec<T>>, usize)>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<Vec<T>>,
{
    let s = tab.stages();
    let m = y.len();
    let stage_arg = |ks: &[Vec<T>], i: usize| -> Vec<T> {
        let mut arg = y.to_vec();
        for (j, kj) in ks.iter().enumerate() {
            let aij = tab.a[(i, j)];
            if aij != T::zero() {
                for (x, &k) in arg.iter_mut().zip(kj) {
                    *x += h * aij * k;
                }
            }
        }
        arg
    };

    if tab.explicit {
        let mut ks: Vec<Vec<T>> = Vec::with_capacity(s);
        for i in 0..s {
            let arg = stage_arg(&ks, i);
            ks.push(f(&arg)?);
        }
        return Ok((ks, 0));
    }

    // Implicit: solve K = F(y + h A K) for the stacked stages.
    let f0 = f(y)?;
    let guess: Vec<T> = (0..s).flat_map(|_| f0.iter().copied()).collect();
    let (sol, iters) = solve_fixed_point_escalating(
        |kflat: &[T]| {
            let ks: Vec<Vec<T>> = kflat.chunks(m).map(<[T]>::to_vec).collect();
            let mut out = Vec::with_capacity(s * m);
            for i in 0..s {
                out.extend(f(&stage_arg(&ks, i))?);
            }
            Ok(out)
        },
        &guess,
        opts,
        "implicit Runge-Kutta stages",
    )?;
    Ok((sol.chunks(m).map(<[T]>::to_vec).collect(), iters))
}

/// One Runge–Kutta step `φ_h(y) = y + h Σ b_i k_i`.
pub fn rk_flow<T, F>(tab: &ButcherTableau<T>, mut f: F, y: &[T], h: T, opts: &SolverOptions<T>) -> Result<RkStep<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<Vec<T>>,
{
    let (ks, iterations) = stages(tab, &mut f, y, h, opts)?;
    let mut state = y.to_vec();
    for (bi, ki) in tab.b.iter().zip(&ks) {
        if *bi != T::zero() {
            for (x, &k) in state.iter_mut().zip(ki) {
                *x += h * *bi * k;
            }
        }
    }
    Ok(RkStep { state, iterations })
}

/// Two-point increment `ψ_h(v, u)` of a method `yⁿ⁺¹ = yⁿ + h ψ_h(yⁿ, yⁿ⁺¹)`.
///
/// Explicit tableaus give `Σ b_i k_i(v)` (independent of `u`); the implicit
/// midpoint rule gives `f((v + u)/2)`. Other tableaus are rejected.
pub fn increment_function<T, F>(tab: &ButcherTableau<T>, mut f: F, v: &[T], u: &[T], h: T) -> Result<Vec<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<Vec<T>>,
{
    if tab.is_explicit() {
        let (ks, _) = stages(tab, &mut f, v, h, &SolverOptions::default())?;
        let mut psi = vec![T::zero(); v.len()];
        for (bi, ki) in tab.b.iter().zip(&ks) {
            if *bi != T::zero() {
                for (x, &k) in psi.iter_mut().zip(ki) {
                    *x += *bi * k;
                }
            }
        }
        Ok(psi)
    } else if tab.is_implicit_midpoint() {
        let half = T::lit(0.5);
        let mid: Vec<T> = v.iter().zip(u).map(|(&a, &b)| half * (a + b)).collect();
        f(&mid)
    } else {
        Err(Error::UnsupportedTableau(tab.name.clone()))
    }
}

/// Checks that a tableau can drive the increment-form scheme.
pub fn supports_increment_form<T: Scalar>(tab: &ButcherTableau<T>) -> bool {
    tab.is_explicit() || tab.is_implicit_midpoint()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_field(y: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![y[0]])
    }

    #[test]
    fn euler_step() {
        let s = rk_flow(&ButcherTableau::euler(), exp_field, &[1.0], 0.1, &SolverOptions::default()).unwrap();
        assert_eq!(s.state, vec![1.1]);
    }

    #[test]
    fn rk4_step_matches_exponential() {
        let s = rk_flow(&ButcherTableau::rk4_classical(), exp_field, &[1.0], 0.1, &SolverOptions::default()).unwrap();
        assert!((s.state[0] - 0.1f64.exp()).abs() <= 1e-7);
        // 1 + h + h²/2 + h³/6 + h⁴/24 at h = 0.1
        assert!((s.state[0] - 1.105_170_833_333_333_3).abs() < 1e-15);
    }

    #[test]
    fn implicit_midpoint_linear() {
        let a = -3.0;
        let h = 0.2;
        let s = rk_flow(
            &ButcherTableau::implicit_midpoint(),
            |y: &[f64]| Ok(vec![a * y[0]]),
            &[1.5],
            h,
            &SolverOptions::default(),
        )
        .unwrap();
        let exact = 1.5 * (1.0 + h * a / 2.0) / (1.0 - h * a / 2.0);
        assert!((s.state[0] - exact).abs() < 1e-12);
        assert!(s.iterations > 0);
    }

    #[test]
    fn increment_forms() {
        let f = |y: &[f64]| Ok(vec![-y[0]]);
        let e = increment_function(&ButcherTableau::euler(), f, &[2.0], &[123.0], 0.1).unwrap();
        assert_eq!(e, vec![-2.0]);
        let m = increment_function(&ButcherTableau::implicit_midpoint(), f, &[1.0], &[0.8], 0.1).unwrap();
        assert!((m[0] + 0.9).abs() < 1e-15);
        let y = [0.3];
        let m = increment_function(&ButcherTableau::implicit_midpoint(), f, &y, &y, 0.1).unwrap();
        assert_eq!(m, vec![-0.3]);
    }

    #[test]
    fn unsupported_increment_tableau() {
        // two-stage Gauss method
        let r3 = 3f64.sqrt() / 6.0;
        let a = DenseMatrix::from_rows(&[vec![0.25, 0.25 - r3], vec![0.25 + r3, 0.25]]);
        let gauss = ButcherTableau::new("gauss2", a, vec![0.5, 0.5], vec![0.5 - r3, 0.5 + r3], 4).unwrap();
        assert!(!gauss.is_explicit());
        let err = increment_function(&gauss, exp_field, &[1.0], &[1.0], 0.1).unwrap_err();
        assert!(matches!(err, Error::UnsupportedTableau(_)));
        // but the flow itself works
        let s = rk_flow(&gauss, exp_field, &[1.0], 0.1, &SolverOptions::default()).unwrap();
        // (2,2) Padé approximant of e^z at z = 0.1
        let pade = (1.0 + 0.05 + 0.01 / 12.0) / (1.0 - 0.05 + 0.01 / 12.0);
        assert!((s.state[0] - pade).abs() < 1e-13);
    }

    #[test]
    fn explicit_increment_matches_flow() {
        let f = |y: &[f64]| Ok(vec![y[1], -y[0].sin()]);
        let y = [0.4, -0.2];
        let h = 0.3;
        for tab in builtin_tableaus::<f64>().into_iter().filter(|t| t.is_explicit()) {
            let flow = rk_flow(&tab, f, &y, h, &SolverOptions::default()).unwrap().state;
            let psi = increment_function(&tab, f, &y, &[9.0, 9.0], h).unwrap();
            for i in 0..2 {
                assert!((h * psi[i] - (flow[i] - y[i])).abs() < 1e-15, "{}", tab.name());
            }
        }
    }

    #[test]
    fn builtin_structure() {
        let rk4 = ButcherTableau::<f64>::rk4_classical();
        assert_eq!(rk4.stages(), 4);
        assert_eq!(rk4.b(), &[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0]);
        let mid = ButcherTableau::<f64>::implicit_midpoint();
        assert_eq!((mid.stages(), mid.a()[(0, 0)], mid.b()[0], mid.order()), (1, 0.5, 1.0, 2));
        assert!(!mid.is_explicit() && mid.is_implicit_midpoint());
        for t in builtin_tableaus::<f64>() {
            let bsum: f64 = t.b().iter().sum();
            assert!((bsum - 1.0).abs() <= 1e-14, "{}", t.name());
            for i in 0..t.stages() {
                let row: f64 = t.a().row(i).iter().sum();
                assert!((row - t.c()[i]).abs() <= 1e-14);
            }
        }
        assert!(builtin_tableaus::<f32>().len() == 7);
    }

    #[test]
    fn parse_tableau_text() {
        let text = "# Heun\n0 0\n1 0\n1/2 1/2\n0 1\n2\n";
        let t = ButcherTableau::<f64>::parse("heun_file", text).unwrap();
        assert_eq!(t.stages(), 2);
        assert_eq!(t.b(), &[0.5, 0.5]);
        assert!(t.is_explicit());
        assert_eq!(t.order(), 2);
        assert!(ButcherTableau::<f64>::parse("bad", "0 0\n1 0\n0.5 0.6\n0 1\n2\n").is_err());
        assert!(ButcherTableau::<f64>::parse("bad", "0\n1\n").is_err());
        assert!(ButcherTableau::<f64>::parse("bad", "0\n1\n0\nx\n").is_err());
    }

    #[test]
    fn rejects_inconsistent_rows() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 0.0], vec![0.5, 0.0]]);
        let err = ButcherTableau::new("bad", a, vec![0.0, 1.0], vec![0.0, 0.4], 2).unwrap_err();
        assert!(matches!(err, Error::Tableau(_)));
    }
}
