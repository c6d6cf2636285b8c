use dtproj::dgrad::{avf_gradient, ci_gradient, sci_gradient, GaussLegendre};
use dtproj::linalg::vecops::{dist, dot, norm, sub};
use dtproj::problems::kepler_problem;
use dtproj::{Matrix, Problem, Strategy};
use proptest::prelude::{prop, prop_assert, proptest, ProptestConfig};
use proptest::strategy::Strategy as _;

const TOL: f64 = 1e-7;

fn kepler() -> Problem {
    kepler_problem(0.6).unwrap()
}

/// Phase-space points away from the collision.
fn state() -> impl proptest::strategy::Strategy<Value = Vec<f64>> {
    (0.3..2.0f64, 0.0..std::f64::consts::TAU, -1.5..1.5f64, -1.5..1.5f64)
        .prop_map(|(r, th, p, q)| vec![r * th.cos(), r * th.sin(), p, q])
}

fn pair() -> impl proptest::strategy::Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (state(), prop::collection::vec(-0.3..0.3f64, 4))
        .prop_map(|(v, d)| {
            let u = v.iter().zip(&d).map(|(a, b)| a + b).collect();
            (v, u)
        })
        .prop_filter("stay off the collision", |(_, u): &(Vec<f64>, Vec<f64>)| u[0].hypot(u[1]) > 0.1)
}

fn strategies() -> [Strategy; 3] {
    [Strategy::avf(8), Strategy::ci(), Strategy::sci()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ci_and_sci_satisfy_the_discrete_gradient_identity((v, u) in pair()) {
        for h in kepler().invariants() {
            let lhs = h.value(&u).unwrap() - h.value(&v).unwrap();
            let scale = 1.0 + h.value(&u).unwrap().abs() + h.value(&v).unwrap().abs();
            for g in [ci_gradient(&**h, &v, &u, TOL).unwrap(), sci_gradient(&**h, &v, &u, TOL).unwrap()] {
                let rhs = dot(&g, &sub(&u, &v));
                prop_assert!((lhs - rhs).abs() <= 1e-13 * scale, "{}: {lhs} vs {rhs}", h.name());
            }
        }
    }

    #[test]
    fn avf_identity_is_exact_for_quadratic_integrals((v, u) in pair()) {
        let p = kepler();
        let h = &p.invariants()[1];
        let g = avf_gradient(&**h, &v, &u, &GaussLegendre::new(8)).unwrap();
        let lhs = h.value(&u).unwrap() - h.value(&v).unwrap();
        prop_assert!((lhs - dot(&g, &sub(&u, &v))).abs() < 1e-13);
    }

    #[test]
    fn coincident_arguments_give_the_gradient(v in state()) {
        for h in kepler().invariants() {
            let exact = h.gradient(&v).unwrap();
            for s in strategies() {
                let g = s.gradient(&**h, &v, &v).unwrap();
                prop_assert!(dist(&g, &exact) <= 1e-13 * norm(&exact).max(1.0));
            }
        }
    }

    #[test]
    fn avf_and_sci_are_symmetric((v, u) in pair()) {
        for h in kepler().invariants() {
            let rule = GaussLegendre::new(8);
            let a = avf_gradient(&**h, &v, &u, &rule).unwrap();
            let b = avf_gradient(&**h, &u, &v, &rule).unwrap();
            prop_assert!(dist(&a, &b) <= 1e-14 * norm(&a).max(1.0));
            let a = sci_gradient(&**h, &v, &u, TOL).unwrap();
            let b = sci_gradient(&**h, &u, &v, TOL).unwrap();
            prop_assert!(dist(&a, &b) <= 1e-13 * norm(&a).max(1.0));
        }
    }

    #[test]
    fn jacobians_match_central_differences((v, u) in pair()) {
        for h in kepler().invariants() {
            for s in strategies() {
                let jac = s.jacobian(&**h, &v, &u).unwrap();
                let mut fd = Matrix::zeros(4, 4);
                for j in 0..4 {
                    let step = 1e-6 * (1.0 + u[j].abs());
                    let (mut up, mut um) = (u.clone(), u.clone());
                    up[j] += step;
                    um[j] -= step;
                    let gp = s.gradient(&**h, &v, &up).unwrap();
                    let gm = s.gradient(&**h, &v, &um).unwrap();
                    for i in 0..4 {
                        fd[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
                    }
                }
                let err = jac.sub(&fd).frobenius_norm() / fd.frobenius_norm().max(1.0);
                prop_assert!(err <= 1e-6, "{} {}: {err:e}", s.kind(), h.name());
            }
        }
    }

    #[test]
    fn directional_derivative_agrees_with_jacobian((v, u) in pair(), zeta in prop::collection::vec(-1.0..1.0f64, 4)) {
        for h in kepler().invariants() {
            for s in strategies() {
                let d = s.derivative(&**h, &v, &u, &zeta).unwrap();
                let j = s.jacobian(&**h, &v, &u).unwrap().matvec(&zeta);
                prop_assert!(dist(&d, &j) <= 1e-10 * norm(&j).max(1.0));
            }
        }
    }
}

#[test]
fn avf_matches_a_fine_quadrature_on_kepler() {
    let p = kepler();
    let v = vec![0.4, 0.0, 0.0, 2.0];
    let u = vec![0.35, 0.2, -0.9, 1.8];
    let n = 10_000;
    for h in p.invariants() {
        // composite Simpson on n intervals
        let grad_at = |xi: f64| -> Vec<f64> {
            let y: Vec<f64> = v.iter().zip(&u).map(|(a, b)| xi * b + (1.0 - xi) * a).collect();
            h.gradient(&y).unwrap()
        };
        let mut acc = vec![0.0; 4];
        for k in 0..=n {
            let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            for (a, g) in acc.iter_mut().zip(grad_at(k as f64 / n as f64)) {
                *a += w * g / (3.0 * n as f64);
            }
        }
        let avf = avf_gradient(&**h, &v, &u, &GaussLegendre::new(8)).unwrap();
        assert!(dist(&avf, &acc) <= 1e-10, "{}: {:e}", h.name(), dist(&avf, &acc));
    }
}

#[test]
fn sci_handles_coincident_coordinates() {
    let p = kepler();
    let v = vec![0.5, 0.3, 0.1, 1.2];
    let mut u = v.clone();
    u[2] += 1e-12;
    for h in p.invariants() {
        let g = sci_gradient(&**h, &v, &u, TOL).unwrap();
        let exact = h.gradient(&v).unwrap();
        assert!(dist(&g, &exact) < 1e-9);
        assert!(g.iter().all(|x| x.is_finite()));
    }
}
