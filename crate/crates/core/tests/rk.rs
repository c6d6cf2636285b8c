use dtproj::experiments::fit_slope;
use dtproj::linalg::vecops::dist;
use dtproj::problems::harmonic_oscillator;
use dtproj::rk::{builtin_tableaus, increment_function, rk_flow, supports_increment_form};
use dtproj::{Result, SolverOptions, Tableau};

fn oscillator(y: &[f64]) -> Result<Vec<f64>> {
    Ok(vec![y[1], -y[0]])
}

/// Error at `t = 1` of the oscillator from `(1, 0)`.
fn global_error(tab: &Tableau, h: f64) -> f64 {
    let n = (1.0 / h).round() as usize;
    let mut y = vec![1.0, 0.0];
    for _ in 0..n {
        y = rk_flow(tab, oscillator, &y, h, &SolverOptions::default()).unwrap().state;
    }
    dist(&y, &[1f64.cos(), -1f64.sin()])
}

#[test]
fn empirical_orders_match_declared_orders() {
    for tab in builtin_tableaus::<f64>() {
        // the seventh-order scheme needs coarser steps to stay above roundoff
        let hs: &[f64] = if tab.order() >= 7 { &[0.5, 0.25, 0.2, 0.125] } else { &[0.1, 0.05, 0.025, 0.0125] };
        let points: Vec<(f64, f64)> = hs.iter().map(|&h| (h, global_error(&tab, h))).collect();
        let slope = fit_slope(&points, 1e-13).unwrap_or_else(|| panic!("{}: {points:?}", tab.name()));
        let p = tab.order() as f64;
        assert!(slope > p - 0.3, "{}: slope {slope} for order {p}", tab.name());
    }
}

#[test]
fn increment_form_reproduces_the_flow_for_explicit_tableaus() {
    let y = [0.3, -0.8];
    for tab in builtin_tableaus::<f64>().into_iter().filter(Tableau::is_explicit) {
        assert!(supports_increment_form(&tab));
        let phi = rk_flow(&tab, oscillator, &y, 0.2, &SolverOptions::default()).unwrap().state;
        let psi = increment_function(&tab, oscillator, &y, &y, 0.2).unwrap();
        let via_psi: Vec<f64> = y.iter().zip(&psi).map(|(a, p)| a + 0.2 * p).collect();
        assert!(dist(&phi, &via_psi) < 1e-15, "{}", tab.name());
    }
}

#[test]
fn midpoint_increment_is_evaluated_at_the_average() {
    let tab = Tableau::implicit_midpoint();
    let (v, u) = ([1.0, 0.0], [0.8, -0.5]);
    let psi = increment_function(&tab, oscillator, &v, &u, 0.1).unwrap();
    assert!(dist(&psi, &[-0.25, -0.9]) < 1e-15);
}

#[test]
fn implicit_midpoint_preserves_quadratic_invariants() {
    let p = harmonic_oscillator::<f64>();
    let tab = Tableau::implicit_midpoint();
    let mut y = p.initial_state().to_vec();
    for _ in 0..200 {
        y = rk_flow(&tab, |x: &[f64]| p.field(x), &y, 0.3, &SolverOptions::default()).unwrap().state;
    }
    let drift = ((y[0] * y[0] + y[1] * y[1]) - 1.0).abs();
    // limited only by the stage solver tolerance
    assert!(drift < 1e-10, "{drift:e}");
}

#[test]
fn tableau_files_round_trip() {
    let text = "# explicit midpoint\n0 0\n1/2 0\n0 1\n0 1/2\n2\n";
    let parsed = Tableau::parse("file_rk2", text).unwrap();
    let builtin = Tableau::builtin("rk2").unwrap();
    assert_eq!(parsed.b(), builtin.b());
    assert_eq!(parsed.c(), builtin.c());
    assert_eq!(parsed.order(), 2);
    assert!(parsed.is_explicit());
    assert!(Tableau::parse("bad", "0 0\n1\n").is_err());
}
