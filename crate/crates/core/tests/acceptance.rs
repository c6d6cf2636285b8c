//! Acceptance checks for the library as a whole. Runs as a plain binary
//! (no libtest harness) so every line below shows up in the test log:
//!
//! ```text
//! PASS [1] exact conservation ...
//! ```
//!
//! Exits non-zero when any check fails.

use std::time::Instant;

use dtproj::dgrad::{ci_gradient, ci_gradient_jacobian, sci_gradient, sci_gradient_jacobian};
use dtproj::experiments::{compare_standard, fit_slope, order_study, run, RunConfig};
use dtproj::integrator::MethodVariant;
use dtproj::linalg::vecops::{dist, norm};
use dtproj::linalg::{apply_dq_counted, apply_q, householder_qr, householder_qr_with_derivative_counted, QrOptions};
use dtproj::problems::kepler_problem;
use dtproj::projection::{scheme_a_step, scheme_b_step, ProjectionMethodConfig, ProjectionVariant};
use dtproj::{Matrix, Strategy, Tableau};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn cfg(text: &str) -> RunConfig {
    RunConfig::parse_str(text).expect("valid configuration")
}

fn exact_conservation() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for inv in ["1", "3", "1,3", "1,2,3"] {
        let c = cfg(&format!("method=scheme_a\ntableau=rk4\ndgrad=sci\ne=0.6\ninvariants={inv}\nh=0.2\nsteps=2000"));
        let start = Instant::now();
        let t = run(&c).expect("run");
        let secs = start.elapsed().as_secs_f64();
        let worst = t.max_drift().into_iter().fold(0.0, f64::max);
        ok &= t.is_complete() && worst <= 1e-10 && secs <= 60.0;
        parts.push(format!("{{{inv}}} drift {worst:.2e} in {secs:.2}s"));
    }
    outcome(ok, parts.join("; "))
}

fn show(s: Option<f64>) -> String {
    s.map_or("none".to_string(), |s| format!("{s:.3}"))
}

fn slope_of(method: &str, hs: &[f64]) -> Option<f64> {
    order_study(&cfg(&format!("method={method}")), hs, 1.0).expect("order study").slope
}

const SWEEP: [f64; 4] = [0.02, 0.01, 0.005, 0.0025];
// the seventh-order scheme reaches the roundoff floor on the finer sweep
const COARSE_SWEEP: [f64; 4] = [0.25, 0.2, 0.125, 0.1];

fn order_retention() -> Outcome {
    let s2 = slope_of("RK2Proj123", &SWEEP);
    let s4 = slope_of("RK4Proj123", &SWEEP);
    let s5 = slope_of("RK5Proj123", &SWEEP);
    let s7 = slope_of("RK7Proj123", &COARSE_SWEEP);
    let within = |s: Option<f64>, p: f64| s.is_some_and(|s| (s - p).abs() <= 0.3);
    let at_least = |s: Option<f64>, p: f64| s.is_some_and(|s| s >= p);
    outcome(
        within(s2, 2.0) && within(s4, 4.0) && at_least(s5, 4.5) && at_least(s7, 6.0),
        format!(
            "slopes RK2 {}, RK4 {}, RK5 {}, RK7 {} (T=1; RK7 on h = 0.25..0.1)",
            show(s2),
            show(s4),
            show(s5),
            show(s7)
        ),
    )
}

fn local_coordinates() -> Outcome {
    let mut c = cfg("method=local\ntableau=rk4\ninvariants=1,2,3");
    let study = order_study(&c, &SWEEP, 1.0).expect("order study");
    c.h = 0.1;
    c.steps = 1000;
    let t = run(&c).expect("run");
    let drift = t.max_drift().into_iter().fold(0.0, f64::max);
    let slope_ok = study.slope.is_some_and(|s| (s - 4.0).abs() <= 0.3);
    outcome(
        slope_ok && t.is_complete() && drift <= 1e-10,
        format!("slope {}, drift over 1000 steps at h=0.1 {drift:.2e}", show(study.slope)),
    )
}

fn qualitative_anchors() -> Outcome {
    let plain = run(&cfg("method=RK4\ninvariants=1,3\nh=0.2\nsteps=500")).expect("run");
    let r: Vec<f64> = plain.records.iter().map(|r| r.state[0].hypot(r.state[1])).collect();
    let minima: Vec<(f64, f64)> = (1..r.len() - 1)
        .filter(|&i| r[i] < r[i - 1] && r[i] <= r[i + 1])
        .map(|i| (i as f64, r[i]))
        .collect();
    // least-squares trend of the per-orbit minimum radius
    let n = minima.len() as f64;
    let (mx, my) = (minima.iter().map(|p| p.0).sum::<f64>() / n, minima.iter().map(|p| p.1).sum::<f64>() / n);
    let trend = minima.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / minima.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let strictly = minima.windows(2).all(|w| w[1].1 < w[0].1);
    let first = minima.first().map_or(f64::NAN, |p| p.1);
    let last = minima.last().map_or(f64::NAN, |p| p.1);

    let dev1: Vec<f64> = plain.records.iter().map(|r| r.deviations[0].abs()).collect();
    let dev1_monotone = dev1.windows(2).all(|w| w[1] >= w[0]);

    let proj = run(&cfg("method=RK4Proj13\nh=0.2\nsteps=500")).expect("run");
    let drift = proj.max_drift();
    let ok = minima.len() >= 2 && trend < 0.0 && last < first && proj.is_complete() && drift.iter().all(|&d| d <= 1e-10);
    outcome(
        ok,
        format!(
            "plain RK4: {} minima, radius {first:.3} -> {last:.3}, trend {trend:.2e}/step, strictly monotone: {strictly}, \
             final |dev_H1| {:.2e} (monotone: {dev1_monotone}); RK4Proj13 drift H1 {:.2e}, H3 {:.2e}",
            minima.len(),
            dev1.last().copied().unwrap_or(f64::NAN),
            drift[0],
            drift[1]
        ),
    )
}

fn qr_derivative() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let opts = QrOptions::default();
    let eps = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m = rng.gen_range(1..=8);
        let q = rng.gen_range(1..=m.min(3));
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let y = Matrix::from_row_major(m, q, draw(m * q));
        let dy = Matrix::from_row_major(m, q, draw(m * q));
        let x = draw(m);
        let (f, df, _) = householder_qr_with_derivative_counted(&y, &dy, &opts).expect("qr");
        let (got, _) = apply_dq_counted(&f, &df, &x).expect("dq");
        let plus = householder_qr(&y.sub(&dy.scaled(-eps)), &opts).expect("qr+");
        let minus = householder_qr(&y.sub(&dy.scaled(eps)), &opts).expect("qr-");
        let fd: Vec<f64> = apply_q(&plus, &x)
            .unwrap()
            .iter()
            .zip(apply_q(&minus, &x).unwrap())
            .map(|(a, b)| (a - b) / (2.0 * eps))
            .collect();
        worst = worst.max(dist(&got, &fd) / norm(&fd).max(1e-8));
    }

    let q = 3;
    let mut qr_ratio = Vec::new();
    let mut dq_ratio = Vec::new();
    for m in [8usize, 16, 32] {
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let y = Matrix::from_row_major(m, q, draw(m * q));
        let dy = Matrix::from_row_major(m, q, draw(m * q));
        let (f, df, ops) = householder_qr_with_derivative_counted(&y, &dy, &opts).expect("qr");
        let (_, dq_ops) = apply_dq_counted(&f, &df, &draw(m)).expect("dq");
        qr_ratio.push(ops as f64 / (m * q * q + q * q * q) as f64);
        dq_ratio.push(dq_ops as f64 / (m * q) as f64);
    }
    let spread = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min);
    let ok = worst <= 1e-6 && spread(&qr_ratio) <= 2.0 && spread(&dq_ratio) <= 2.0;
    outcome(
        ok,
        format!(
            "max relative FD error {worst:.2e}; ops/(mq^2+q^3) {:.1?}, DQ ops/(mq) {:.1?} for m = 8, 16, 32",
            qr_ratio, dq_ratio
        ),
    )
}

fn random_state(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let r = rng.gen_range(0.3..2.0);
    let th = rng.gen_range(0.0..std::f64::consts::TAU);
    vec![r * th.cos(), r * th.sin(), rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)]
}

fn appendix_jacobians() -> Outcome {
    let p = kepler_problem(0.6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let tol = 1e-7;
    for _ in 0..100 {
        let v = random_state(&mut rng);
        let u: Vec<f64> = v.iter().map(|x| x + rng.gen_range(-0.2..0.2)).collect();
        for h in p.invariants() {
            let h = &**h;
            for sym in [false, true] {
                let grad = |w: &[f64]| if sym { sci_gradient(h, &v, w, tol) } else { ci_gradient(h, &v, w, tol) };
                let jac = if sym { sci_gradient_jacobian(h, &v, &u) } else { ci_gradient_jacobian(h, &v, &u) }.unwrap();
                let mut fd = Matrix::zeros(4, 4);
                for j in 0..4 {
                    let step = 1e-6 * (1.0 + u[j].abs());
                    let (mut up, mut um) = (u.clone(), u.clone());
                    up[j] += step;
                    um[j] -= step;
                    let (gp, gm) = (grad(&up).unwrap(), grad(&um).unwrap());
                    for i in 0..4 {
                        fd[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
                    }
                }
                worst = worst.max(jac.sub(&fd).frobenius_norm() / fd.frobenius_norm().max(1.0));
            }
        }
    }
    outcome(worst <= 1e-6, format!("max relative deviation from central differences {worst:.2e} (H1..H4, CI and SCI)"))
}

fn projection_cfg(variant: ProjectionVariant, tab: Tableau, subset: Vec<usize>) -> ProjectionMethodConfig<f64> {
    ProjectionMethodConfig::new(variant, tab, Strategy::sci(), subset).unwrap()
}

fn scheme_equivalence() -> Outcome {
    let p = kepler_problem(0.6).unwrap();
    let mut worst = 0.0f64;
    for name in ["euler", "rk2", "heun", "rk4", "rk5", "rk7"] {
        let tab = Tableau::builtin(name).unwrap();
        let a = projection_cfg(ProjectionVariant::SchemeA, tab.clone(), vec![0, 2]);
        let b = projection_cfg(ProjectionVariant::SchemeB, tab, vec![0, 2]);
        let mut y = p.initial_state().to_vec();
        for _ in 0..20 {
            let ya = scheme_a_step(&a, &p, &y, 0.1).unwrap().state;
            let yb = scheme_b_step(&b, &p, &y, 0.1).unwrap().state;
            worst = worst.max(dist(&ya, &yb));
            y = ya;
        }
    }
    let a = projection_cfg(ProjectionVariant::SchemeA, Tableau::implicit_midpoint(), vec![0, 2]);
    let b = projection_cfg(ProjectionVariant::SchemeB, Tableau::implicit_midpoint(), vec![0, 2]);
    let mut y = p.initial_state().to_vec();
    let mut smallest_gap = f64::INFINITY;
    for _ in 0..20 {
        let ya = scheme_a_step(&a, &p, &y, 0.1).unwrap().state;
        let yb = scheme_b_step(&b, &p, &y, 0.1).unwrap().state;
        smallest_gap = smallest_gap.min(dist(&ya, &yb));
        y = ya;
    }
    outcome(
        worst <= 1e-13 && smallest_gap > 1e-8,
        format!("explicit tableaus max per-step |A-B| {worst:.2e}; midpoint min per-step |A-B| {smallest_gap:.2e}"),
    )
}

fn symmetry() -> Outcome {
    let p = kepler_problem(0.6).unwrap();
    let c = projection_cfg(ProjectionVariant::SchemeB, Tableau::implicit_midpoint(), vec![0, 1]);
    let mut y = p.initial_state().to_vec();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let fwd = scheme_b_step(&c, &p, &y, 0.1).unwrap().state;
        let back = scheme_b_step(&c, &p, &fwd, -0.1).unwrap().state;
        worst = worst.max(dist(&back, &y));
        y = fwd;
    }
    outcome(worst <= 1e-10, format!("max |B(-h) o B(h) y - y| over 20 start points {worst:.2e}"))
}

fn comparison() -> Outcome {
    let a = cfg("method=scheme_a\ntableau=midpoint\ninvariants=1,2\ne=0.6\nh=0.1\nsteps=1000");
    let mut s = a.clone();
    s.method = MethodVariant::StandardOrthogonal;
    let report = compare_standard(&a, &s).expect("comparison");
    let ok = report
        .methods
        .iter()
        .all(|m| m.completed && m.max_drift.iter().all(|&d| d <= 1e-10));
    let parts: Vec<String> = report
        .methods
        .iter()
        .map(|m| {
            format!(
                "{} ({}): drift H1 {:.2e}, H2 {:.2e}, error {:.3e}, {} iterations, {:.3}s",
                m.label,
                m.method,
                m.max_drift[0],
                m.max_drift[1],
                m.final_error.unwrap_or(f64::NAN),
                m.solver_iterations,
                m.wall_time.as_secs_f64()
            )
        })
        .collect();
    outcome(ok, parts.join("; "))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("exact conservation", exact_conservation),
        ("order retention", order_retention),
        ("local coordinates", local_coordinates),
        ("qualitative anchors", qualitative_anchors),
        ("derivative-propagating QR", qr_derivative),
        ("discrete-gradient Jacobians", appendix_jacobians),
        ("scheme equivalence and distinction", scheme_equivalence),
        ("symmetry", symmetry),
        ("comparison harness", comparison),
    ];
    // keep the slope helper exercised for the floor rule
    assert_eq!(fit_slope(&[(0.1, 1e-13), (0.05, 1e-14), (0.02, 1e-15)], 1e-12), None);
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("{tag} [{}] {name}: {} ({:.1}s)", i + 1, o.detail, start.elapsed().as_secs_f64());
        if !o.passed {
            failures += 1;
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
