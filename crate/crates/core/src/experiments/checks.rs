use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{order_study, simulate, RunConfig, Trajectory};
use crate::dgrad::{assemble_y, DiscreteGradientStrategy};
use crate::error::Result;
use crate::integrator::{Integrator, MethodVariant};
use crate::linalg::vecops::{dist, dot, norm};
use crate::linalg::{
    apply_dq, apply_q, householder_qr, householder_qr_with_derivative, DenseMatrix, QrOptions,
};
use crate::localcoords::{local_step, LocalCoordinatesConfig};
use crate::problems::{harmonic_oscillator, kepler_problem, OdeProblem};
use crate::projection::{scheme_a_step, scheme_b_step, ProjectionMethodConfig, ProjectionVariant};
use crate::rk::ButcherTableau;
use crate::solvers::SolverOptions;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn bound(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.to_string(),
            passed: value <= limit,
            detail: format!("{value:.3e} <= {limit:.0e}"),
        }
    }

    fn failed(name: &str, err: impl std::fmt::Display) -> Self {
        Self {
            name: name.to_string(),
            passed: false,
            detail: err.to_string(),
        }
    }
}

fn guarded(name: &str, f: impl FnOnce() -> Result<CheckResult>) -> CheckResult {
    f().unwrap_or_else(|e| CheckResult::failed(name, e))
}

/// Checks on a finished run: completion, and for invariant-preserving
/// methods a drift of at most `1e-10` per logged invariant.
pub fn check_run(cfg: &RunConfig, traj: &Trajectory) -> Vec<CheckResult> {
    let mut out = vec![CheckResult {
        name: "run completed".into(),
        passed: traj.is_complete(),
        detail: match &traj.failure {
            Some(e) => e.to_string(),
            None => format!("{} steps", traj.records.len() - 1),
        },
    }];
    if cfg.method.uses_invariants() {
        let selected = cfg.invariants.clone();
        for (i, d) in traj.invariants.iter().zip(traj.max_drift()) {
            if selected.contains(i) {
                out.push(CheckResult::bound(&format!("drift of H{i}"), d, 1e-10));
            }
        }
    }
    out
}

fn random_kepler_state(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let r = rng.gen_range(0.3..2.0);
    let th = rng.gen_range(0.0..std::f64::consts::TAU);
    vec![r * th.cos(), r * th.sin(), rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)]
}

fn kepler_cfg(variant: ProjectionVariant, tab: ButcherTableau<f64>, subset: Vec<usize>) -> Result<ProjectionMethodConfig<f64>> {
    ProjectionMethodConfig::new(variant, tab, DiscreteGradientStrategy::sci(), subset)
}

fn first_integrals(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let p = kepler_problem(0.6f64)?;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let y = random_kepler_state(rng);
        let f = p.field(&y)?;
        for h in p.invariants() {
            let g = h.gradient(&y)?;
            worst = worst.max(dot(&g, &f).abs() / (1.0 + norm(&g) * norm(&f)));
        }
    }
    Ok(CheckResult::bound("Kepler first integrals: <grad H, f> = 0", worst, 1e-12))
}

fn discrete_gradient_identity(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let p = kepler_problem(0.6f64)?;
    let mut worst = 0.0f64;
    for s in [DiscreteGradientStrategy::ci(), DiscreteGradientStrategy::sci()] {
        for _ in 0..500 {
            let v = random_kepler_state(rng);
            let u: Vec<f64> = v.iter().map(|x| x + rng.gen_range(-0.1..0.1)).collect();
            for h in p.invariants() {
                let g = s.gradient(&**h, &v, &u)?;
                let du: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
                let (hu, hv) = (h.value(&u)?, h.value(&v)?);
                worst = worst.max((hu - hv - dot(&g, &du)).abs() / (1.0 + hu.abs() + hv.abs()));
            }
        }
    }
    Ok(CheckResult::bound("CI/SCI discrete-gradient identity", worst, 1e-13))
}

fn qr_properties(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m = rng.gen_range(2..=8);
        let q = rng.gen_range(1..=m.min(3));
        let y = DenseMatrix::from_row_major(m, q, (0..m * q).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let f = householder_qr(&y, &QrOptions::default())?;
        let qm = f.explicit_q();
        let mut rfull = DenseMatrix::zeros(m, q);
        for i in 0..q {
            for j in 0..q {
                rfull[(i, j)] = f.r()[(i, j)];
            }
        }
        let recon = qm.matmul(&rfull).sub(&y).frobenius_norm() / y.frobenius_norm();
        let orth = qm.transpose().matmul(&qm).sub(&DenseMatrix::identity(m)).frobenius_norm();
        worst = worst.max(recon).max(orth);
    }
    Ok(CheckResult::bound("Householder QR reconstruction and orthogonality", worst, 1e-12))
}

fn qr_derivative(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let eps = 1e-6;
    let opts = QrOptions::default();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m = rng.gen_range(2..=8);
        let q = rng.gen_range(1..=m.min(3));
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let y = DenseMatrix::from_row_major(m, q, draw(m * q));
        let dy = DenseMatrix::from_row_major(m, q, draw(m * q));
        let x = draw(m);
        let (f, df) = householder_qr_with_derivative(&y, &dy, &opts)?;
        let got = apply_dq(&f, &df, &x)?;
        let plus = householder_qr(&y.sub(&dy.scaled(-eps)), &opts)?;
        let minus = householder_qr(&y.sub(&dy.scaled(eps)), &opts)?;
        let fd: Vec<f64> = apply_q(&plus, &x)?
            .iter()
            .zip(apply_q(&minus, &x)?)
            .map(|(a, b)| (a - b) / (2.0 * eps))
            .collect();
        worst = worst.max(dist(&got, &fd) / norm(&fd).max(1.0));
    }
    Ok(CheckResult::bound("DQ x against central differences of Q x", worst, 1e-6))
}

fn conservation(steps: usize) -> Result<CheckResult> {
    let p = kepler_problem(0.6f64)?;
    let mut worst = 0.0f64;
    for subset in [vec![0], vec![2], vec![0, 2], vec![0, 1, 2]] {
        let it = Integrator::new(
            MethodVariant::SchemeA,
            ButcherTableau::rk4_classical(),
            DiscreteGradientStrategy::sci(),
            subset.clone(),
            SolverOptions::default(),
        )?;
        let traj = simulate(&p, &it, &subset, 0.2, steps)?;
        if let Some(e) = traj.failure {
            return Err(e);
        }
        worst = worst.max(traj.max_drift().into_iter().fold(0.0, f64::max));
    }
    Ok(CheckResult::bound(
        &format!("scheme A conservation, Kepler h=0.2, {steps} steps"),
        worst,
        1e-10,
    ))
}

fn orthogonality_witness() -> Result<CheckResult> {
    let p = kepler_problem(0.6f64)?;
    let cfg = kepler_cfg(ProjectionVariant::SchemeA, ButcherTableau::rk4_classical(), vec![0, 2])?;
    let invs = p.select(&cfg.invariant_subset)?;
    let mut y = p.initial_state().to_vec();
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let next = scheme_a_step(&cfg, &p, &y, 0.2)?.state;
        let g = assemble_y(&cfg.strategy, &invs, &y, &next)?;
        let dy: Vec<f64> = next.iter().zip(&y).map(|(a, b)| a - b).collect();
        for c in g.columns() {
            worst = worst.max(dot(&c, &dy).abs() / norm(&c).max(1.0));
        }
        y = next;
    }
    Ok(CheckResult::bound("discrete tangency of the scheme A increment", worst, 1e-12))
}

fn scheme_equivalence() -> Result<Vec<CheckResult>> {
    let p = kepler_problem(0.6f64)?;
    let mut worst = 0.0f64;
    for tab in [ButcherTableau::euler(), ButcherTableau::rk4_classical(), ButcherTableau::rk5()] {
        let a = kepler_cfg(ProjectionVariant::SchemeA, tab.clone(), vec![0, 1])?;
        let b = kepler_cfg(ProjectionVariant::SchemeB, tab, vec![0, 1])?;
        let mut y = p.initial_state().to_vec();
        for _ in 0..10 {
            let ya = scheme_a_step(&a, &p, &y, 0.1)?.state;
            let yb = scheme_b_step(&b, &p, &y, 0.1)?.state;
            worst = worst.max(dist(&ya, &yb));
            y = ya;
        }
    }
    let mid_a = kepler_cfg(ProjectionVariant::SchemeA, ButcherTableau::implicit_midpoint(), vec![0, 1])?;
    let mid_b = kepler_cfg(ProjectionVariant::SchemeB, ButcherTableau::implicit_midpoint(), vec![0, 1])?;
    let y0 = p.initial_state();
    let gap = dist(&scheme_a_step(&mid_a, &p, y0, 0.1)?.state, &scheme_b_step(&mid_b, &p, y0, 0.1)?.state);
    Ok(vec![
        CheckResult::bound("scheme A equals scheme B for explicit tableaus", worst, 1e-13),
        CheckResult {
            name: "scheme A differs from scheme B for the midpoint rule".into(),
            passed: gap > 1e-8,
            detail: format!("{gap:.3e} > 1e-8"),
        },
    ])
}

fn symmetry() -> Result<CheckResult> {
    let p = kepler_problem(0.6f64)?;
    let cfg = kepler_cfg(ProjectionVariant::SchemeB, ButcherTableau::implicit_midpoint(), vec![0, 1])?;
    let y0 = p.initial_state();
    let y1 = scheme_b_step(&cfg, &p, y0, 0.1)?.state;
    let back = scheme_b_step(&cfg, &p, &y1, -0.1)?.state;
    Ok(CheckResult::bound("scheme B with midpoint and SCI is symmetric", dist(&back, y0), 1e-10))
}

fn order(method: &str, expected: f64) -> Result<CheckResult> {
    let cfg = RunConfig::parse_str(&format!("method={method}"))?;
    let study = order_study(&cfg, &[0.02, 0.01, 0.005, 0.0025], 1.0)?;
    let name = format!("{method} convergence slope {expected} +- 0.3");
    Ok(match study.slope {
        Some(s) => CheckResult {
            name,
            passed: (s - expected).abs() <= 0.3,
            detail: format!("slope {s:.3}"),
        },
        None => CheckResult::failed(&name, "all errors below the roundoff floor"),
    })
}

fn local_conservation(steps: usize) -> Result<CheckResult> {
    let p = kepler_problem(0.6f64)?;
    let cfg = LocalCoordinatesConfig::new(ButcherTableau::rk4_classical(), DiscreteGradientStrategy::sci(), vec![0, 1]);
    let h0 = p.invariant_values(&[0, 1], p.initial_state())?;
    let mut y = p.initial_state().to_vec();
    let mut worst = 0.0f64;
    for _ in 0..steps {
        y = local_step(&cfg, &p, &y, 0.1)?.state;
        for (a, b) in p.invariant_values(&[0, 1], &y)?.iter().zip(h0.iter()) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(CheckResult::bound(
        &format!("local coordinates conservation, {steps} steps"),
        worst,
        1e-10,
    ))
}

fn harmonic_smoke() -> Result<CheckResult> {
    let p: OdeProblem<f64> = harmonic_oscillator();
    let mut worst = 0.0f64;
    for v in [
        MethodVariant::SchemeA,
        MethodVariant::SchemeB,
        MethodVariant::StandardOrthogonal,
        MethodVariant::LocalCoordinates,
    ] {
        let it = Integrator::new(
            v,
            ButcherTableau::implicit_midpoint(),
            DiscreteGradientStrategy::sci(),
            vec![0],
            SolverOptions::default(),
        )?;
        let traj = simulate(&p, &it, &[0], 0.1, 10)?;
        if let Some(e) = traj.failure {
            return Err(e);
        }
        worst = worst.max(traj.max_drift()[0]);
    }
    Ok(CheckResult::bound("harmonic oscillator, all projected methods", worst, 1e-12))
}

/// The property suite behind the `check` command. `quick` shortens the
/// trajectory-based checks.
pub fn property_suite(seed: u64, quick: bool) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (long, local) = if quick { (200, 100) } else { (2000, 1000) };
    let mut out = vec![
        guarded("first integrals", || first_integrals(&mut rng)),
        guarded("discrete-gradient identity", || discrete_gradient_identity(&mut rng)),
        guarded("QR", || qr_properties(&mut rng)),
        guarded("QR derivative", || qr_derivative(&mut rng)),
        guarded("harmonic", harmonic_smoke),
        guarded("conservation", || conservation(long)),
        guarded("tangency", orthogonality_witness),
        guarded("symmetry", symmetry),
        guarded("local conservation", || local_conservation(local)),
        guarded("RK2Proj123 order", || order("RK2Proj123", 2.0)),
        guarded("RK4Proj123 order", || order("RK4Proj123", 4.0)),
    ];
    match scheme_equivalence() {
        Ok(v) => out.extend(v),
        Err(e) => out.push(CheckResult::failed("scheme equivalence", e)),
    }
    out
}
