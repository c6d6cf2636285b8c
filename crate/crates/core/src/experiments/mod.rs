//! Experiment driver: trajectories with invariant drift logging,
//! convergence-order studies and the comparison against the standard
//! orthogonal projection. Everything here runs in `f64`.

mod checks;
mod config;

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

pub use checks::{check_run, property_suite, CheckResult};
pub use config::{parse_scheme_name, ProblemId, RunConfig, CONFIG_KEYS};

use crate::error::{Error, Result};
use crate::integrator::{Integrator, MethodVariant};
use crate::linalg::vecops::dist;
use crate::problems::OdeProblem;

/// Errors below this are treated as roundoff and excluded from slope fits.
pub const ERROR_FLOOR: f64 = 1e-12;

/// Default tableau of `integrate` and `order-study`.
pub const DEFAULT_TABLEAU: &str = "rk4";
/// Default tableau of `compare`.
pub const DEFAULT_COMPARE_TABLEAU: &str = "midpoint";

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub state: Vec<f64>,
    /// `H_i(yⁿ) − H_i(y⁰)` for the logged invariants.
    pub deviations: Vec<f64>,
    pub solver_iters: usize,
}

#[derive(Debug)]
pub struct Trajectory {
    /// 1-based indices of the logged invariants.
    pub invariants: Vec<usize>,
    pub records: Vec<StepRecord>,
    pub requested_steps: usize,
    /// Set when a step failed; `records` then ends at the last accepted
    /// step.
    pub failure: Option<Error>,
    pub wall_time: Duration,
}

impl Trajectory {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none() && self.records.len() == self.requested_steps + 1
    }

    pub fn final_state(&self) -> &[f64] {
        &self.records.last().expect("trajectory has the initial record").state
    }

    /// `max_n |H_i(yⁿ) − H_i(y⁰)|` per logged invariant.
    pub fn max_drift(&self) -> Vec<f64> {
        let mut out = vec![0.0f64; self.invariants.len()];
        for r in &self.records {
            for (o, d) in out.iter_mut().zip(&r.deviations) {
                *o = o.max(d.abs());
            }
        }
        out
    }

    pub fn total_solver_iterations(&self) -> usize {
        self.records.iter().map(|r| r.solver_iters).sum()
    }

    /// Writes the trajectory CSV:
    /// `step,t,y1..ym,dev_H<i>..,solver_iters`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let m = self.records.first().map_or(0, |r| r.state.len());
        let mut header = vec!["step".to_string(), "t".to_string()];
        header.extend((1..=m).map(|i| format!("y{i}")));
        header.extend(self.invariants.iter().map(|i| format!("dev_H{i}")));
        header.push("solver_iters".into());
        wr.write_record(&header).map_err(csv_error)?;
        for r in &self.records {
            let mut row = vec![r.step.to_string(), fmt_float(r.t)];
            row.extend(r.state.iter().map(|&x| fmt_float(x)));
            row.extend(r.deviations.iter().map(|&x| fmt_float(x)));
            row.push(r.solver_iters.to_string());
            wr.write_record(&row).map_err(csv_error)?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Shortest round-trip scientific notation.
pub fn fmt_float(x: f64) -> String {
    format!("{x:e}")
}

/// Integrates `steps` steps, logging deviations of `log_subset` (0-based).
/// A failing step ends the trajectory and is stored in
/// [`Trajectory::failure`].
pub fn simulate(
    problem: &OdeProblem<f64>,
    integrator: &Integrator<f64>,
    log_subset: &[usize],
    h: f64,
    steps: usize,
) -> Result<Trajectory> {
    let start = Instant::now();
    let y0 = problem.initial_state().to_vec();
    let h0 = problem.invariant_values(log_subset, &y0)?;
    let targets = if integrator.variant() == MethodVariant::StandardOrthogonal {
        Some(problem.invariant_values(integrator.invariant_subset(), &y0)?)
    } else {
        None
    };
    let mut records = Vec::with_capacity(steps + 1);
    records.push(StepRecord {
        step: 0,
        t: 0.0,
        state: y0,
        deviations: vec![0.0; log_subset.len()],
        solver_iters: 0,
    });
    let mut failure = None;
    for n in 1..=steps {
        let prev = &records.last().expect("nonempty").state;
        let outcome = integrator
            .step(problem, prev, h, targets.as_deref())
            .and_then(|o| Ok((problem.invariant_values(log_subset, &o.state)?, o)));
        match outcome {
            Ok((values, o)) => records.push(StepRecord {
                step: n,
                t: n as f64 * h,
                state: o.state,
                deviations: values.iter().zip(&h0).map(|(a, b)| a - b).collect(),
                solver_iters: o.iterations,
            }),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    Ok(Trajectory {
        invariants: log_subset.iter().map(|i| i + 1).collect(),
        records,
        requested_steps: steps,
        failure,
        wall_time: start.elapsed(),
    })
}

/// Path of the metadata file next to an output CSV.
pub fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn write_meta(path: &Path, cfg: &RunConfig, traj: &Trajectory) -> Result<()> {
    let mut text = String::new();
    let status = if traj.is_complete() { "complete" } else { "incomplete" };
    let _ = writeln!(text, "status={status}");
    let _ = writeln!(text, "steps_completed={}", traj.records.len() - 1);
    if let Some(e) = &traj.failure {
        let _ = writeln!(text, "error={}", e.to_string().replace('\n', " "));
    }
    for (k, v) in cfg.echo(DEFAULT_TABLEAU) {
        let _ = writeln!(text, "{k}={v}");
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Runs one configuration. When `cfg.out` is set, writes the CSV and a
/// `<out>.meta` file whose `status` line is `incomplete` after a failed
/// step. Configuration problems are returned as errors; step failures are
/// reported through [`Trajectory::failure`].
pub fn run(cfg: &RunConfig) -> Result<Trajectory> {
    let (problem, integrator) = cfg.resolve(DEFAULT_TABLEAU)?;
    let traj = simulate(&problem, &integrator, &cfg.subset(), cfg.h, cfg.steps)?;
    if let Some(out) = &cfg.out {
        traj.write_csv(BufWriter::new(File::create(out)?))?;
        write_meta(&meta_path(out), cfg, &traj)?;
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderStudy {
    pub t_final: f64,
    /// `(h, ‖y_N − y(T)‖)`.
    pub points: Vec<(f64, f64)>,
    /// Least-squares slope of `log error` against `log h` over the points
    /// above [`ERROR_FLOOR`]; `None` when fewer than two remain.
    pub slope: Option<f64>,
}

impl OrderStudy {
    /// `h,error` rows followed by `slope=<value>` (`slope=skipped` when
    /// the fit was skipped).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "h,error")?;
        for (h, e) in &self.points {
            writeln!(w, "{},{}", fmt_float(*h), fmt_float(*e))?;
        }
        match self.slope {
            Some(s) => writeln!(w, "slope={}", fmt_float(s))?,
            None => writeln!(w, "slope=skipped")?,
        }
        Ok(())
    }
}

/// Least-squares slope of `log y` against `log x` over the points with
/// `y > floor`.
pub fn fit_slope(points: &[(f64, f64)], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(h, e)| *e > floor && e.is_finite() && *h > 0.0)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Global error at `t_final` for each step size, integrated in parallel.
///
/// Each `h` must divide `t_final` (to relative `1e-9`).
pub fn order_study(template: &RunConfig, h_list: &[f64], t_final: f64) -> Result<OrderStudy> {
    if h_list.len() < 3 {
        return Err(Error::Config("an order study needs at least three step sizes".into()));
    }
    let mut runs = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let steps = (t_final / h).round();
        if !(h > 0.0) || steps < 1.0 || ((steps * h - t_final) / t_final).abs() > 1e-9 {
            return Err(Error::Config(format!("step size {h} does not divide the final time {t_final}")));
        }
        let mut cfg = template.clone();
        cfg.h = h;
        cfg.steps = steps as usize;
        cfg.out = None;
        let (problem, integrator) = cfg.resolve(DEFAULT_TABLEAU)?;
        if !problem.has_reference() {
            return Err(Error::Config(format!("problem `{}` has no reference solution", problem.name())));
        }
        runs.push((cfg, problem, integrator));
    }
    let results: Vec<Result<(f64, f64)>> = std::thread::scope(|s| {
        let handles: Vec<_> = runs
            .iter()
            .map(|(cfg, problem, integrator)| {
                s.spawn(move || -> Result<(f64, f64)> {
                    let traj = simulate(problem, integrator, &[], cfg.h, cfg.steps)?;
                    if let Some(e) = traj.failure {
                        return Err(e);
                    }
                    let t_end = cfg.steps as f64 * cfg.h;
                    let exact = problem.reference(t_end)?;
                    Ok((cfg.h, dist(traj.final_state(), &exact)))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("order-study worker panicked")).collect()
    });
    let points = results.into_iter().collect::<Result<Vec<_>>>()?;
    let slope = fit_slope(&points, ERROR_FLOOR);
    Ok(OrderStudy { t_final, points, slope })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodReport {
    pub label: String,
    pub method: MethodVariant,
    pub tableau: String,
    pub steps_completed: usize,
    pub completed: bool,
    pub failure: Option<String>,
    /// `‖y_N − y(t_N)‖`, when a reference exists.
    pub final_error: Option<f64>,
    /// Per selected invariant (1-based in `invariants`).
    pub max_drift: Vec<f64>,
    pub invariants: Vec<usize>,
    pub wall_time: Duration,
    pub solver_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub h: f64,
    pub steps: usize,
    pub methods: Vec<MethodReport>,
    /// True when both slots request the same method variant.
    pub same_variant: bool,
}

impl ComparisonReport {
    /// Plain `key=value` text, one method block per slot.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "h={}", self.h);
        let _ = writeln!(s, "steps={}", self.steps);
        let _ = writeln!(s, "same_variant={}", self.same_variant);
        for m in &self.methods {
            let p = &m.label;
            let _ = writeln!(s, "[{p}]");
            let _ = writeln!(s, "method={}", m.method);
            let _ = writeln!(s, "tableau={}", m.tableau);
            let _ = writeln!(s, "completed={}", m.completed);
            let _ = writeln!(s, "steps_completed={}", m.steps_completed);
            if let Some(f) = &m.failure {
                let _ = writeln!(s, "failure={f}");
            }
            match m.final_error {
                Some(e) => {
                    let _ = writeln!(s, "final_error={}", fmt_float(e));
                }
                None => {
                    let _ = writeln!(s, "final_error=n/a");
                }
            }
            for (i, d) in m.invariants.iter().zip(&m.max_drift) {
                let _ = writeln!(s, "max_drift_H{i}={}", fmt_float(*d));
            }
            let _ = writeln!(s, "wall_time_s={:.6}", m.wall_time.as_secs_f64());
            let _ = writeln!(s, "solver_iterations={}", m.solver_iterations);
        }
        s
    }
}

fn report_for(label: &str, cfg: &RunConfig) -> Result<MethodReport> {
    let (problem, integrator) = cfg.resolve(DEFAULT_COMPARE_TABLEAU)?;
    let traj = simulate(&problem, &integrator, &cfg.subset(), cfg.h, cfg.steps)?;
    let steps_completed = traj.records.len() - 1;
    let final_error = if problem.has_reference() {
        let t = steps_completed as f64 * cfg.h;
        Some(dist(traj.final_state(), &problem.reference(t)?))
    } else {
        None
    };
    Ok(MethodReport {
        label: label.to_string(),
        method: cfg.method,
        tableau: integrator.tableau().name().to_string(),
        steps_completed,
        completed: traj.is_complete(),
        failure: traj.failure.as_ref().map(ToString::to_string),
        final_error,
        max_drift: traj.max_drift(),
        invariants: traj.invariants.clone(),
        wall_time: traj.wall_time,
        solver_iterations: traj.total_solver_iterations(),
    })
}

/// Runs both configurations (sequentially, so timings are comparable)
/// and reports error, drift, wall time and iteration totals.
pub fn compare_standard(cfg_a: &RunConfig, cfg_std: &RunConfig) -> Result<ComparisonReport> {
    if cfg_a.problem != cfg_std.problem || cfg_a.e != cfg_std.e {
        return Err(Error::Config("compared configurations must target the same problem".into()));
    }
    if cfg_a.subset() != cfg_std.subset() {
        return Err(Error::Config("compared configurations must select the same invariants".into()));
    }
    if cfg_a.h != cfg_std.h || cfg_a.steps != cfg_std.steps {
        return Err(Error::Config("compared configurations must share h and steps".into()));
    }
    let a = report_for("first", cfg_a)?;
    let b = report_for("second", cfg_std)?;
    Ok(ComparisonReport {
        h: cfg_a.h,
        steps: cfg_a.steps,
        same_variant: cfg_a.method == cfg_std.method,
        methods: vec![a, b],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_fit_exact_power() {
        let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.025].iter().map(|&h| (h, 3.0 * h * h * h)).collect();
        assert!((fit_slope(&pts, ERROR_FLOOR).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn slope_fit_skips_floor() {
        let pts = [(0.1, 1e-13), (0.05, 1e-14), (0.025, 2e-13)];
        assert_eq!(fit_slope(&pts, ERROR_FLOOR), None);
        let pts = [(0.1, 1e-4), (0.05, 1e-14), (0.025, 1e-6)];
        let s = fit_slope(&pts, ERROR_FLOOR).unwrap();
        assert!((s - 2.0f64.ln().recip() * (100f64).ln() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn harmonic_run_conserves() {
        let cfg = RunConfig::parse_str("problem=harmonic\nmethod=scheme_b\ntableau=midpoint\nh=0.1\nsteps=10").unwrap();
        let traj = run(&cfg).unwrap();
        assert!(traj.is_complete());
        assert_eq!(traj.records.len(), 11);
        assert!(traj.max_drift()[0] <= 1e-12);
    }

    #[test]
    fn csv_layout() {
        let cfg = RunConfig::parse_str("method=RK4Proj13\nsteps=3").unwrap();
        let traj = run(&cfg).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "step,t,y1,y2,y3,y4,dev_H1,dev_H3,solver_iters");
        assert_eq!(lines.count(), 4);
    }

    #[test]
    fn order_study_needs_divisible_steps() {
        let cfg = RunConfig::parse_str("method=RK4Proj1").unwrap();
        assert!(matches!(order_study(&cfg, &[0.3, 0.2, 0.1], 1.0), Err(Error::Config(_))));
        assert!(matches!(order_study(&cfg, &[0.2, 0.1], 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn comparison_preconditions() {
        let a = RunConfig::parse_str("method=scheme_a\ninvariants=1,2").unwrap();
        let mut b = a.clone();
        b.invariants = vec![1];
        assert!(matches!(compare_standard(&a, &b), Err(Error::Config(_))));
    }
}
