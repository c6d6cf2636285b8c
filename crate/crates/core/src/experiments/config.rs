use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dgrad::{DiscreteGradientKind, DiscreteGradientStrategy};
use crate::error::{Error, Result};
use crate::integrator::{Integrator, MethodVariant};
use crate::problems::{harmonic_oscillator, kepler_problem, OdeProblem};
use crate::rk::ButcherTableau;
use crate::solvers::SolverOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemId {
    Kepler,
    Harmonic,
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kepler" => Ok(ProblemId::Kepler),
            "harmonic" | "oscillator" | "harmonic_oscillator" => Ok(ProblemId::Harmonic),
            other => Err(Error::Config(format!("unknown problem `{other}`"))),
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemId::Kepler => "kepler",
            ProblemId::Harmonic => "harmonic",
        })
    }
}

/// Keys accepted in configuration files and as overrides.
pub const CONFIG_KEYS: &[&str] = &[
    "problem",
    "e",
    "method",
    "tableau",
    "dgrad",
    "invariants",
    "h",
    "steps",
    "out",
    "tol_solver",
    "check",
    "seed",
    "quad_nodes",
    "t_final",
    "h_list",
];

/// One experiment, as read from a flat `key=value` file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemId,
    /// Kepler eccentricity.
    pub e: f64,
    pub method: MethodVariant,
    /// Built-in tableau name or path to a tableau file; `None` means the
    /// command's default.
    pub tableau: Option<String>,
    pub dgrad: DiscreteGradientKind,
    /// AVF Gauss–Legendre nodes.
    pub quad_nodes: usize,
    /// 1-based, as written in configuration files.
    pub invariants: Vec<usize>,
    pub h: f64,
    pub steps: usize,
    pub out: Option<PathBuf>,
    pub tol_solver: f64,
    pub check: bool,
    pub seed: u64,
    /// Final time of order studies.
    pub t_final: f64,
    pub h_list: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemId::Kepler,
            e: 0.6,
            method: MethodVariant::SchemeA,
            tableau: None,
            dgrad: DiscreteGradientKind::Sci,
            quad_nodes: 8,
            invariants: vec![1],
            h: 0.2,
            steps: 500,
            out: None,
            tol_solver: 1e-12,
            check: false,
            seed: 0,
            t_final: 1.0,
            h_list: vec![0.02, 0.01, 0.005, 0.0025],
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean `{value}` for `{key}`"))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

/// Splits a scheme name such as `RK4`, `RK4Proj13` or `MidProj12` into
/// tableau, method and 1-based invariant list.
pub fn parse_scheme_name(name: &str) -> Option<(String, MethodVariant, Vec<usize>)> {
    let lower = name.to_ascii_lowercase();
    let (base, proj) = match lower.find("proj") {
        Some(i) => (&lower[..i], Some(&lower[i + 4..])),
        None => (lower.as_str(), None),
    };
    let tableau = match base {
        "rk1" | "euler" => "euler",
        "rk2" => "rk2",
        "rk4" => "rk4",
        "rk5" => "rk5",
        "rk7" => "rk7",
        "mid" | "midpoint" => "midpoint",
        _ => return None,
    };
    match proj {
        None => Some((tableau.to_string(), MethodVariant::Plain, Vec::new())),
        Some(digits) => {
            if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit() && c != '0') {
                return None;
            }
            let inv = digits.chars().map(|c| c as usize - '0' as usize).collect();
            Some((tableau.to_string(), MethodVariant::SchemeA, inv))
        }
    }
}

impl RunConfig {
    /// Sets one key. `method` also accepts scheme names like `RK4Proj13`,
    /// which set the tableau and the invariant list as well.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "problem" => self.problem = value.parse()?,
            "e" => self.e = parse_value(key, value)?,
            "method" => match parse_scheme_name(value) {
                Some((tab, method, inv)) => {
                    self.tableau = Some(tab);
                    self.method = method;
                    if !inv.is_empty() {
                        self.invariants = inv;
                    }
                }
                None => self.method = value.parse()?,
            },
            "tableau" => self.tableau = Some(value.to_string()),
            "dgrad" => self.dgrad = value.parse()?,
            "quad_nodes" => self.quad_nodes = parse_value(key, value)?,
            "invariants" => self.invariants = parse_list(key, value)?,
            "h" => self.h = parse_value(key, value)?,
            "steps" => self.steps = parse_value(key, value)?,
            "out" => self.out = (!value.is_empty()).then(|| PathBuf::from(value)),
            "tol_solver" => self.tol_solver = parse_value(key, value)?,
            "check" => self.check = parse_bool(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "t_final" => self.t_final = parse_value(key, value)?,
            "h_list" => self.h_list = parse_list(key, value)?,
            other => return Err(Error::Config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    /// Parses `key=value` lines; `#` starts a comment, blank lines are
    /// ignored, later lines win.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_str(text)?;
        Ok(cfg)
    }

    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got `{line}`", lineno + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    /// Tableau id, falling back to `default`.
    pub fn tableau_or<'a>(&'a self, default: &'a str) -> &'a str {
        self.tableau.as_deref().unwrap_or(default)
    }

    pub fn build_problem(&self) -> Result<OdeProblem<f64>> {
        match self.problem {
            ProblemId::Kepler => kepler_problem(self.e),
            ProblemId::Harmonic => Ok(harmonic_oscillator()),
        }
    }

    /// Resolves a built-in name, or else reads a tableau file.
    pub fn build_tableau(&self, default: &str) -> Result<ButcherTableau<f64>> {
        let id = self.tableau_or(default);
        match ButcherTableau::builtin(id) {
            Ok(t) => Ok(t),
            Err(e) => {
                let p = Path::new(id);
                if p.is_file() {
                    ButcherTableau::load(p)
                } else {
                    Err(e)
                }
            }
        }
    }

    pub fn strategy(&self) -> DiscreteGradientStrategy<f64> {
        match self.dgrad {
            DiscreteGradientKind::Avf => DiscreteGradientStrategy::avf(self.quad_nodes),
            kind => DiscreteGradientStrategy::new(kind),
        }
    }

    pub fn solver_options(&self) -> SolverOptions<f64> {
        SolverOptions::default().with_tol(self.tol_solver)
    }

    /// 0-based invariant indices.
    pub fn subset(&self) -> Vec<usize> {
        self.invariants.iter().map(|&i| i.wrapping_sub(1)).collect()
    }

    /// Checks ranges and resolves every id; returns the problem and the
    /// integrator.
    pub fn resolve(&self, default_tableau: &str) -> Result<(OdeProblem<f64>, Integrator<f64>)> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::Config(format!("h must be positive, got {}", self.h)));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if !(self.tol_solver > 0.0) {
            return Err(Error::Config("tol_solver must be positive".into()));
        }
        if self.quad_nodes == 0 {
            return Err(Error::Config("quad_nodes must be at least 1".into()));
        }
        if self.invariants.contains(&0) {
            return Err(Error::Config("invariant indices are 1-based".into()));
        }
        let problem = self.build_problem()?;
        problem.validate_subset(&self.subset())?;
        let tableau = self.build_tableau(default_tableau)?;
        let integrator = Integrator::new(self.method, tableau, self.strategy(), self.subset(), self.solver_options())?;
        integrator.validate(&problem)?;
        Ok((problem, integrator))
    }

    /// Canonical `key=value` listing, used in run metadata.
    pub fn echo(&self, default_tableau: &str) -> BTreeMap<&'static str, String> {
        let join = |v: &[String]| v.join(",");
        let mut m = BTreeMap::new();
        m.insert("problem", self.problem.to_string());
        m.insert("e", format!("{}", self.e));
        m.insert("method", self.method.to_string());
        m.insert("tableau", self.tableau_or(default_tableau).to_string());
        m.insert("dgrad", self.dgrad.to_string());
        m.insert("quad_nodes", self.quad_nodes.to_string());
        m.insert("invariants", join(&self.invariants.iter().map(usize::to_string).collect::<Vec<_>>()));
        m.insert("h", format!("{}", self.h));
        m.insert("steps", self.steps.to_string());
        m.insert("tol_solver", format!("{:e}", self.tol_solver));
        m.insert("seed", self.seed.to_string());
        m
    }
}
