use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{config, Error, Result};
use crate::solve::NewtonOptions;

/// Model problem and domain of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemId {
    HeatSquare,
    HeatLshape,
    ReluLshape,
    SvkSquare,
    SvkCook,
}

impl ProblemId {
    pub const ALL: [ProblemId; 5] = [
        ProblemId::HeatSquare,
        ProblemId::HeatLshape,
        ProblemId::ReluLshape,
        ProblemId::SvkSquare,
        ProblemId::SvkCook,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemId::HeatSquare => "heat-square",
            ProblemId::HeatLshape => "heat-lshape",
            ProblemId::ReluLshape => "relu-lshape",
            ProblemId::SvkSquare => "svk-square",
            ProblemId::SvkCook => "svk-cook",
        }
    }

    /// True when the problem comes with a closed-form solution.
    pub fn has_exact(&self) -> bool {
        matches!(self, ProblemId::HeatSquare | ProblemId::SvkSquare)
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| config(format!("unknown problem '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Uniform,
    Adaptive,
}

/// Adaptive driver: Newton converged on every mesh, or the inexact method
/// with adaptive inner solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Nested,
    Inexact,
}

/// What the discrete solutions are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    Analytic,
    Overkill,
    None,
}

/// Complete description of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemId,
    /// Polynomial degree `k` of the primal space; the flux uses `RT_{k-1}`.
    pub degree: usize,
    pub mode: Mode,
    pub solver: SolverKind,
    pub theta: f64,
    /// Adaptive cycles (nested) or outer Newton steps (inexact).
    pub cycles: usize,
    /// Number of uniform levels, each a red refinement of the previous one.
    pub levels: usize,
    /// Cells per unit length of the initial structured mesh.
    pub initial_n: usize,
    /// Refinements allowed inside one inexact Newton step.
    pub max_refinements: usize,
    pub max_dofs: usize,
    pub lambda: f64,
    pub kappa: f64,
    pub delta: f64,
    pub traction: f64,
    /// Constant volume source replacing the default of the problem.
    pub source: Option<f64>,
    pub reference: ReferenceKind,
    /// Uniform refinements of the last mesh for the overkill solution.
    pub overkill_levels: usize,
    /// Degree increase of the overkill solution.
    pub overkill_boost: usize,
    pub newton: NewtonOptions,
    pub csv: Option<PathBuf>,
    pub vtk: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults of each problem.
    pub fn new(problem: ProblemId) -> Self {
        let (degree, mode, cycles) = match problem {
            ProblemId::HeatSquare => (1, Mode::Uniform, 10),
            ProblemId::SvkSquare => (2, Mode::Uniform, 10),
            ProblemId::HeatLshape | ProblemId::ReluLshape => (1, Mode::Adaptive, 10),
            ProblemId::SvkCook => (2, Mode::Adaptive, 8),
        };
        let kappa = match problem {
            ProblemId::SvkCook => 1000f64.sqrt(),
            ProblemId::ReluLshape => 2.0,
            _ => 1.0,
        };
        Self {
            problem,
            degree,
            mode,
            solver: SolverKind::Nested,
            theta: 0.5,
            cycles,
            levels: 6,
            initial_n: if problem == ProblemId::SvkCook { 5 } else { 2 },
            max_refinements: 10,
            max_dofs: 1_000_000,
            lambda: 2.0,
            kappa,
            delta: 2.0,
            traction: 0.03,
            source: None,
            reference: if problem.has_exact() {
                ReferenceKind::Analytic
            } else {
                ReferenceKind::Overkill
            },
            overkill_levels: 1,
            overkill_boost: 1,
            newton: NewtonOptions::default(),
            csv: None,
            vtk: None,
        }
    }

    /// Parses a flat `key = value` file. Blank lines and lines starting with
    /// `#` are skipped; `problem` is required and fixes the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected key = value, got '{line}'"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("duplicate key '{key}'"),
                });
            }
            entries.push((i + 1, key.to_string(), value.to_string()));
        }
        let problem = entries
            .iter()
            .find(|e| e.1 == "problem")
            .ok_or_else(|| config("missing key 'problem'"))?
            .2
            .parse::<ProblemId>()?;
        let mut cfg = Self::new(problem);
        let mut theta_given = false;
        for (line, key, value) in &entries {
            cfg.set(key, value).map_err(|e| match e {
                Error::Configuration(m) => Error::Configuration(format!("line {line}: {m}")),
                other => other,
            })?;
            theta_given |= key == "theta";
        }
        if !theta_given && problem == ProblemId::HeatLshape && cfg.degree >= 2 {
            cfg.theta = 0.8;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| config(format!("invalid value '{value}' for '{key}'")))
        }
        match key {
            "problem" => self.problem = value.parse()?,
            "degree" => self.degree = num(key, value)?,
            "mode" => {
                self.mode = match value {
                    "uniform" => Mode::Uniform,
                    "adaptive" => Mode::Adaptive,
                    _ => {
                        return Err(config(format!(
                            "mode must be uniform or adaptive, got '{value}'"
                        )))
                    }
                }
            }
            "solver" => {
                self.solver = match value {
                    "nested" => SolverKind::Nested,
                    "inexact" => SolverKind::Inexact,
                    _ => {
                        return Err(config(format!(
                            "solver must be nested or inexact, got '{value}'"
                        )))
                    }
                }
            }
            "reference" => {
                self.reference = match value {
                    "analytic" => ReferenceKind::Analytic,
                    "overkill" => ReferenceKind::Overkill,
                    "none" => ReferenceKind::None,
                    _ => {
                        return Err(config(format!(
                            "reference must be analytic, overkill or none, got '{value}'"
                        )))
                    }
                }
            }
            "theta" => self.theta = num(key, value)?,
            "tau" => self.newton.tau = num(key, value)?,
            "cycles" => self.cycles = num(key, value)?,
            "levels" => self.levels = num(key, value)?,
            "initial_n" => self.initial_n = num(key, value)?,
            "max_refinements" => self.max_refinements = num(key, value)?,
            "max_dofs" => self.max_dofs = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "kappa" => self.kappa = num(key, value)?,
            "delta" => self.delta = num(key, value)?,
            "traction" => self.traction = num(key, value)?,
            "source" => self.source = Some(num(key, value)?),
            "overkill_levels" => self.overkill_levels = num(key, value)?,
            "overkill_boost" => self.overkill_boost = num(key, value)?,
            "abs_tol" => self.newton.abs_tol = num(key, value)?,
            "rel_tol" => self.newton.rel_tol = num(key, value)?,
            "max_iters" => self.newton.max_iters = num(key, value)?,
            "load_steps" => self.newton.load_steps = num(key, value)?,
            "linear_tol" => self.newton.linear_tol = num(key, value)?,
            "csv" => self.csv = Some(PathBuf::from(value)),
            "vtk" => self.vtk = Some(PathBuf::from(value)),
            _ => return Err(config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.degree) {
            return Err(config(format!(
                "degree must be 1, 2 or 3, got {}",
                self.degree
            )));
        }
        if self.mode == Mode::Adaptive && !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(config(format!(
                "adaptive mode needs theta in (0, 1), got {}",
                self.theta
            )));
        }
        if self.cycles == 0 || self.levels == 0 || self.initial_n == 0 {
            return Err(config("cycles, levels and initial_n must be at least 1"));
        }
        match self.reference {
            ReferenceKind::Analytic if !self.problem.has_exact() => {
                return Err(config(format!("{} has no analytic solution", self.problem)));
            }
            ReferenceKind::Overkill if self.degree + self.overkill_boost > 3 => {
                return Err(config(format!(
                    "overkill degree {} exceeds the supported maximum 3",
                    self.degree + self.overkill_boost
                )));
            }
            ReferenceKind::Overkill if self.overkill_levels + self.overkill_boost == 0 => {
                return Err(config(
                    "overkill reference needs overkill_levels or overkill_boost",
                ));
            }
            _ => {}
        }
        if self.source.is_some()
            && !matches!(self.problem, ProblemId::HeatLshape | ProblemId::ReluLshape)
        {
            return Err(config(format!("source cannot be set for {}", self.problem)));
        }
        self.newton.validate().map_err(|e| config(e.to_string()))
    }
}
