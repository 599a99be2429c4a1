use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::caputo::SchemeKind;
use crate::error::{Error, Result};
use crate::pde::LinearSolverKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Ivp,
    Pde,
    Stability,
    Barrier,
    Truncation,
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ivp" => Ok(Self::Ivp),
            "pde" => Ok(Self::Pde),
            "stability" => Ok(Self::Stability),
            "barrier" => Ok(Self::Barrier),
            "truncation" => Ok(Self::Truncation),
            other => Err(Error::Config(format!("unknown experiment kind '{other}'"))),
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ivp => "ivp",
            Self::Pde => "pde",
            Self::Stability => "stability",
            Self::Barrier => "barrier",
            Self::Truncation => "truncation",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorNorm {
    /// Error at `t = T` (maximum over spatial nodes for the PDE).
    FinalTime,
    /// Maximum over all time levels.
    MaxOverTime,
    /// Discrete `L2(Ω)` norm at `t = T` (PDE only).
    SpatialL2,
}

impl FromStr for ErrorNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "final" | "final-time" => Ok(Self::FinalTime),
            "max" | "max-over-time" => Ok(Self::MaxOverTime),
            "l2" | "spatial-l2" => Ok(Self::SpatialL2),
            other => Err(Error::Config(format!("unknown norm '{other}'"))),
        }
    }
}

impl fmt::Display for ErrorNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::FinalTime => "final-time",
            Self::MaxOverTime => "max-over-time",
            Self::SpatialL2 => "spatial-l2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Markdown,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "md" | "markdown" => Ok(Self::Markdown),
            other => Err(Error::Config(format!("unknown output format '{other}'"))),
        }
    }
}

/// How the spatial and temporal resolutions move together in a PDE sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    /// `N` fixed at the first entry of the `N` list; sweep `M`.
    FixedN,
    /// `N = M`; sweep `M`.
    Equal,
    /// `M = N^2`; sweep `N`.
    Square,
}

impl FromStr for Coupling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(' ', "").as_str() {
            "fixed" | "fixed-n" | "none" => Ok(Self::FixedN),
            "equal" | "n=m" | "m=n" => Ok(Self::Equal),
            "square" | "m=n^2" | "m=n2" => Ok(Self::Square),
            other => Err(Error::Config(format!("unknown coupling '{other}'"))),
        }
    }
}

/// Which parabolic problem a PDE sweep solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdeProblemKind {
    /// Benchmark without known solution (two-mesh errors).
    Reference,
    /// `u = t^α sin x1 sin x2` with the continuous source term.
    Manufactured,
    /// Same `u`, source built from the discrete Laplacian eigenvalue.
    ManufacturedDiscrete,
}

impl FromStr for PdeProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "reference" => Ok(Self::Reference),
            "manufactured" => Ok(Self::Manufactured),
            "manufactured-discrete" => Ok(Self::ManufacturedDiscrete),
            other => Err(Error::Config(format!("unknown pde problem '{other}'"))),
        }
    }
}

/// Grading exponent given as an expression in `a` (the fractional order),
/// e.g. `(2-a)/0.9` or `2/a`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradingExpr {
    source: String,
}

impl GradingExpr {
    pub fn new(source: impl Into<String>) -> Result<Self> {
        let expr = Self {
            source: source.into().trim().to_string(),
        };
        expr.eval(0.5)?;
        Ok(expr)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, alpha: f64) -> Result<f64> {
        let mut vars = BTreeMap::new();
        vars.insert("a".to_string(), alpha);
        vars.insert("alpha".to_string(), alpha);
        let r = fasteval::ez_eval(&self.source, &mut vars)
            .map_err(|e| Error::Config(format!("bad grading expression '{}': {e}", self.source)))?;
        if !(r >= 1.0) || !r.is_finite() {
            return Err(Error::Config(format!(
                "grading '{}' gives r = {r} at alpha = {alpha}; need r >= 1",
                self.source
            )));
        }
        Ok(r)
    }
}

impl fmt::Display for GradingExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

/// A sweep over `(α, r, M[, N, γ])`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub scheme: SchemeKind,
    pub alphas: Vec<f64>,
    pub gradings: Vec<GradingExpr>,
    pub meshes: Vec<usize>,
    pub spatial: Vec<usize>,
    pub gammas: Vec<f64>,
    pub norm: ErrorNorm,
    pub final_time: f64,
    pub barrier_offset: usize,
    pub coupling: Coupling,
    pub problem: PdeProblemKind,
    pub solver: LinearSolverKind,
    /// Iteration cap per time level; `None` keeps the solver default.
    pub max_iterations: Option<usize>,
    pub two_mesh: bool,
    pub envelope_overlay: bool,
    pub output: Option<PathBuf>,
    pub plot_output: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Ivp,
            scheme: SchemeKind::L1,
            alphas: vec![0.3, 0.5, 0.7],
            gradings: vec![GradingExpr {
                source: "1".into(),
            }],
            meshes: vec![128, 512, 2048],
            spatial: vec![16],
            gammas: vec![],
            norm: ErrorNorm::FinalTime,
            final_time: 1.0,
            barrier_offset: crate::bounds::DEFAULT_BARRIER_OFFSET,
            coupling: Coupling::Equal,
            problem: PdeProblemKind::Reference,
            solver: LinearSolverKind::Auto,
            max_iterations: None,
            two_mesh: true,
            envelope_overlay: false,
            output: None,
            plot_output: None,
            format: OutputFormat::Csv,
        }
    }
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_float(key: &str, s: &str) -> Result<f64> {
    let mut vars = BTreeMap::<String, f64>::new();
    fasteval::ez_eval(s, &mut vars).map_err(|e| Error::Config(format!("{key}: cannot parse '{s}': {e}")))
}

fn parse_count(key: &str, s: &str) -> Result<usize> {
    let v = parse_float(key, s)?;
    if v >= 1.0 && v.fract() == 0.0 && v < 1e12 {
        Ok(v as usize)
    } else {
        Err(Error::Config(format!("{key}: '{s}' is not a positive integer")))
    }
}

fn parse_bool(key: &str, s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        other => Err(Error::Config(format!("{key}: expected a boolean, got '{other}'"))),
    }
}

impl ExperimentConfig {
    /// Reads `key = value` lines (`#` starts a comment).
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            config
                .set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies one setting; command-line overrides use the same keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.to_ascii_lowercase().as_str() {
            "kind" | "experiment" => self.kind = value.parse()?,
            "scheme" => self.scheme = value.parse()?,
            "alpha" => {
                self.alphas = split_list(value)
                    .map(|s| parse_float(key, s))
                    .collect::<Result<_>>()?
            }
            "r" => self.gradings = split_list(value).map(GradingExpr::new).collect::<Result<_>>()?,
            "m" => self.meshes = split_list(value).map(|s| parse_count(key, s)).collect::<Result<_>>()?,
            "n" => self.spatial = split_list(value).map(|s| parse_count(key, s)).collect::<Result<_>>()?,
            "gamma" => {
                self.gammas = split_list(value)
                    .map(|s| parse_float(key, s))
                    .collect::<Result<_>>()?
            }
            "norm" => self.norm = value.parse()?,
            "t" | "final_time" => self.final_time = parse_float(key, value)?,
            "p" | "barrier_offset" => self.barrier_offset = parse_count(key, value)?,
            "coupling" => self.coupling = value.parse()?,
            "problem" => self.problem = value.parse()?,
            "solver" => self.solver = value.parse()?,
            "max_iter" => self.max_iterations = Some(parse_count(key, value)?),
            "two_mesh" => self.two_mesh = parse_bool(key, value)?,
            "envelope" => self.envelope_overlay = parse_bool(key, value)?,
            "out" | "output" => self.output = Some(PathBuf::from(value)),
            "plot_out" => self.plot_output = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Gammas to sweep for stability runs; defaults to `{α, 0, α-1, -0.5}`.
    pub fn gammas_for(&self, alpha: f64) -> Vec<f64> {
        if self.gammas.is_empty() {
            vec![alpha, 0.0, alpha - 1.0, -0.5]
        } else {
            self.gammas.clone()
        }
    }

    /// Whether this experiment reports convergence rates.
    pub fn wants_rates(&self) -> bool {
        matches!(self.kind, ExperimentKind::Ivp | ExperimentKind::Pde)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.gradings.is_empty() || self.meshes.is_empty() {
            return Err(Error::Config("alpha, r and M lists must be non-empty".into()));
        }
        for &a in &self.alphas {
            crate::caputo::check_alpha(a).map_err(|e| Error::Config(e.to_string()))?;
            for g in &self.gradings {
                g.eval(a)?;
            }
        }
        if !(self.final_time > 0.0) {
            return Err(Error::Config("final time must be positive".into()));
        }
        if self.kind == ExperimentKind::Pde && self.spatial.is_empty() {
            return Err(Error::Config("pde experiments need a non-empty N list".into()));
        }
        if self.norm == ErrorNorm::SpatialL2 && self.kind != ExperimentKind::Pde {
            return Err(Error::Config("the spatial-l2 norm applies to pde experiments only".into()));
        }
        if self.kind == ExperimentKind::Pde && !self.two_mesh && self.problem == PdeProblemKind::Reference {
            return Err(Error::Config("the reference problem has no exact solution; enable two_mesh".into()));
        }
        if self.wants_rates() {
            let sweep = match (self.kind, self.coupling) {
                (ExperimentKind::Pde, Coupling::Square) => &self.spatial,
                _ => &self.meshes,
            };
            if sweep.iter().any(|m| !m.is_power_of_two()) {
                return Err(Error::Config("mesh sizes must be powers of two when rates are reported".into()));
            }
            if sweep.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config("mesh sizes must be strictly increasing".into()));
            }
        }
        Ok(())
    }
}
