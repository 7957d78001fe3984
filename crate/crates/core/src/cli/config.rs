//! Run configuration: TOML file, defaults, command-line overrides and
//! aggregated validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bernstein::{BernsteinSpec, Family, Role};
use crate::discretize::MIN_NODES;
use crate::error::{LabError, Result};
use crate::kernels::BoundaryData;
use crate::semilinear::{Nonlinearity, Sign};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub domain: DomainConfig,
    pub operator: OperatorConfig,
    pub nonlinearity: NonlinearityConfig,
    pub boundary: BoundaryConfig,
    pub solver: SolverConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyName {
    Stable,
    Relativistic,
    Tempered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorConfig {
    pub beta: f64,
    /// Outer exponent: `ψ(λ) = λ^{α/2}` unless `family` says otherwise.
    pub alpha: f64,
    pub family: FamilyName,
    /// Exponent of a non-stable outer family; defaults to `α/2`.
    pub s: Option<f64>,
    pub mass: f64,
    pub tempering: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignName {
    Nonpositive,
    Nonnegative,
    Signed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub theta: f64,
    pub p: f64,
    pub m: f64,
    pub sign: SignName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryConfig {
    pub zeta_a: f64,
    pub zeta_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Fixed absorption damping in `(0, 1]`; automatic when absent.
    pub damping: Option<f64>,
    /// Bound `M` used to build the bracket of signed solves.
    pub bound: f64,
    /// Random starts used to probe uniqueness of signed solves.
    pub starts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub p_grid: Vec<f64>,
    pub levels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub seed: u64,
    /// Eigenfunctions written to `eigfun.csv`.
    pub eigenfunctions: usize,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig { a: -1.0, b: 1.0, n: 512 }
    }
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig { beta: 1.0, alpha: 1.0, family: FamilyName::Stable, s: None, mass: 1.0, tempering: 1.0 }
    }
}

impl Default for NonlinearityConfig {
    fn default() -> Self {
        NonlinearityConfig { theta: 0.0, p: 1.2, m: 0.1, sign: SignName::Nonpositive }
    }
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        BoundaryConfig { zeta_a: 1.0, zeta_b: 1.0 }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: 1e-10, max_iter: 500, damping: None, bound: 1.0, starts: 5 }
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { p_grid: vec![1.2, 1.4, 1.6, 1.8], levels: vec![256, 512, 1024] }
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out"), seed: 0, eigenfunctions: 4 }
    }
}

impl Default for Config {
    fn default() -> Self {
        Config {
            domain: DomainConfig::default(),
            operator: OperatorConfig::default(),
            nonlinearity: NonlinearityConfig::default(),
            boundary: BoundaryConfig::default(),
            solver: SolverConfig::default(),
            sweep: SweepConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub n: Option<usize>,
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub theta: Option<f64>,
    pub p: Option<f64>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| LabError::Config(format!("invalid config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.out {
            self.output.dir = v.clone();
        }
        if let Some(v) = o.n {
            self.domain.n = v;
        }
        if let Some(v) = o.beta {
            self.operator.beta = v;
        }
        if let Some(v) = o.alpha {
            self.operator.alpha = v;
        }
        if let Some(v) = o.theta {
            self.nonlinearity.theta = v;
        }
        if let Some(v) = o.p {
            self.nonlinearity.p = v;
            self.sweep.p_grid = vec![v];
        }
        if let Some(v) = o.tol {
            self.solver.tol = v;
        }
        if let Some(v) = o.seed {
            self.output.seed = v;
        }
    }

    /// Checks every precondition and reports all failures at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let d = &self.domain;
        if !(d.a < d.b) || !d.a.is_finite() || !d.b.is_finite() {
            errs.push(format!("domain needs a < b, got ({}, {})", d.a, d.b));
        }
        if d.n < MIN_NODES {
            errs.push(format!("domain.n must satisfy n >= {MIN_NODES}, got {}", d.n));
        }
        let op = &self.operator;
        if !(op.beta > 0.0 && op.beta < 2.0) {
            errs.push(format!("operator.beta must lie in (0,2), got {}", op.beta));
        }
        if let Err(e) = self.psi() {
            errs.push(e.to_string());
        }
        let nl = &self.nonlinearity;
        if !(nl.p > 0.0) || !(nl.m > 0.0) || !nl.theta.is_finite() {
            errs.push(format!("nonlinearity needs p > 0, m > 0 and finite theta, got p={}, m={}", nl.p, nl.m));
        }
        let bd = &self.boundary;
        if !bd.zeta_a.is_finite() || !bd.zeta_b.is_finite() {
            errs.push("boundary atoms must be finite".into());
        }
        let s = &self.solver;
        if !(s.tol > 0.0) {
            errs.push(format!("solver.tol must be positive, got {}", s.tol));
        }
        if s.max_iter == 0 {
            errs.push("solver.max_iter must be at least 1".into());
        }
        if let Some(w) = s.damping {
            if !(w > 0.0 && w <= 1.0) {
                errs.push(format!("solver.damping must lie in (0,1], got {w}"));
            }
        }
        if !(s.bound > 0.0) {
            errs.push(format!("solver.bound must be positive, got {}", s.bound));
        }
        let sw = &self.sweep;
        if sw.p_grid.is_empty() || sw.p_grid.iter().any(|p| !(*p > 0.0)) {
            errs.push("sweep.p_grid must be a nonempty list of positive exponents".into());
        }
        if sw.levels.len() < 2 || sw.levels.windows(2).any(|w| w[0] >= w[1]) || sw.levels.iter().any(|n| *n < MIN_NODES) {
            errs.push(format!("sweep.levels must be two or more increasing resolutions, each >= {MIN_NODES}"));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(LabError::Config(errs.join("; ")))
        }
    }

    pub fn psi(&self) -> Result<BernsteinSpec<f64>> {
        let op = &self.operator;
        if !(op.alpha > 0.0 && op.alpha < 2.0) {
            return Err(LabError::Domain(format!("operator.alpha must lie in (0,2), got {}", op.alpha)));
        }
        let s = op.s.unwrap_or(op.alpha / 2.0);
        let family = match op.family {
            FamilyName::Stable => Family::Stable { s: op.alpha / 2.0 },
            FamilyName::Relativistic => Family::Relativistic { s, mass: op.mass },
            FamilyName::Tempered => Family::Tempered { s, theta: op.tempering },
        };
        BernsteinSpec::new(family, Role::Psi)
    }

    pub fn zeta(&self) -> BoundaryData<f64> {
        BoundaryData::new(self.boundary.zeta_a, self.boundary.zeta_b)
    }

    pub fn sign(&self) -> Sign {
        match self.nonlinearity.sign {
            SignName::Nonpositive => Sign::NonPositive,
            SignName::Nonnegative => Sign::NonNegative,
            SignName::Signed => Sign::Signed,
        }
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity<f64>> {
        let nl = &self.nonlinearity;
        Nonlinearity::power(self.sign(), nl.theta, nl.p, nl.m)
    }
}
