//! Run configuration, read from a single TOML file.
//!
//! ```toml
//! seed = 7
//! out = "results"          # optional; --out and ENTRODECAY_OUT take precedence
//!
//! [model]
//! family = "hardcore-graph"
//! vertices = 2
//! edges = [[0, 1]]
//! rho = 1.0
//!
//! [report]
//! probes = 20000
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use entrodecay::models::{ConvexPotential, LatticeGasParams};
use entrodecay::statespace::DEFAULT_STATE_CAP;
use entrodecay::{ContinuumSpec, Model, PairPotential};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FAMILIES: [&str; 6] = [
    "hardcore-graph",
    "hard-rods",
    "loss-network",
    "lattice-gas",
    "two-site-convex",
    "continuum",
];

#[derive(Debug, Error)]
#[error("{key}: {message}")]
pub struct ConfigError {
    /// Dotted path of the offending key.
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl fmt::Display) -> Self {
        Self {
            key: key.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Verify,
    Report,
    Decay,
    Simulate,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Verify => "verify",
            Task::Report => "report",
            Task::Decay => "decay",
            Task::Simulate => "simulate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairTerm {
    pub offset: Vec<i32>,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    HardcoreGraph {
        vertices: usize,
        #[serde(default)]
        edges: Vec<[usize; 2]>,
        /// Common intensity; ignored when `intensities` is given.
        #[serde(default)]
        rho: Option<f64>,
        #[serde(default)]
        intensities: Option<Vec<f64>>,
    },
    HardRods {
        side: usize,
        rod_length: usize,
        rho: f64,
    },
    LossNetwork {
        capacities: Vec<u32>,
        routes: Vec<Vec<usize>>,
        intensities: Vec<f64>,
    },
    LatticeGas {
        dimension: usize,
        side: usize,
        #[serde(default)]
        potential: Vec<PairTerm>,
        beta: f64,
        z: f64,
        n_max: u32,
    },
    TwoSiteConvex {
        beta: f64,
        #[serde(default = "one")]
        z: f64,
        n_max: u32,
        #[serde(default = "one")]
        coefficient: f64,
        #[serde(default = "two")]
        exponent: f64,
    },
    Continuum {
        dimension: usize,
        sides: Vec<f64>,
        z: f64,
        beta: f64,
        potential: PairPotential,
        #[serde(default)]
        boundary: Vec<Vec<f64>>,
        #[serde(default)]
        periodic: bool,
    },
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

/// A model ready for the library.
pub enum Built {
    Finite(Model),
    Continuum(ContinuumSpec),
}

impl ModelConfig {
    pub fn family(&self) -> &'static str {
        match self {
            ModelConfig::HardcoreGraph { .. } => "hardcore-graph",
            ModelConfig::HardRods { .. } => "hard-rods",
            ModelConfig::LossNetwork { .. } => "loss-network",
            ModelConfig::LatticeGas { .. } => "lattice-gas",
            ModelConfig::TwoSiteConvex { .. } => "two-site-convex",
            ModelConfig::Continuum { .. } => "continuum",
        }
    }

    pub fn build(&self) -> Result<Built, ConfigError> {
        let invalid = |e: entrodecay::Error| ConfigError::new("model", e);
        let model = match self {
            ModelConfig::HardcoreGraph {
                vertices,
                edges,
                rho,
                intensities,
            } => {
                let edges: Vec<(usize, usize)> = edges.iter().map(|e| (e[0], e[1])).collect();
                match (intensities, rho) {
                    (Some(nu), _) => Model::hardcore_graph_with_intensities(*vertices, &edges, nu.clone()),
                    (None, Some(rho)) => Model::hardcore_graph(*vertices, &edges, *rho),
                    (None, None) => return Err(ConfigError::new("model.rho", "rho or intensities is required")),
                }
            }
            ModelConfig::HardRods { side, rod_length, rho } => Model::hard_rods(*side, *rod_length, *rho),
            ModelConfig::LossNetwork {
                capacities,
                routes,
                intensities,
            } => Model::loss_network(capacities.clone(), routes.clone(), intensities.clone()),
            ModelConfig::LatticeGas {
                dimension,
                side,
                potential,
                beta,
                z,
                n_max,
            } => Model::lattice_gas(LatticeGasParams {
                dimension: *dimension,
                side: *side,
                potential: potential.iter().map(|t| (t.offset.clone(), t.h)).collect(),
                beta: *beta,
                z: *z,
                n_max: *n_max,
            }),
            ModelConfig::TwoSiteConvex {
                beta,
                z,
                n_max,
                coefficient,
                exponent,
            } => Model::two_site_convex(
                ConvexPotential {
                    coefficient: *coefficient,
                    exponent: *exponent,
                },
                *beta,
                *z,
                *n_max,
            ),
            ModelConfig::Continuum {
                dimension,
                sides,
                z,
                beta,
                potential,
                boundary,
                periodic,
            } => {
                let spec = ContinuumSpec {
                    dimension: *dimension,
                    sides: sides.clone(),
                    z: *z,
                    beta: *beta,
                    potential: *potential,
                    boundary: boundary.clone(),
                    periodic: *periodic,
                };
                spec.validate().map_err(invalid)?;
                return Ok(Built::Continuum(spec));
            }
        };
        model.map(Built::Finite).map_err(invalid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Random `(f, g)` pairs for the identities.
    pub samples: usize,
    /// Log-uniform `(a, b)` pairs for the bivariate inequality.
    pub key_samples: usize,
    /// Amplitude of `log f` for random test functions.
    pub amplitude: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            samples: 100,
            key_samples: 100_000,
            amplitude: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    pub probes: usize,
    pub restarts: usize,
    pub iterations: usize,
    pub log_cap: f64,
    /// Horizon and size of the grid for the example decay curve.
    pub t_max: f64,
    pub points: usize,
    pub amplitude: f64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            probes: 100_000,
            restarts: 32,
            iterations: 200,
            log_cap: entrodecay::functionals::DEFAULT_LOG_CAP,
            t_max: 10.0,
            points: 50,
            amplitude: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayConfig {
    pub t_max: f64,
    pub points: usize,
    pub functions: usize,
    pub amplitude: f64,
    /// Finite-difference step for the derivative and convexity checks.
    pub step: f64,
    /// Envelope rate; defaults to the theoretical bound of the model.
    pub kappa: Option<f64>,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            t_max: 10.0,
            points: 50,
            functions: 20,
            amplitude: 2.0,
            step: 1e-3,
            kappa: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub trajectories: usize,
    pub t_end: f64,
    /// Initial state index (finite models).
    pub start: usize,
    /// How many individual paths to write out.
    pub paths: usize,
    /// Last histogram bin for continuum particle counts.
    pub n_max: usize,
    /// Compare continuum counts with the quadrature law.
    pub oracle: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            trajectories: 1_000,
            t_end: 10.0,
            start: 0,
            paths: 1,
            n_max: 10,
            oracle: false,
        }
    }
}

/// The fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub task: Option<Task>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_cap")]
    pub state_cap: usize,
    pub model: ModelConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub report: ReportConfig,
    #[serde(default)]
    pub decay: DecayConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
}

fn default_cap() -> usize {
    DEFAULT_STATE_CAP
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new("--config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses and validates everything that does not depend on the task.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let value: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::new("config", e.message()))?;
        let model = value
            .get("model")
            .and_then(|m| m.as_table())
            .ok_or_else(|| ConfigError::new("model", "missing [model] table"))?;
        match model.get("family").map(|f| f.as_str()) {
            None => return Err(ConfigError::new("model.family", "missing")),
            Some(None) => return Err(ConfigError::new("model.family", "must be a string")),
            Some(Some(f)) if !FAMILIES.contains(&f) => {
                return Err(ConfigError::new(
                    "model.family",
                    format!("unknown family `{f}`, expected one of {}", FAMILIES.join(", ")),
                ))
            }
            Some(Some(_)) => {}
        }
        // deserialize section by section so errors name the section
        for (key, v) in &value {
            let check = match key.as_str() {
                "model" => ModelConfig::deserialize(v.clone()).map(drop),
                "verify" => VerifyConfig::deserialize(v.clone()).map(drop),
                "report" => ReportConfig::deserialize(v.clone()).map(drop),
                "decay" => DecayConfig::deserialize(v.clone()).map(drop),
                "simulate" => SimulateConfig::deserialize(v.clone()).map(drop),
                _ => Ok(()),
            };
            check.map_err(|e| ConfigError::new(key.clone(), e.message()))?;
        }
        let config = Self::deserialize(toml::Value::Table(value)).map_err(|e| ConfigError::new("config", e.message()))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::new(key, format!("must be positive and finite, got {v}")))
            }
        }
        fn nonzero(key: &str, v: usize) -> Result<(), ConfigError> {
            if v > 0 {
                Ok(())
            } else {
                Err(ConfigError::new(key, "must be at least 1"))
            }
        }
        nonzero("state_cap", self.state_cap)?;
        nonzero("verify.samples", self.verify.samples)?;
        positive("verify.amplitude", self.verify.amplitude)?;
        nonzero("report.restarts", self.report.restarts)?;
        positive("report.log_cap", self.report.log_cap)?;
        positive("report.t_max", self.report.t_max)?;
        positive("report.amplitude", self.report.amplitude)?;
        if self.report.points < 2 {
            return Err(ConfigError::new("report.points", "need at least 2 grid points"));
        }
        positive("decay.t_max", self.decay.t_max)?;
        positive("decay.step", self.decay.step)?;
        positive("decay.amplitude", self.decay.amplitude)?;
        nonzero("decay.functions", self.decay.functions)?;
        if self.decay.points < 2 {
            return Err(ConfigError::new("decay.points", "need at least 2 grid points"));
        }
        if let Some(k) = self.decay.kappa {
            if !k.is_finite() {
                return Err(ConfigError::new("decay.kappa", "must be finite"));
            }
        }
        nonzero("simulate.trajectories", self.simulate.trajectories)?;
        positive("simulate.t_end", self.simulate.t_end)?;
        if self.simulate.paths > self.simulate.trajectories {
            return Err(ConfigError::new("simulate.paths", "cannot exceed simulate.trajectories"));
        }
        Ok(())
    }

    /// Applies the command line and checks task-specific requirements.
    pub fn resolve(mut self, task: Task, seed: Option<u64>) -> Result<Self, ConfigError> {
        if let Some(t) = self.task {
            if t != task {
                return Err(ConfigError::new(
                    "task",
                    format!("config is for `{}` but `{}` was requested", t.as_str(), task.as_str()),
                ));
            }
        }
        self.task = Some(task);
        if seed.is_some() {
            self.seed = seed;
        }
        // every task draws random test functions or paths
        if self.seed.is_none() {
            return Err(ConfigError::new("seed", "required (set it in the config or pass --seed)"));
        }
        if matches!(self.model, ModelConfig::Continuum { .. }) && matches!(task, Task::Verify | Task::Decay) {
            return Err(ConfigError::new(
                "model.family",
                format!("`{}` needs a finite model; continuum supports report and simulate", task.as_str()),
            ));
        }
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("seed checked in resolve")
    }
}
