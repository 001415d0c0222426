//! Run configuration: a TOML document with `topology`, `solver` and
//! `output` sections. Missing keys take defaults; unknown keys are errors.

use std::path::{Path, PathBuf};

use lifemax_core::admm::{AdmmConfig, InitPolicy, Objective};
use lifemax_core::report::Algorithm;
use lifemax_core::subgradient::{StepRule, SubgradConfig};
use lifemax_core::topology::{RadioParams, SinkPlacement, TopologyParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SEED_ENV: &str = "LIFEMAX_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologySection {
    pub sensors: usize,
    pub radius: f64,
    pub comm_range: f64,
    pub alpha: f64,
    pub beta: f64,
    pub energy: f64,
    pub gen_rate: f64,
    pub seed: u64,
    pub sink: SinkPlacement,
    pub max_attempts: u32,
}

impl Default for TopologySection {
    fn default() -> Self {
        let p = TopologyParams::default();
        Self {
            sensors: p.sensors,
            radius: p.radius,
            comm_range: p.comm_range,
            alpha: p.radio.alpha,
            beta: p.radio.beta,
            energy: p.energy,
            gen_rate: p.gen_rate,
            seed: p.seed,
            sink: p.sink,
            max_attempts: p.max_attempts,
        }
    }
}

impl TopologySection {
    pub fn params(&self) -> TopologyParams {
        TopologyParams {
            sensors: self.sensors,
            radius: self.radius,
            comm_range: self.comm_range,
            sink: self.sink,
            seed: self.seed,
            radio: RadioParams {
                alpha: self.alpha,
                beta: self.beta,
            },
            energy: self.energy,
            gen_rate: self.gen_rate,
            max_attempts: self.max_attempts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub algorithm: Algorithm,
    pub rho: f64,
    pub eps: f64,
    pub eps_dual: f64,
    pub max_iter: usize,
    pub objective: Objective,
    pub init: InitPolicy,
    pub step: StepRule,
    pub subgrad_max_iter: usize,
    /// Relative oracle gap used by `compare`.
    pub target: f64,
    /// Penalty grid and per-cell budget used by `sweep`.
    pub grid: Vec<f64>,
    pub budget: usize,
    pub jobs: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let admm = AdmmConfig::default();
        let sg = SubgradConfig::default();
        Self {
            algorithm: Algorithm::Admm,
            rho: admm.rho,
            eps: admm.eps_primal,
            eps_dual: admm.eps_dual,
            max_iter: admm.max_iter,
            objective: admm.objective,
            init: admm.init,
            step: sg.step,
            subgrad_max_iter: sg.max_iter,
            target: 0.05,
            grid: vec![0.1, 1.0, 7.0, 50.0, 500.0],
            budget: 200,
            jobs: 1,
        }
    }
}

impl SolverSection {
    pub fn admm(&self) -> AdmmConfig {
        AdmmConfig {
            rho: self.rho,
            eps_primal: self.eps,
            eps_dual: self.eps_dual,
            max_iter: self.max_iter,
            objective: self.objective,
            init: self.init,
            ..AdmmConfig::default()
        }
    }

    pub fn subgrad(&self) -> SubgradConfig {
        SubgradConfig {
            step: self.step,
            max_iter: self.subgrad_max_iter,
            eps: self.eps,
            gap_tol: self.target,
            ..SubgradConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Topology file written by `gen`.
    pub topology: Option<PathBuf>,
    /// JSON summary written by `solve`, `sweep` and `compare`.
    pub report: Option<PathBuf>,
    /// Per-iteration trace CSV written by `solve`.
    pub trace: Option<PathBuf>,
    /// CSV written by `sweep` and `compare`.
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfigFile {
    pub topology: TopologySection,
    pub solver: SolverSection,
    pub output: OutputSection,
}

impl RunConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Applies `LIFEMAX_SEED` when set.
    pub fn apply_env(&mut self) -> Result<(), CliError> {
        if let Ok(raw) = std::env::var(SEED_ENV) {
            self.topology.seed = raw
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{SEED_ENV} must be an unsigned integer, got {raw:?}")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let t = &self.topology;
        let s = &self.solver;
        let bad = |msg: String| Err(CliError::Usage(msg));
        if t.sensors == 0 {
            return bad("topology.sensors must be at least 1".into());
        }
        for (name, v) in [("radius", t.radius), ("comm_range", t.comm_range), ("energy", t.energy)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("topology.{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("alpha", t.alpha), ("beta", t.beta), ("gen_rate", t.gen_rate)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("topology.{name} must be non-negative, got {v}"));
            }
        }
        if t.max_attempts == 0 {
            return bad("topology.max_attempts must be at least 1".into());
        }
        for (name, v) in [("rho", s.rho), ("eps", s.eps), ("eps_dual", s.eps_dual), ("target", s.target)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("solver.{name} must be positive, got {v}"));
            }
        }
        if s.max_iter == 0 || s.subgrad_max_iter == 0 || s.budget == 0 || s.jobs == 0 {
            return bad("solver iteration counts and jobs must be at least 1".into());
        }
        if s.grid.is_empty() || s.grid.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return bad("solver.grid must be a non-empty list of positive values".into());
        }
        s.step.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(())
    }
}
