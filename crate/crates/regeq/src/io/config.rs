//! Experiment configuration files (`schema = "regeq-exp-v1"`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admm::StepSchedule;
use crate::features::KernelConfig;

#[derive(Debug, Error)]
pub enum IoConfigError {
    #[error("cannot read config: {0}")]
    Read(#[from] std::io::Error),
    #[error("config schema error: {0}")]
    Schema(String),
    #[error("config invalid: {0}")]
    Invalid(String),
}

pub const EXPERIMENT_SCHEMA: &str = "regeq-exp-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeName {
    Oracle,
    Baseline,
    EquilibriumCentral,
    EquilibriumAdmm,
}

impl std::fmt::Display for RegimeName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            RegimeName::Oracle => "oracle",
            RegimeName::Baseline => "baseline",
            RegimeName::EquilibriumCentral => "equilibrium-central",
            RegimeName::EquilibriumAdmm => "equilibrium-admm",
        };
        write!(f, "{name}")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Dataset CSV path; when omitted, records are generated synthetically.
    #[serde(default)]
    pub path: Option<PathBuf>,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    /// Synthetic pool size before splitting (default: train + test).
    #[serde(default)]
    pub n_pool: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    /// Loss weight γ; scalar applies to every farm.
    pub gamma: f64,
    /// ℓ1 radius τ; scalar applies to every farm.
    pub tau: f64,
    #[serde(default)]
    pub gamma_per_farm: Option<Vec<f64>>,
    #[serde(default)]
    pub tau_per_farm: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: u32,
}

fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> u32 {
    200
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScheduleSection {
    Published,
    Constant { rho: f64 },
    Geometric { rho0: f64, factor: f64, floor: f64 },
    Piecewise { points: Vec<(usize, f64)> },
}

impl ScheduleSection {
    pub fn build(&self, max_iter: usize) -> Result<StepSchedule, IoConfigError> {
        match self {
            ScheduleSection::Published => Ok(StepSchedule::published()),
            ScheduleSection::Constant { rho } => {
                StepSchedule::piecewise(&[(0, *rho)]).map_err(IoConfigError::Invalid)
            }
            ScheduleSection::Geometric { rho0, factor, floor } => {
                StepSchedule::geometric(*rho0, *factor, *floor, max_iter)
                    .map_err(IoConfigError::Invalid)
            }
            ScheduleSection::Piecewise { points } => {
                StepSchedule::piecewise(points).map_err(IoConfigError::Invalid)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmmSection {
    pub schedule: ScheduleSection,
    #[serde(default = "default_admm_tol")]
    pub tol: f64,
    #[serde(default = "default_admm_iters")]
    pub max_iter: usize,
    #[serde(default = "default_admm_window")]
    pub window: usize,
}

fn default_admm_tol() -> f64 {
    1e-3
}
fn default_admm_iters() -> usize {
    4000
}
fn default_admm_window() -> usize {
    5
}

impl Default for AdmmSection {
    fn default() -> Self {
        Self {
            schedule: ScheduleSection::Geometric {
                rho0: 0.02,
                factor: 0.999,
                floor: 1e-4,
            },
            tol: default_admm_tol(),
            max_iter: default_admm_iters(),
            window: default_admm_window(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// Clip profile forecasts to [0, capacity] during evaluation (off by
    /// default; coordinated forecasts may leave the data range).
    #[serde(default)]
    pub clip_forecasts: bool,
    /// Compute per-farm deviation incentives (one fixed-opponent re-solve
    /// per farm; costly on large cases).
    #[serde(default)]
    pub deviation_incentives: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            clip_forecasts: false,
            deviation_incentives: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    pub case: PathBuf,
    pub output_dir: PathBuf,
    pub regimes: Vec<RegimeName>,
    pub data: DataSection,
    /// Kernel banks; defaults to the thirty-feature configuration.
    #[serde(default)]
    pub kernels: Option<KernelConfig>,
    pub game: GameSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub admm: Option<AdmmSection>,
    #[serde(default)]
    pub eval: EvalSection,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, IoConfigError> {
        let base = path.as_ref().parent().map(Path::to_path_buf);
        let text = std::fs::read_to_string(path.as_ref())?;
        let mut cfg: Self =
            toml::from_str(&text).map_err(|e| IoConfigError::Schema(e.to_string()))?;
        if cfg.schema != EXPERIMENT_SCHEMA {
            return Err(IoConfigError::Schema(format!(
                "expected schema {EXPERIMENT_SCHEMA}, found {}",
                cfg.schema
            )));
        }
        // paths are relative to the config file
        if let Some(base) = base {
            if cfg.case.is_relative() {
                cfg.case = base.join(&cfg.case);
            }
            if cfg.output_dir.is_relative() {
                cfg.output_dir = base.join(&cfg.output_dir);
            }
            if let Some(p) = cfg.data.path.as_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), IoConfigError> {
        if self.regimes.is_empty() {
            return Err(IoConfigError::Invalid("at least one regime required".into()));
        }
        if !self.case.exists() {
            return Err(IoConfigError::Invalid(format!(
                "case file {} does not exist",
                self.case.display()
            )));
        }
        if let Some(p) = &self.data.path {
            if !p.exists() {
                return Err(IoConfigError::Invalid(format!(
                    "dataset {} does not exist",
                    p.display()
                )));
            }
        }
        let dim = self
            .kernels
            .as_ref()
            .map(|k| k.dim())
            .unwrap_or(30);
        if self.data.n_train < 10 * dim {
            return Err(IoConfigError::Invalid(format!(
                "n_train = {} is too small for {dim} features (need at least {})",
                self.data.n_train,
                10 * dim
            )));
        }
        if self.game.gamma <= 0.0 || self.game.tau <= 0.0 {
            return Err(IoConfigError::Invalid("gamma and tau must be > 0".into()));
        }
        if let Some(k) = &self.kernels {
            k.validate()
                .map_err(|e| IoConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    /// Canonical serialization used for the config hash in every output.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
