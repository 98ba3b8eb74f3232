//! JSON config schemas for the solver subcommands. Study subcommands parse
//! the experiment config types from the library directly.

use serde::{Deserialize, Serialize};
use svi_lab::coeffs::{DiffusionSpec, DriftSpec};
use svi_lab::monotone::OperatorSpec;
use svi_lab::paths::GridPath;
use svi_lab::svi::SviProblem;
use svi_lab::{Error, Result};

/// Forcing term of a deterministic problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingConfig {
    Constant { value: Vec<f64> },
    Csv { path: String },
}

impl ForcingConfig {
    pub fn build(&self, horizon: f64, step: f64) -> Result<GridPath> {
        match self {
            ForcingConfig::Constant { value } => {
                let nodes = (horizon / step).round() as usize + 1;
                GridPath::constant(step, value, nodes)
            }
            ForcingConfig::Csv { path } => {
                let file = std::fs::File::open(path)?;
                GridPath::read_csv(std::io::BufReader::new(file))
            }
        }
    }
}

/// Control path of a skeleton run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlConfig {
    Zero { dim: usize, horizon: f64, dt: f64 },
    /// h(t) = slope * t.
    Linear { slope: Vec<f64>, horizon: f64, dt: f64 },
    Csv { path: String },
}

impl ControlConfig {
    pub fn build(&self) -> Result<GridPath> {
        match self {
            ControlConfig::Zero { dim, horizon, dt } => {
                let nodes = (horizon / dt).round() as usize + 1;
                GridPath::constant(*dt, &vec![0.0; *dim], nodes)
            }
            ControlConfig::Linear { slope, horizon, dt } => {
                let nodes = (horizon / dt).round() as usize + 1;
                let mut values = Vec::with_capacity(nodes * slope.len());
                for k in 0..nodes {
                    let t = k as f64 * dt;
                    values.extend(slope.iter().map(|s| s * t));
                }
                GridPath::new(*dt, slope.len(), values)
            }
            ControlConfig::Csv { path } => {
                let file = std::fs::File::open(path)?;
                GridPath::read_csv(std::io::BufReader::new(file))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProxCheckConfig {
    pub operator: OperatorSpec,
    pub cases: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DviRunConfig {
    pub operator: OperatorSpec,
    pub forcing: ForcingConfig,
    pub start: Vec<f64>,
    pub horizon: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkeletonRunConfig {
    pub operator: OperatorSpec,
    pub drift: DriftSpec,
    pub diffusion: DiffusionSpec,
    pub start: Vec<f64>,
    pub control: ControlConfig,
    pub step: f64,
    /// Seed for the graph pairs used by the flow validation.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SviRunConfig {
    pub problem: SviProblem,
    pub n_fine: u32,
    /// Approximation level; defaults to the fine level.
    pub level: Option<u32>,
    /// Integration substep; defaults to the fine grid step.
    pub substep: Option<f64>,
    pub seed: u64,
    /// RNG stream selecting the sample path.
    #[serde(default)]
    pub stream: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleCompareConfig {
    pub start: f64,
    pub horizon: f64,
    pub n_fine: u32,
    pub trials: u64,
    pub seed: u64,
}

impl OracleCompareConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidInput("trial count must be positive".into()));
        }
        if self.start < 0.0 {
            return Err(Error::InvalidInput("reflected comparison needs start >= 0".into()));
        }
        Ok(())
    }
}
