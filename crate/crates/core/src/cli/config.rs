use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::convex::CostSpec;
use crate::families::FamilyKind;
use crate::linalg;
use crate::synthesis::{GridSpec, Mode, Objective, Property, Route};
use crate::system::{LinearSystem, NoiseFamily, NoiseModel};
use crate::tolerances::Tolerances;
use crate::Matrix;

/// A complete run description, read from one JSON or TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub cost: CostConfig,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
    #[serde(default)]
    pub simulation: Option<SimulationConfig>,
    #[serde(default)]
    pub verification: VerificationConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub family: NoiseFamily,
    pub covariance: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostMode {
    StateCostFirst,
    ControlCostFirst,
    Family,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub mode: CostMode,
    #[serde(default)]
    pub family: Option<FamilyConfig>,
    #[serde(default)]
    pub custom: Option<CostSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub name: FamilyKind,
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default)]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SynthesisConfig {
    #[serde(default)]
    pub objective: Objective,
    /// Validate this matrix instead of searching.
    #[serde(default, rename = "M")]
    pub m: Option<Vec<Vec<f64>>>,
    /// A certificate written by an earlier `synthesize` run.
    #[serde(default)]
    pub certificate: Option<PathBuf>,
    #[serde(default)]
    pub route: Route,
    #[serde(default)]
    pub m_lo: Option<f64>,
    #[serde(default)]
    pub m_hi: Option<f64>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub x0: Vec<f64>,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub baseline: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationConfig {
    #[serde(default = "all_properties")]
    pub properties: Vec<Property>,
}

impl Default for VerificationConfig {
    fn default() -> Self {
        Self { properties: all_properties() }
    }
}

fn all_properties() -> Vec<Property> {
    Property::ALL.to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub directory: Option<PathBuf>,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: None, formats: all_formats() }
    }
}

fn all_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl RunConfig {
    /// Parses JSON or TOML, chosen by file extension.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        let cfg = match ext.as_str() {
            "json" => Self::from_json(&text),
            "toml" => Self::from_toml(&text),
            other => return Err(CliError::Config(format!("{}: unsupported config extension {other:?}", path.display()))),
        }
        .map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let dim = |e: String| CliError::Config(format!("dimension mismatch: {e}"));
        let a = linalg::from_rows(&self.system.a).ok_or_else(|| dim("system.A has ragged or empty rows".into()))?;
        let b = linalg::from_rows(&self.system.b).ok_or_else(|| dim("system.B has ragged or empty rows".into()))?;
        if !a.is_square() {
            return Err(dim(format!("system.A is {}×{}, expected square", a.nrows(), a.ncols())));
        }
        if b.nrows() != a.nrows() {
            return Err(dim(format!("system.B has {} rows, A has {}", b.nrows(), a.nrows())));
        }
        if let Some(noise) = &self.system.noise {
            let c = linalg::from_rows(&noise.covariance).ok_or_else(|| dim("noise.covariance has ragged rows".into()))?;
            if c.nrows() != a.nrows() || c.ncols() != a.nrows() {
                return Err(dim(format!("noise.covariance is {}×{}, expected {n}×{n}", c.nrows(), c.ncols(), n = a.nrows())));
            }
        }
        if let Some(m) = &self.synthesis.m {
            let m = linalg::from_rows(m).ok_or_else(|| dim("synthesis.M has ragged rows".into()))?;
            if m.nrows() != a.nrows() || m.ncols() != a.nrows() {
                return Err(dim(format!("synthesis.M is {}×{}, expected {n}×{n}", m.nrows(), m.ncols(), n = a.nrows())));
            }
        }
        if let Some(sim) = &self.simulation {
            if sim.x0.len() != a.nrows() {
                return Err(dim(format!("simulation.x0 has length {}, expected {}", sim.x0.len(), a.nrows())));
            }
            if sim.horizon == 0 {
                return Err(CliError::Config("simulation.horizon must be at least 1".into()));
            }
            if sim.seeds.is_empty() {
                return Err(CliError::Config("simulation.seeds must not be empty".into()));
            }
        }
        match self.cost.mode {
            CostMode::Family => {
                if self.cost.family.is_none() {
                    return Err(CliError::Config("cost.mode = family needs cost.family".into()));
                }
                if a.nrows() != 1 || b.ncols() != 1 {
                    return Err(CliError::Config("closed-form families are scalar: A and B must be 1×1".into()));
                }
            }
            _ => {
                if self.cost.custom.is_none() {
                    return Err(CliError::Config("cost.custom is required unless cost.mode = family".into()));
                }
            }
        }
        Ok(())
    }

    pub fn system(&self) -> Result<LinearSystem, CliError> {
        let a = linalg::from_rows(&self.system.a).ok_or_else(|| CliError::Config("system.A".into()))?;
        let b = linalg::from_rows(&self.system.b).ok_or_else(|| CliError::Config("system.B".into()))?;
        let noise = match &self.system.noise {
            Some(n) => {
                let c = linalg::from_rows(&n.covariance).ok_or_else(|| CliError::Config("noise.covariance".into()))?;
                NoiseModel::new(n.family, c).map_err(|e| CliError::Config(e.to_string()))?
            }
            None => NoiseModel::zero(a.nrows()),
        };
        LinearSystem::new(a, b, noise).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn explicit_m(&self) -> Option<Matrix> {
        self.synthesis.m.as_ref().and_then(|m| linalg::from_rows(m))
    }

    /// Design mode and the cost the designer fixes.
    pub fn design(&self) -> (Mode, CostSpec) {
        match self.cost.mode {
            CostMode::StateCostFirst => (Mode::StateCostFirst, self.cost.custom.clone().expect("validated")),
            CostMode::ControlCostFirst => (Mode::ControlCostFirst, self.cost.custom.clone().expect("validated")),
            CostMode::Family => {
                let fam = self.cost.family.as_ref().expect("validated");
                let spec = match fam.name {
                    FamilyKind::BangBang => CostSpec::BangBang { t: fam.t.unwrap_or(f64::NAN) },
                    FamilyKind::Exponential => CostSpec::Exponential {},
                    FamilyKind::ElasticNet => CostSpec::ElasticNet { eps: fam.eps.unwrap_or(f64::NAN), l1: 1.0 },
                };
                (fam.name.mode(), spec)
            }
        }
    }
}
