//! Example generators: a linear Gaussian model, the spruce budworm ODE and a
//! reduced climate recursion.

pub mod budworm;
pub mod climate;
pub mod linear_gaussian;

use std::fmt;
use std::str::FromStr;

use crate::data::SensitivityDataset;
use crate::error::{Error, Result};

pub use budworm::{gen_budworm, gen_budworm_with, BudwormConfig, BudwormData, BudwormOutput, Integrator, Predation};
pub use climate::{gen_climate, gen_climate_with, ClimateConfig};
pub use linear_gaussian::{gen_linear_gaussian, gen_linear_gaussian_with};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelName {
    LinearGaussian,
    Budworm,
    Climate,
}

impl ModelName {
    pub fn name(self) -> &'static str {
        match self {
            ModelName::LinearGaussian => "linear-gaussian",
            ModelName::Budworm => "budworm",
            ModelName::Climate => "climate",
        }
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear-gaussian" | "gaussian" => Ok(ModelName::LinearGaussian),
            "budworm" => Ok(ModelName::Budworm),
            "climate" => Ok(ModelName::Climate),
            other => Err(Error::InvalidConfig(format!("unknown model `{other}`"))),
        }
    }
}

/// Which model to run and how.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: ModelName,
    pub n: usize,
    pub seed: u64,
    pub budworm: BudwormConfig,
    pub climate: ClimateConfig,
}

impl ModelSpec {
    pub fn new(name: ModelName, n: usize, seed: u64) -> Self {
        ModelSpec { name, n, seed, budworm: BudwormConfig::default(), climate: ClimateConfig::default() }
    }

    /// Generates the dataset. Budworm outputs are the B, S and E trajectories
    /// side by side.
    pub fn generate(&self) -> Result<SensitivityDataset> {
        match self.name {
            ModelName::LinearGaussian => gen_linear_gaussian(self.n, self.seed),
            ModelName::Budworm => gen_budworm_with(self.n, self.seed, &self.budworm)?.combined(),
            ModelName::Climate => gen_climate_with(self.n, self.seed, &self.climate),
        }
    }
}
