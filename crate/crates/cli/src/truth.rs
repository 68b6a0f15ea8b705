use serde::{Deserialize, Serialize};

use fsim_core::basis::BasisExpansion;
use fsim_core::ingest::{EcologyTruth, SynthEcologyConfig};
use fsim_core::simulate::{GroundTruth, Link, SimScenario};

/// Ground truth written next to generated data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthFile {
    pub source: String,
    pub link: Link,
    pub noise_sd: f64,
    pub seed: u64,
    pub beta_blocks: Vec<BasisExpansion>,
    pub alpha: Option<f64>,
    /// Noise-free index per data row.
    pub index: Vec<f64>,
}

impl TruthFile {
    pub fn from_simulation(truth: &GroundTruth, scenario: &SimScenario) -> Self {
        Self {
            source: "simulation".into(),
            link: truth.link,
            noise_sd: truth.noise_sd,
            seed: scenario.seed,
            beta_blocks: vec![truth.beta.clone()],
            alpha: None,
            index: truth.index.clone(),
        }
    }

    pub fn from_ecology(truth: &EcologyTruth, cfg: &SynthEcologyConfig) -> Self {
        Self {
            source: "ecology".into(),
            link: truth.link,
            noise_sd: truth.noise_sd,
            seed: cfg.seed,
            beta_blocks: truth.beta_blocks.clone(),
            alpha: Some(truth.alpha),
            index: truth.index.clone(),
        }
    }

    pub fn functional_coeffs(&self) -> Vec<f64> {
        self.beta_blocks.iter().flat_map(|b| b.coeffs().iter().copied()).collect()
    }

    /// Search vector for a true-value start.
    pub fn search_vector(&self) -> Vec<f64> {
        let mut v = self.functional_coeffs();
        v.extend(self.alpha);
        v
    }
}
