use std::path::Path;

use oplearn::experiments::{
    BudgetSection, EncoderSection, ExperimentConfig, NoiseSection, OutputSection, SamplerSpec, SweepSection,
};
use oplearn::network::TrainConfig;
use oplearn::pde::OperatorSpec;
use serde::Deserialize;

use crate::Failure;

/// The whole TOML document. Every subcommand reads the sections it needs.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    pub operator: Option<OperatorSpec>,
    pub encoder: Option<EncoderSection>,
    pub sampler: Option<SamplerSpec>,
    pub noise: Option<NoiseSection>,
    pub budget: Option<BudgetSection>,
    pub train: Option<TrainConfig>,
    pub sweep: Option<SweepSection>,
    pub output: Option<OutputSection>,
}

fn missing(section: &str) -> Failure {
    Failure::Config(format!("config is missing the [{section}] section"))
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {}", path.display(), e.message())))
    }

    pub fn operator(&self) -> Result<&OperatorSpec, Failure> {
        self.operator.as_ref().ok_or_else(|| missing("operator"))
    }

    pub fn encoder(&self) -> Result<&EncoderSection, Failure> {
        self.encoder.as_ref().ok_or_else(|| missing("encoder"))
    }

    pub fn sampler(&self) -> Result<&SamplerSpec, Failure> {
        self.sampler.as_ref().ok_or_else(|| missing("sampler"))
    }

    pub fn budget(&self) -> Result<&BudgetSection, Failure> {
        self.budget.as_ref().ok_or_else(|| missing("budget"))
    }

    pub fn sweep(&self) -> Result<&SweepSection, Failure> {
        self.sweep.as_ref().ok_or_else(|| missing("sweep"))
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, Failure> {
        let cfg = ExperimentConfig {
            seed: self.seed,
            operator: self.operator()?.clone(),
            encoder: self.encoder()?.clone(),
            sampler: self.sampler()?.clone(),
            noise: self.noise.clone().unwrap_or_default(),
            budget: self.budget()?.clone(),
            train: self.train.clone().ok_or_else(|| missing("train"))?,
            sweep: self.sweep()?.clone(),
            output: self.output.clone().unwrap_or_default(),
        };
        cfg.validate().map_err(Failure::from)?;
        Ok(cfg)
    }
}
