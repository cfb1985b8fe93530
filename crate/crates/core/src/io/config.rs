use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cost::SearchSpace;
use crate::error::{Error, Result};
use crate::reduction::{ReducerKind, ReductionSchedule};
use crate::vit::ModelConfig;

use super::synth::SyntheticRecipe;

/// Settings of the HF/LF analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Fraction of image tokens in each of the HF and LF sets.
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Noise level of the AWGN probe; 0 disables it.
    #[serde(default)]
    pub awgn_sigma: f64,
}

fn default_tau() -> f64 {
    0.25
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { tau: default_tau(), awgn_sigma: 0.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    #[serde(default)]
    pub space: Option<SearchSpace>,
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default)]
    pub workers: Option<usize>,
}

/// Everything one experiment run needs. Unknown keys are rejected at every
/// level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub schedule: ReductionSchedule,
    #[serde(default)]
    pub reducer: ReducerKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub synthetic: SyntheticRecipe,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub search: SearchConfig,
    /// Report directory; the command line and environment take precedence.
    #[serde(default)]
    pub output_dir: Option<String>,
}

fn default_batch() -> usize {
    8
}

impl ExperimentConfig {
    pub fn new(model: ModelConfig) -> Self {
        Self {
            model,
            schedule: ReductionSchedule::default(),
            reducer: ReducerKind::default(),
            seed: 0,
            batch_size: default_batch(),
            synthetic: SyntheticRecipe::default(),
            analysis: AnalysisConfig::default(),
            search: SearchConfig::default(),
            output_dir: None,
        }
    }

    /// Cross-field checks beyond what parsing enforces.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.schedule
            .validate(self.model.depth, self.model.grid_side, self.model.heads)
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(0.0..=0.5).contains(&self.analysis.tau) {
            return Err(Error::Config(format!("analysis.tau {} outside [0, 0.5]", self.analysis.tau)));
        }
        if !(self.analysis.awgn_sigma >= 0.0) {
            return Err(Error::Config("analysis.awgn_sigma must be >= 0".into()));
        }
        self.synthetic.validate(self.model.image_side())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::from_json(r#"{"model":{"depth":2,"dim":8,"heads":2,"grid_side":4,"patch_size":2}}"#)
            .unwrap();
        assert_eq!(c.batch_size, 8);
        assert_eq!(c.reducer, ReducerKind::FrequencyAware);
        assert!(c.schedule.is_empty());
    }

    #[test]
    fn unknown_keys_rejected_at_every_level() {
        for bad in [
            r#"{"model":{"depth":2,"dim":8,"heads":2},"extra":1}"#,
            r#"{"model":{"depth":2,"dim":8,"heads":2,"dropout":0.1}}"#,
            r#"{"model":{"depth":2,"dim":8,"heads":2},"synthetic":{"noise":0.1}}"#,
            r#"{"model":{"depth":2,"dim":8,"heads":2},"schedule":{"steps":[{"layer":1,"rho":0.3,"window":1,"w":1}]}}"#,
        ] {
            assert!(matches!(ExperimentConfig::from_json(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn invalid_schedule_is_config_error() {
        let text = r#"{"model":{"depth":2,"dim":8,"heads":2},"schedule":{"steps":[{"layer":3,"rho":0.3,"window":1}]}}"#;
        assert!(matches!(ExperimentConfig::from_json(text), Err(Error::Config(_))));
    }

    #[test]
    fn round_trip() {
        let mut c = ExperimentConfig::new(ModelConfig::new(12, 64, 4).with_grid(14, 4, 3));
        c.schedule = ReductionSchedule::three_stage();
        c.output_dir = Some("out".into());
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
    }
}
