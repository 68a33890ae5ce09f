//! TOML configuration schema. Command-line flags override file values; the
//! fully resolved configuration is echoed into the run manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};

use kflow::interpolant::{BumpFunction, FlowDirection};
use kflow::sampling::Integrator;
use kflow::training::{ModelHyper, PartitionSpec, TrainConfig, TransformSpec};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub transform: Option<TransformSpec>,
    pub partition: Option<PartitionSpec>,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub model: ModelHyper,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub sample: SampleSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    pub bump: BumpFunction,
    pub direction: FlowDirection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: usize,
    pub steps: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: Option<u64>,
    pub label_conditioning: bool,
    pub label_drop_prob: f64,
    pub checkpoint_every: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            batch_size: 128,
            steps: 5000,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: None,
            label_conditioning: false,
            label_drop_prob: 0.1,
            checkpoint_every: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSection {
    pub steps: usize,
    pub integrator: Integrator,
    pub guidance_scale: f64,
    pub rho: f64,
}

impl Default for SampleSection {
    fn default() -> Self {
        SampleSection {
            steps: 250,
            integrator: Integrator::Heun,
            guidance_scale: 1.0,
            rho: 1.0,
        }
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }

    /// Builds the training configuration; `seed` must already be resolved.
    pub fn train_config(&self, seed: u64) -> anyhow::Result<TrainConfig> {
        let transform = self
            .transform
            .clone()
            .ok_or_else(|| anyhow::anyhow!("config is missing the [transform] section"))?;
        let partition = self
            .partition
            .clone()
            .ok_or_else(|| anyhow::anyhow!("config is missing the [partition] section"))?;
        Ok(TrainConfig {
            transform,
            partition,
            bump: self.flow.bump,
            direction: self.flow.direction,
            model: self.model.clone(),
            batch_size: self.train.batch_size,
            steps: self.train.steps,
            lr: self.train.lr,
            beta1: self.train.beta1,
            beta2: self.train.beta2,
            eps: self.train.eps,
            seed,
            label_conditioning: self.train.label_conditioning,
            label_drop_prob: self.train.label_drop_prob,
            checkpoint_every: self.train.checkpoint_every,
        })
    }

}

/// Seed priority: command-line flag, then configuration file, then the
/// KFLOW_SEED environment variable, then 0.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> u64 {
    flag.or(config)
        .or_else(|| {
            std::env::var("KFLOW_SEED")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_toml_parses_with_defaults() {
        let text = r#"
            [transform]
            kind = "pca"

            [partition]
            bands = 2
            strategy = "uniform-level"
        "#;
        let cfg: FileConfig = toml::from_str(text).unwrap();
        let train = cfg.train_config(7).unwrap();
        assert_eq!(train.batch_size, 128);
        assert_eq!(train.seed, 7);
        assert_eq!(cfg.sample.steps, 250);
    }

    #[test]
    fn wavelet_section_round_trips() {
        let text = r#"
            [transform]
            kind = "wavelet"
            family = "db6"
            levels = 2

            [partition]
            bands = 3
            strategy = "energy-proportional"

            [flow]
            bump = "quintic-smoothstep"
            direction = "high-to-low"

            [train]
            steps = 10
            seed = 5
        "#;
        let cfg: FileConfig = toml::from_str(text).unwrap();
        assert!(matches!(
            cfg.transform,
            Some(TransformSpec::Wavelet { levels: Some(2), .. })
        ));
        assert_eq!(cfg.flow.direction, FlowDirection::HighToLow);
        assert_eq!(cfg.train.seed, Some(5));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"
            [transform]
            kind = "pca"

            [partition]
            bands = 1
            strategy = "uniform-level"

            [train]
            learning_rate_typo = 0.1
        "#;
        assert!(toml::from_str::<FileConfig>(text).is_err());
    }
}
