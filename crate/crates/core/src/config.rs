//! Run configuration: one strict TOML file is the single source of truth for
//! a training run. Unknown keys are rejected everywhere (typo safety), and
//! the canonical serialization is stored in checkpoints so resumes can
//! detect configuration drift.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossWeights;
use crate::model::ModelConfig;
use crate::vision::{NoiseSchedule, UNetConfig};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_clip_norm")]
    pub clip_norm: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Cosine learning-rate decay over `decay_steps`; off by default.
    #[serde(default)]
    pub cosine_decay: bool,
    #[serde(default)]
    pub decay_steps: u64,
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: u64,
}

fn default_lr() -> f64 {
    3e-4
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_clip_norm() -> f64 {
    1.0
}
fn default_batch_size() -> usize {
    4
}
fn default_checkpoint_every() -> u64 {
    500
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lr: default_lr(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
            clip_norm: default_clip_norm(),
            batch_size: default_batch_size(),
            cosine_decay: false,
            decay_steps: 0,
            checkpoint_every: default_checkpoint_every(),
        }
    }
}

impl OptimizerConfig {
    pub fn effective_lr(&self, step: u64) -> f64 {
        if self.cosine_decay && self.decay_steps > 0 {
            let t = (step.min(self.decay_steps)) as f64 / self.decay_steps as f64;
            self.lr * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
        } else {
            self.lr
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lr < 0.0 || self.batch_size == 0 {
            return Err(Error::Config(
                "optimizer requires lr >= 0 and batch_size >= 1".into(),
            ));
        }
        if self.clip_norm <= 0.0 {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Dataset root in the on-disk layout; the CLI flag overrides this.
    #[serde(default)]
    pub path: Option<String>,
    /// Synthetic fallback when no path is given: sample count and seed.
    #[serde(default)]
    pub synthetic_n: Option<usize>,
    #[serde(default)]
    pub synthetic_seed: Option<u64>,
}

/// Everything a run needs, fully serializable.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub unet: UNetConfig,
    #[serde(default)]
    pub loss: LossWeights,
    #[serde(default)]
    pub noise: NoiseSchedule,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub data: DataConfig,
}

fn default_seed() -> u64 {
    42
}

fn default_out_dir() -> String {
    "runs/default".into()
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: default_seed(),
            out_dir: default_out_dir(),
            model: ModelConfig::default(),
            unet: UNetConfig::default(),
            loss: LossWeights::default(),
            noise: NoiseSchedule::default(),
            optimizer: OptimizerConfig::default(),
            data: DataConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)
            .map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical text form; identical configs serialize identically.
    pub fn to_canonical_toml(&self) -> String {
        toml::to_string(self).expect("RunConfig serializes")
    }

    pub fn validate(&self) -> Result<()> {
        // vocab_size is filled at build time, so skip the full model check here
        if self.model.d_model == 0
            || self.model.n_heads == 0
            || !self.model.d_model.is_multiple_of(self.model.n_heads)
        {
            return Err(Error::Config(format!(
                "d_model ({}) must be a positive multiple of n_heads ({})",
                self.model.d_model, self.model.n_heads
            )));
        }
        self.unet.validate()?;
        self.loss.validate()?;
        self.noise.validate()?;
        self.optimizer.validate()?;
        Ok(())
    }
}
