use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Meta-training, pretraining and adaptation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetaConfig {
    /// Inner-loop sgd rate.
    pub inner_rate: f64,
    /// Reptile interpolation step.
    pub outer_rate: f64,
    pub inner_steps: usize,
    pub task_batch_size: usize,
    /// Upper bound on outer iterations.
    pub outer_iterations: usize,
    /// Dialogues per task.
    pub task_size: usize,
    pub support_fraction: f64,
    pub evolve_enabled: bool,
    pub seed: u64,
    /// Adam rate for pretraining and adaptation.
    pub learning_rate: f64,
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub adapt_epochs: usize,
    /// Validation rounds without improvement before stopping.
    pub patience: usize,
    /// Outer iterations between two meta-validation rounds.
    pub validate_every: usize,
    /// Tasks held out from meta-training for validation.
    pub validation_tasks: usize,
    /// Dialogue share held out for validation in pretraining and adaptation.
    pub validation_fraction: f64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            inner_rate: 0.005,
            outer_rate: 0.5,
            inner_steps: 3,
            task_batch_size: 4,
            outer_iterations: 1000,
            task_size: 4,
            support_fraction: 0.5,
            evolve_enabled: true,
            seed: 0,
            learning_rate: 0.005,
            batch_size: 16,
            pretrain_epochs: 50,
            adapt_epochs: 50,
            patience: 10,
            validate_every: 50,
            validation_tasks: 8,
            validation_fraction: 0.2,
        }
    }
}

impl MetaConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.inner_rate > 0.0 && self.outer_rate > 0.0 && self.learning_rate > 0.0) {
            return bad("inner_rate, outer_rate and learning_rate must be positive");
        }
        if self.outer_rate > 1.0 {
            return bad("outer_rate must not exceed 1");
        }
        if self.inner_steps == 0 {
            return bad("inner_steps must be at least 1");
        }
        if !(self.support_fraction > 0.0 && self.support_fraction < 1.0) {
            return bad("support_fraction must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction must lie in [0, 1)");
        }
        if self.task_size < 2 {
            return bad("task_size must be at least 2");
        }
        if self.task_batch_size == 0 || self.batch_size == 0 || self.validate_every == 0 {
            return bad("batch sizes and validate_every must be positive");
        }
        Ok(())
    }
}
