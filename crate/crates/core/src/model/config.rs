use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum DecodeMode {
    #[default]
    Greedy,
    Beam { width: usize },
}

/// Network sizes and switches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Word embedding and node feature width.
    pub embed_dim: usize,
    /// Recurrent state width; must equal `embed_dim` because utterance
    /// vectors and entity features share the graph attention weights.
    pub hidden_dim: usize,
    pub attention_dim: usize,
    /// Weight of the entity loss.
    pub lambda: f64,
    pub entity_threshold: f64,
    pub max_decode_len: usize,
    pub decode_mode: DecodeMode,
    /// Uniform init bound for weights, embeddings and node features.
    pub init_bound: f64,
    pub graph_reasoning: bool,
    pub copy_mechanism: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 300,
            hidden_dim: 300,
            attention_dim: 300,
            lambda: 8.0,
            entity_threshold: 0.5,
            max_decode_len: 32,
            decode_mode: DecodeMode::Greedy,
            init_bound: 0.08,
            graph_reasoning: true,
            copy_mechanism: true,
        }
    }
}

impl ModelConfig {
    /// Default configuration with every width set to `dim`.
    pub fn with_dim(dim: usize) -> Self {
        Self {
            embed_dim: dim,
            hidden_dim: dim,
            attention_dim: dim,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.embed_dim == 0 || self.hidden_dim == 0 || self.attention_dim == 0 {
            return bad("model dimensions must be at least 1");
        }
        if self.embed_dim != self.hidden_dim {
            return bad("hidden_dim must equal embed_dim");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and non-negative");
        }
        if !(self.entity_threshold > 0.0 && self.entity_threshold < 1.0) {
            return bad("entity_threshold must lie in (0, 1)");
        }
        if self.max_decode_len == 0 {
            return bad("max_decode_len must be at least 1");
        }
        if let DecodeMode::Beam { width: 0 } = self.decode_mode {
            return bad("beam width must be at least 1");
        }
        if !(self.init_bound > 0.0 && self.init_bound.is_finite()) {
            return bad("init_bound must be positive");
        }
        Ok(())
    }
}
