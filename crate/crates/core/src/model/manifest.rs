use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::kgraph::MetaKnowledgeGraph;
use crate::numcore::{load_checkpoint, save_checkpoint, ParamStore};

use super::{Model, ModelConfig};

/// What a checkpoint was trained against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub vocab_hash: String,
    pub graph_hash: String,
    /// Free-form run information (regime, seed).
    #[serde(default)]
    pub info: serde_json::Value,
}

impl ModelManifest {
    pub fn new(model: &Model, graph: &MetaKnowledgeGraph, info: serde_json::Value) -> Self {
        Self {
            config: model.config.clone(),
            vocab: model.vocab.clone(),
            vocab_hash: model.vocab.hash(),
            graph_hash: graph.hash(),
            info,
        }
    }

    pub fn model(&self) -> Result<Model> {
        Model::new(self.config.clone(), self.vocab.clone())
    }

    /// Errors unless the stored hashes match the given vocabulary and, when
    /// given, the graph.
    pub fn check(&self, vocab: &Vocabulary, graph: Option<&MetaKnowledgeGraph>) -> Result<()> {
        if self.vocab.hash() != self.vocab_hash {
            return Err(Error::Checkpoint(
                "incompatible checkpoint: stored vocabulary is corrupt".into(),
            ));
        }
        if vocab.hash() != self.vocab_hash {
            return Err(Error::Checkpoint(
                "incompatible checkpoint: vocabulary hash differs".into(),
            ));
        }
        if let Some(g) = graph {
            if g.hash() != self.graph_hash {
                return Err(Error::Checkpoint("incompatible checkpoint: graph hash differs".into()));
            }
        }
        Ok(())
    }
}

pub fn save_model(store: &ParamStore, manifest: &ModelManifest, path: &Path) -> Result<()> {
    save_checkpoint(store, &serde_json::to_value(manifest)?, path)
}

pub fn load_model(path: &Path) -> Result<(ParamStore, ModelManifest)> {
    let (store, meta) = load_checkpoint(path)?;
    let manifest: ModelManifest = serde_json::from_value(meta)
        .map_err(|e| Error::Checkpoint(format!("incompatible checkpoint: bad model manifest: {e}")))?;
    Ok((store, manifest))
}
