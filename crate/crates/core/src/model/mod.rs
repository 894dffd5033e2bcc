//! The dialogue network: hierarchical encoder, graph reasoning over the
//! meta-knowledge graph, entity prediction and the copy decoder.

mod config;
mod generate;
mod loss;
mod manifest;
mod net;
mod params;
mod prepare;

pub use config::{DecodeMode, ModelConfig};
pub use generate::{generate, generate_with, predict_entities, Generation, GenerationRecord};
pub use loss::{batch_loss_and_grad, evaluate_loss, instance_loss, loss_and_grad, mean_loss, LossValue, LossVars};
pub use manifest::{load_model, save_model, ModelManifest};
pub use net::{
    context_pass, decode_step, encode_context, entity_logits, graph_reason, ContextPass, CopySource, DecodeState,
    EncodedContext, ReasonedGraph, StepOutput,
};
pub use params::{check_graph_tokens, init_params, GatLayer, Params};
pub use prepare::{prepare_corpus, PreparedContext, PreparedInstance};

use crate::corpus::Vocabulary;

/// The fixed, non-trainable half of a model: sizes and vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
}

impl Model {
    pub fn new(config: ModelConfig, vocab: Vocabulary) -> crate::Result<Self> {
        config.validate()?;
        Ok(Self { config, vocab })
    }
}
