//! Graph-evolving meta-learning for low-resource, knowledge-grounded
//! dialogue generation.
//!
//! The crate is organised bottom-up:
//!
//! - [`numcore`]: dense tensors, a fixed-operator reverse-mode tape, LSTM
//!   cells, optimizers, finite-difference checking and checkpoints.
//! - [`corpus`]: dialogue corpora, vocabulary, entity annotation, training
//!   instances and a synthetic corpus generator.
//! - [`kgraph`]: the prior commonsense graph, the online co-occurrence graph,
//!   the evolving meta-knowledge graph and graph export.
//! - [`model`]: hierarchical encoder, two-layer graph attention reasoning,
//!   entity prediction and the graph-guided copy decoder.
//! - [`meta`]: task construction, Reptile meta-training with interleaved graph
//!   evolution, multi-task pretraining and target adaptation.
//! - [`eval`]: BLEU / Entity-F1, per-disease evaluation, regime pipelines and
//!   the ablation grid.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod kgraph;
pub mod meta;
pub mod model;
pub mod numcore;
pub mod rng;

pub use error::{Error, Result};
