use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::kgraph::{grow_features, MetaKnowledgeGraph, FEATURE_PARAM};
use crate::numcore::{LstmParams, ParamId, ParamStore, Tensor};
use crate::rng;

use super::ModelConfig;

/// One graph attention layer: `e = sigmoid(aᵀ W1 [h_i ‖ h_j])`, update
/// `tanh(Σ α W0 h_j)`.
#[derive(Clone, Copy, Debug)]
pub struct GatLayer {
    pub w0: ParamId,
    pub w1: ParamId,
    pub a: ParamId,
}

/// Handles to every trainable tensor of the network.
#[derive(Clone, Copy, Debug)]
pub struct Params {
    pub embed: ParamId,
    pub enc_utt: LstmParams,
    pub enc_dial: LstmParams,
    pub features: ParamId,
    pub layers: [GatLayer; 2],
    pub ent_w: ParamId,
    pub ent_b: ParamId,
    pub dec: LstmParams,
    pub att_q: ParamId,
    pub att_k: ParamId,
    pub att_v: ParamId,
    pub out_w: ParamId,
    pub out_b: ParamId,
    pub gate_w: ParamId,
}

impl Params {
    pub fn resolve(store: &ParamStore) -> Result<Self> {
        let id = |n: &str| store.id(n);
        let layer = |l: usize| -> Result<GatLayer> {
            Ok(GatLayer {
                w0: id(&format!("reason.l{l}.w0"))?,
                w1: id(&format!("reason.l{l}.w1"))?,
                a: id(&format!("reason.l{l}.a"))?,
            })
        };
        Ok(Self {
            embed: id("embed.tokens")?,
            enc_utt: LstmParams::lookup(store, "enc.utt")?,
            enc_dial: LstmParams::lookup(store, "enc.dial")?,
            features: id(FEATURE_PARAM)?,
            layers: [layer(1)?, layer(2)?],
            ent_w: id("entity.w")?,
            ent_b: id("entity.b")?,
            dec: LstmParams::lookup(store, "dec.lstm")?,
            att_q: id("dec.attn.wq")?,
            att_k: id("dec.attn.wk")?,
            att_v: id("dec.attn.v")?,
            out_w: id("dec.out.w")?,
            out_b: id("dec.out.b")?,
            gate_w: id("dec.gate.w")?,
        })
    }
}

/// Fresh parameters for `config` over `vocab` and `graph`, drawn from the
/// `init` stream of `seed`.
pub fn init_params(
    config: &ModelConfig,
    vocab: &Vocabulary,
    graph: &MetaKnowledgeGraph,
    seed: u64,
) -> Result<ParamStore> {
    config.validate()?;
    check_graph_tokens(vocab, graph)?;
    let (e, h, a, f) = (
        config.embed_dim,
        config.hidden_dim,
        config.attention_dim,
        config.embed_dim,
    );
    let v = vocab.len();
    let b = config.init_bound;
    let r = &mut rng::stream(seed, "init");
    let mut s = ParamStore::new();
    s.insert("embed.tokens", Tensor::uniform(&[v, e], b, r))?;
    LstmParams::register(&mut s, "enc.utt", e, h, b, r)?;
    LstmParams::register(&mut s, "enc.dial", h, h, b, r)?;
    for l in 1..=2 {
        s.insert(format!("reason.l{l}.w0"), Tensor::uniform(&[f, f], b, r))?;
        s.insert(format!("reason.l{l}.w1"), Tensor::uniform(&[a, 2 * f], b, r))?;
        s.insert(format!("reason.l{l}.a"), Tensor::uniform(&[a], b, r))?;
    }
    s.insert("entity.w", Tensor::uniform(&[f], b, r))?;
    s.insert("entity.b", Tensor::zeros(&[1]))?;
    LstmParams::register(&mut s, "dec.lstm", e, h, b, r)?;
    s.insert("dec.attn.wq", Tensor::uniform(&[a, h], b, r))?;
    s.insert("dec.attn.wk", Tensor::uniform(&[a, f], b, r))?;
    s.insert("dec.attn.v", Tensor::uniform(&[a], b, r))?;
    s.insert("dec.out.w", Tensor::uniform(&[v, h + f], b, r))?;
    s.insert("dec.out.b", Tensor::zeros(&[v]))?;
    s.insert("dec.gate.w", Tensor::uniform(&[1, e + h + f], b, r))?;
    grow_features(&mut s, graph, f, b, &mut rng::stream(seed, "features"))?;
    Ok(s)
}

/// Every graph node must be a single vocabulary token.
pub fn check_graph_tokens(vocab: &Vocabulary, graph: &MetaKnowledgeGraph) -> Result<()> {
    if graph.is_empty() {
        return Err(Error::Model("meta-knowledge graph has no nodes".into()));
    }
    match graph.graph.nodes().iter().find(|n| !vocab.contains(&n.name)) {
        Some(n) => Err(Error::Model(format!("entity `{}` has no vocabulary token", n.name))),
        None => Ok(()),
    }
}
