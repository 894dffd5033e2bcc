//! Forward pass pieces: hierarchical encoder, two-layer graph attention,
//! entity head and the copy decoder step.

use crate::corpus::BOS;
use crate::error::{Error, Result};
use crate::kgraph::{augment, AugmentedGraph, MetaKnowledgeGraph};
use crate::numcore::{lstm_step, Tape, Tensor, Var};

use super::{GatLayer, ModelConfig, Params, PreparedContext};

#[derive(Clone, Debug)]
pub struct EncodedContext {
    pub utterances: Vec<Var>,
    pub dialogue: Var,
}

/// Utterance-level LSTM over tokens, then a dialogue-level LSTM over the
/// utterance vectors.
pub fn encode_context(tape: &mut Tape<'_>, p: &Params, context: &[Vec<usize>]) -> Result<EncodedContext> {
    if context.is_empty() {
        return Err(Error::Model("need at least one utterance".into()));
    }
    let hid = p.enc_utt.hidden_dim;
    let table = tape.param(p.embed);
    let mut utterances = Vec::with_capacity(context.len());
    for (i, ids) in context.iter().enumerate() {
        if ids.is_empty() {
            return Err(Error::Model(format!("utterance {i} is empty")));
        }
        let xs = tape.embedding_lookup(table, ids)?;
        let mut h = tape.input(Tensor::zeros(&[hid]));
        let mut c = tape.input(Tensor::zeros(&[hid]));
        for x in xs {
            (h, c) = lstm_step(tape, &p.enc_utt, x, h, c)?;
        }
        utterances.push(h);
    }
    let mut h = tape.input(Tensor::zeros(&[hid]));
    let mut c = tape.input(Tensor::zeros(&[hid]));
    for &u in &utterances {
        (h, c) = lstm_step(tape, &p.enc_dial, u, h, c)?;
    }
    Ok(EncodedContext {
        utterances,
        dialogue: h,
    })
}

#[derive(Clone, Debug)]
pub struct ReasonedGraph {
    /// Final entity representations, `[nodes, F]`, base nodes first.
    pub entities: Var,
    /// Attention matrix of each layer, rows summing to one.
    pub attention: Vec<Var>,
    pub node_count: usize,
}

/// One attention layer: queries are the first `rows` rows of `keys`.
fn gat_layer(tape: &mut Tape<'_>, l: &GatLayer, keys: Var, rows: usize, mask: &[bool]) -> Result<(Var, Var)> {
    let f = tape.value(keys).cols();
    let a = tape.param(l.a);
    let w1 = tape.param(l.w1);
    let w = tape.matmul(a, w1)?;
    let wl = tape.slice(w, 0, f)?;
    let wr = tape.slice(w, f, f)?;
    let sl = tape.matmul(keys, wl)?;
    let sl = if rows == tape.value(keys).rows() {
        sl
    } else {
        tape.slice(sl, 0, rows)?
    };
    let sr = tape.matmul(keys, wr)?;
    let e = tape.outer_add(sl, sr)?;
    let e = tape.sigmoid(e)?;
    let alpha = tape.softmax(e, Some(mask))?;
    let w0 = tape.param(l.w0);
    let w0t = tape.transpose(w0)?;
    let z = tape.matmul(keys, w0t)?;
    let agg = tape.matmul(alpha, z)?;
    Ok((tape.tanh(agg)?, alpha))
}

/// Layer 1 lets each entity attend to itself and the utterances mentioning
/// it; layer 2 to itself and its neighbors in the meta graph. Attached
/// nodes start from zero features.
pub fn graph_reason(
    tape: &mut Tape<'_>,
    p: &Params,
    config: &ModelConfig,
    aug: &AugmentedGraph<'_, Var>,
) -> Result<ReasonedGraph> {
    let n_base = aug.base.len();
    let n = aug.entity_count();
    let mut feats = tape.param(p.features);
    if tape.value(feats).rows() != n_base {
        return Err(Error::Model(format!(
            "{} feature rows for {n_base} graph nodes",
            tape.value(feats).rows()
        )));
    }
    let f = tape.value(feats).cols();
    if n > n_base {
        let zeros = tape.input(Tensor::zeros(&[n - n_base, f]));
        feats = tape.concat_rows(feats, zeros)?;
    }
    if !config.graph_reasoning {
        return Ok(ReasonedGraph {
            entities: feats,
            attention: Vec::new(),
            node_count: n,
        });
    }

    let t = aug.utterance_vectors.len();
    let keys = if t > 0 {
        let utt = tape.stack_rows(&aug.utterance_vectors)?;
        tape.concat_rows(feats, utt)?
    } else {
        feats
    };
    let cols = n + t;
    let mut mask1 = vec![false; n * cols];
    for i in 0..n {
        mask1[i * cols + i] = true;
    }
    for &(u, e) in &aug.cross_edges {
        mask1[e * cols + n + u] = true;
    }
    let (h1, a1) = gat_layer(tape, &p.layers[0], keys, n, &mask1)?;

    let mut mask2 = vec![false; n * n];
    for i in 0..n {
        mask2[i * n + i] = true;
    }
    for (a, b) in aug.base.graph.edges() {
        mask2[a * n + b] = true;
        mask2[b * n + a] = true;
    }
    let (h2, a2) = gat_layer(tape, &p.layers[1], h1, n, &mask2)?;
    Ok(ReasonedGraph {
        entities: h2,
        attention: vec![a1, a2],
        node_count: n,
    })
}

/// Entity logits `wᵀh + b`, one per node.
pub fn entity_logits(tape: &mut Tape<'_>, p: &Params, reasoned: &ReasonedGraph) -> Result<Var> {
    let w = tape.param(p.ent_w);
    let b = tape.param(p.ent_b);
    let z = tape.matmul(reasoned.entities, w)?;
    tape.add_bias(z, b)
}

/// Everything the decoder needs from one reasoned graph.
#[derive(Clone, Debug)]
pub struct CopySource {
    entities: Var,
    keys: Var,
    /// Nodes that map to a vocabulary token.
    mask: Vec<bool>,
    targets: Vec<Option<usize>>,
}

impl CopySource {
    pub fn new(
        tape: &mut Tape<'_>,
        p: &Params,
        reasoned: &ReasonedGraph,
        node_tokens: Vec<Option<usize>>,
    ) -> Result<Self> {
        if node_tokens.len() != reasoned.node_count {
            return Err(Error::Model("node token map does not match the graph".into()));
        }
        let wk = tape.param(p.att_k);
        let wkt = tape.transpose(wk)?;
        let keys = tape.matmul(reasoned.entities, wkt)?;
        Ok(Self {
            entities: reasoned.entities,
            keys,
            mask: node_tokens.iter().map(Option::is_some).collect(),
            targets: node_tokens,
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DecodeState {
    pub h: Var,
    pub c: Var,
    pub prev: usize,
}

impl DecodeState {
    /// Hidden state from the dialogue vector, zero cell, BOS input.
    pub fn start(tape: &mut Tape<'_>, encoded: &EncodedContext) -> Self {
        let hid = tape.value(encoded.dialogue).len();
        Self {
            h: encoded.dialogue,
            c: tape.input(Tensor::zeros(&[hid])),
            prev: BOS,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StepOutput {
    pub p_out: Var,
    pub p_vocab: Var,
    pub p_entity: Option<Var>,
    pub gate: Option<Var>,
    pub alpha: Var,
    pub state: DecodeState,
}

/// One decoder step from `state`; the returned state still has the old
/// `prev` token and must be advanced by the caller.
pub fn decode_step(
    tape: &mut Tape<'_>,
    p: &Params,
    config: &ModelConfig,
    state: &DecodeState,
    copy: &CopySource,
) -> Result<StepOutput> {
    let table = tape.param(p.embed);
    let x = tape.embedding_lookup(table, &[state.prev])?[0];
    let (h, c) = lstm_step(tape, &p.dec, x, state.h, state.c)?;

    let wq = tape.param(p.att_q);
    let q = tape.matmul(wq, h)?;
    let pre = tape.add_bias(copy.keys, q)?;
    let act = tape.tanh(pre)?;
    let v = tape.param(p.att_v);
    let scores = tape.matmul(act, v)?;
    let alpha = tape.softmax(scores, Some(&copy.mask))?;
    let h_a = tape.matmul(alpha, copy.entities)?;

    let sh = tape.concat(&[h, h_a])?;
    let w_out = tape.param(p.out_w);
    let b_out = tape.param(p.out_b);
    let logits = tape.matmul(w_out, sh)?;
    let logits = tape.add_bias(logits, b_out)?;
    let p_vocab = tape.softmax(logits, None)?;

    let (p_out, p_entity, gate) = if config.copy_mechanism {
        let xin = tape.concat(&[x, h, h_a])?;
        let w2 = tape.param(p.gate_w);
        let z = tape.matmul(w2, xin)?;
        let g = tape.sigmoid(z)?;
        let size = tape.value(p_vocab).len();
        let pe = tape.scatter_add(alpha, &copy.targets, size)?;
        (tape.mix(g, p_vocab, pe)?, Some(pe), Some(g))
    } else {
        (p_vocab, None, None)
    };
    Ok(StepOutput {
        p_out,
        p_vocab,
        p_entity,
        gate,
        alpha,
        state: DecodeState { h, c, prev: state.prev },
    })
}

/// Encoder, augmentation, reasoning and copy source for one context.
pub struct ContextPass {
    pub encoded: EncodedContext,
    pub reasoned: ReasonedGraph,
    pub logits: Var,
    pub copy: CopySource,
    /// Node names in reasoning order (base nodes, then attached ones).
    pub node_names: Vec<String>,
}

pub fn context_pass(
    tape: &mut Tape<'_>,
    p: &Params,
    config: &ModelConfig,
    vocab: &crate::corpus::Vocabulary,
    graph: &MetaKnowledgeGraph,
    ctx: &PreparedContext,
) -> Result<ContextPass> {
    let encoded = encode_context(tape, p, &ctx.utterances)?;
    let aug = augment(graph, &ctx.mentions, encoded.utterances.clone(), |n| ctx.kind_of(n))?;
    let node_names: Vec<String> = (0..aug.entity_count()).map(|i| aug.entity(i).name.clone()).collect();
    let reasoned = graph_reason(tape, p, config, &aug)?;
    let logits = entity_logits(tape, p, &reasoned)?;
    let node_tokens = node_names
        .iter()
        .map(|n| vocab.get(n).filter(|&t| t != crate::corpus::UNK))
        .collect();
    let copy = CopySource::new(tape, p, &reasoned, node_tokens)?;
    Ok(ContextPass {
        encoded,
        reasoned,
        logits,
        copy,
        node_names,
    })
}
