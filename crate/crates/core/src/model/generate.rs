use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{BOS, EOS, PAD};
use crate::error::Result;
use crate::kgraph::MetaKnowledgeGraph;
use crate::numcore::{ParamStore, Tape};

use super::{context_pass, decode_step, DecodeMode, DecodeState, Model, Params, PreparedContext};

#[derive(Clone, Debug, PartialEq)]
pub struct Generation {
    pub token_ids: Vec<usize>,
    pub tokens: Vec<String>,
    /// Names of nodes whose probability reaches the threshold.
    pub entities: BTreeSet<String>,
    /// Every node's probability in reasoning order.
    pub probabilities: Vec<(String, f64)>,
    /// No EOS within `max_decode_len`.
    pub truncated: bool,
}

/// One line of a generation output file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub context_id: String,
    pub response_tokens: Vec<String>,
    pub entities: Vec<String>,
    pub truncated: bool,
}

impl GenerationRecord {
    pub fn new(context_id: impl Into<String>, g: &Generation) -> Self {
        Self {
            context_id: context_id.into(),
            response_tokens: g.tokens.clone(),
            entities: g.entities.iter().cloned().collect(),
            truncated: g.truncated,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn emittable(token: usize) -> bool {
    token != PAD && token != BOS
}

/// Entity probabilities for a context, in reasoning order.
pub fn predict_entities(
    store: &ParamStore,
    model: &Model,
    graph: &MetaKnowledgeGraph,
    ctx: &PreparedContext,
) -> Result<Vec<(String, f64)>> {
    let p = Params::resolve(store)?;
    let mut tape = Tape::new(store);
    let pass = context_pass(&mut tape, &p, &model.config, &model.vocab, graph, ctx)?;
    let logits = tape.value(pass.logits).data().to_vec();
    Ok(pass
        .node_names
        .into_iter()
        .zip(logits.into_iter().map(sigmoid))
        .collect())
}

/// Decodes a response with the configured mode and thresholds the entity
/// head. Ties between equal probabilities go to the lowest token index.
pub fn generate(
    store: &ParamStore,
    model: &Model,
    graph: &MetaKnowledgeGraph,
    ctx: &PreparedContext,
) -> Result<Generation> {
    generate_with(store, model, graph, ctx, model.config.decode_mode)
}

pub fn generate_with(
    store: &ParamStore,
    model: &Model,
    graph: &MetaKnowledgeGraph,
    ctx: &PreparedContext,
    mode: DecodeMode,
) -> Result<Generation> {
    let cfg = &model.config;
    let p = Params::resolve(store)?;
    let mut tape = Tape::new(store);
    let pass = context_pass(&mut tape, &p, cfg, &model.vocab, graph, ctx)?;
    let probabilities: Vec<(String, f64)> = pass
        .node_names
        .iter()
        .cloned()
        .zip(tape.value(pass.logits).data().iter().map(|&z| sigmoid(z)))
        .collect();
    let entities = probabilities
        .iter()
        .filter(|(_, pr)| *pr >= cfg.entity_threshold)
        .map(|(n, _)| n.clone())
        .collect();

    let start = DecodeState::start(&mut tape, &pass.encoded);
    let (token_ids, truncated) = match mode {
        DecodeMode::Greedy => {
            let mut state = start;
            let mut out = Vec::new();
            let mut truncated = true;
            for _ in 0..cfg.max_decode_len {
                let step = decode_step(&mut tape, &p, cfg, &state, &pass.copy)?;
                let probs = tape.value(step.p_out).data();
                let mut best = None;
                for (t, &pr) in probs.iter().enumerate() {
                    if emittable(t) && best.is_none_or(|(_, b)| pr > b) {
                        best = Some((t, pr));
                    }
                }
                let (tok, _) = best.expect("vocabulary has emittable tokens");
                if tok == EOS {
                    truncated = false;
                    break;
                }
                out.push(tok);
                state = DecodeState {
                    prev: tok,
                    ..step.state
                };
            }
            (out, truncated)
        }
        DecodeMode::Beam { width } => {
            struct Hyp {
                tokens: Vec<usize>,
                logp: f64,
                state: DecodeState,
            }
            let norm = |h: &Hyp, eos: bool| h.logp / (h.tokens.len() + usize::from(eos)) as f64;
            let mut live = vec![Hyp {
                tokens: Vec::new(),
                logp: 0.0,
                state: start,
            }];
            let mut finished: Vec<(Vec<usize>, f64)> = Vec::new();
            for _ in 0..cfg.max_decode_len {
                let mut cands: Vec<(usize, usize, f64)> = Vec::new();
                let mut states = Vec::with_capacity(live.len());
                for (hi, h) in live.iter().enumerate() {
                    let step = decode_step(&mut tape, &p, cfg, &h.state, &pass.copy)?;
                    for (t, &pr) in tape.value(step.p_out).data().iter().enumerate() {
                        if emittable(t) {
                            cands.push((hi, t, h.logp + pr.ln()));
                        }
                    }
                    states.push(step.state);
                }
                cands.sort_by(|a, b| match b.2.total_cmp(&a.2) {
                    Ordering::Equal => (a.0, a.1).cmp(&(b.0, b.1)),
                    o => o,
                });
                let mut next = Vec::new();
                for (hi, t, logp) in cands.into_iter().take(width) {
                    let parent = &live[hi];
                    if t == EOS {
                        let h = Hyp {
                            tokens: parent.tokens.clone(),
                            logp,
                            state: states[hi],
                        };
                        finished.push((h.tokens.clone(), norm(&h, true)));
                    } else {
                        let mut tokens = parent.tokens.clone();
                        tokens.push(t);
                        next.push(Hyp {
                            tokens,
                            logp,
                            state: DecodeState { prev: t, ..states[hi] },
                        });
                    }
                }
                live = next;
                if finished.len() >= width || live.is_empty() {
                    break;
                }
            }
            let best_finished = finished
                .into_iter()
                .enumerate()
                .max_by(|(i, a), (j, b)| a.1.total_cmp(&b.1).then(j.cmp(i)))
                .map(|(_, f)| f.0);
            match best_finished {
                Some(tokens) => (tokens, false),
                None => {
                    let best = live
                        .iter()
                        .enumerate()
                        .max_by(|(i, a), (j, b)| norm(a, false).total_cmp(&norm(b, false)).then(j.cmp(i)))
                        .map(|(_, h)| h.tokens.clone())
                        .unwrap_or_default();
                    (best, true)
                }
            }
        }
    };
    Ok(Generation {
        tokens: model.vocab.decode(&token_ids),
        token_ids,
        entities,
        probabilities,
        truncated,
    })
}
