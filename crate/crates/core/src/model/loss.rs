use crate::error::{Error, Result};
use crate::kgraph::MetaKnowledgeGraph;
use crate::numcore::{Gradients, ParamStore, Tape, Var};

use super::{context_pass, decode_step, DecodeState, Model, Params, PreparedInstance};

/// Loss nodes of one instance on a tape.
#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    pub total: Var,
    pub generation: Var,
    pub entity: Var,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub generation: f64,
    pub entity: f64,
    /// Target tokens including EOS.
    pub tokens: usize,
}

/// Joint loss with teacher forcing: mean token NLL of the response (EOS
/// included) plus `lambda` times the mean entity BCE over all graph nodes.
pub fn instance_loss(
    tape: &mut Tape<'_>,
    p: &Params,
    model: &Model,
    graph: &MetaKnowledgeGraph,
    inst: &PreparedInstance,
) -> Result<LossVars> {
    if inst.target.is_empty() {
        return Err(Error::Model(format!("instance `{}` has no target tokens", inst.id)));
    }
    let pass = context_pass(tape, p, &model.config, &model.vocab, graph, &inst.context)?;
    let labels: Vec<f64> = pass
        .node_names
        .iter()
        .map(|n| if inst.gold.contains(n) { 1.0 } else { 0.0 })
        .collect();
    let entity = tape.bce_with_logits(pass.logits, &labels)?;

    let mut state = DecodeState::start(tape, &pass.encoded);
    let mut picked = Vec::with_capacity(inst.target.len());
    for &gold in &inst.target {
        let out = decode_step(tape, p, &model.config, &state, &pass.copy)?;
        picked.push(tape.pick(out.p_out, gold)?);
        state = DecodeState {
            prev: gold,
            ..out.state
        };
    }
    let probs = tape.concat(&picked)?;
    let logp = tape.log(probs)?;
    let mean = tape.mean(logp)?;
    let generation = tape.scale(mean, -1.0)?;
    let weighted = tape.scale(entity, model.config.lambda)?;
    let total = tape.add(generation, weighted)?;
    Ok(LossVars {
        total,
        generation,
        entity,
    })
}

fn values(tape: &Tape<'_>, v: &LossVars, tokens: usize) -> LossValue {
    LossValue {
        total: tape.scalar(v.total),
        generation: tape.scalar(v.generation),
        entity: tape.scalar(v.entity),
        tokens,
    }
}

/// Loss of one instance without gradients.
pub fn evaluate_loss(
    store: &ParamStore,
    model: &Model,
    graph: &MetaKnowledgeGraph,
    inst: &PreparedInstance,
) -> Result<LossValue> {
    let p = Params::resolve(store)?;
    let mut tape = Tape::new(store);
    let v = instance_loss(&mut tape, &p, model, graph, inst)?;
    Ok(values(&tape, &v, inst.target.len()))
}

pub fn loss_and_grad(
    store: &ParamStore,
    model: &Model,
    graph: &MetaKnowledgeGraph,
    inst: &PreparedInstance,
) -> Result<(LossValue, Gradients)> {
    let p = Params::resolve(store)?;
    let mut tape = Tape::new(store);
    let v = instance_loss(&mut tape, &p, model, graph, inst)?;
    let grads = tape.backward(v.total)?;
    Ok((values(&tape, &v, inst.target.len()), grads))
}

/// Mean joint loss over a batch and its gradient, accumulated in batch order.
pub fn batch_loss_and_grad(
    store: &ParamStore,
    model: &Model,
    graph: &MetaKnowledgeGraph,
    batch: &[&PreparedInstance],
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::Training("empty batch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    let mut grads = Gradients::empty(store.len());
    for inst in batch {
        let (l, g) = loss_and_grad(store, model, graph, inst)?;
        total += l.total;
        grads.add_scaled(&g, scale);
    }
    Ok((total * scale, grads))
}

/// Mean joint loss over a set of instances.
pub fn mean_loss(
    store: &ParamStore,
    model: &Model,
    graph: &MetaKnowledgeGraph,
    insts: &[&PreparedInstance],
) -> Result<f64> {
    if insts.is_empty() {
        return Err(Error::Training("no instances to score".into()));
    }
    let mut total = 0.0;
    for inst in insts {
        total += evaluate_loss(store, model, graph, inst)?.total;
    }
    Ok(total / insts.len() as f64)
}
