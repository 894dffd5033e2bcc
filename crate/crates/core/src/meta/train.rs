use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;

use crate::corpus::{Corpus, Dialogue};
use crate::error::{Error, Result};
use crate::kgraph::{evolve, grow_features, CoOccurrenceGraph, CommonsenseGraph, MetaKnowledgeGraph, FEATURE_PARAM};
use crate::model::{batch_loss_and_grad, mean_loss, Model, PreparedInstance};
use crate::numcore::{Optimizer, ParamStore};
use crate::rng::{self, Rng};

use super::{inner_adapt, make_tasks, reptile_outer, InstanceBank, LogEvent, MetaConfig, Task, TrainLog};

/// The commonsense prior, the online co-occurrence graph and their union.
#[derive(Clone, Debug)]
pub struct GraphState {
    commonsense: CommonsenseGraph,
    coocc: CoOccurrenceGraph,
    pub meta: MetaKnowledgeGraph,
    evolving: bool,
}

impl GraphState {
    pub fn new(commonsense: &CommonsenseGraph, evolving: bool) -> Result<Self> {
        let coocc = CoOccurrenceGraph::new();
        let meta = evolve(commonsense, &coocc, None)?;
        Ok(Self {
            commonsense: commonsense.clone(),
            coocc,
            meta,
            evolving,
        })
    }

    /// Continues from an already evolved graph.
    pub fn resume(commonsense: &CommonsenseGraph, meta: MetaKnowledgeGraph, evolving: bool) -> Self {
        Self {
            commonsense: commonsense.clone(),
            coocc: CoOccurrenceGraph::new(),
            meta,
            evolving,
        }
    }

    pub fn evolving(&self) -> bool {
        self.evolving
    }

    /// Observes dialogues and re-evolves the meta graph. A no-op returning
    /// false when evolution is off or nothing new was seen.
    pub fn observe<'a>(&mut self, dialogues: impl IntoIterator<Item = &'a Dialogue>, corpus: &Corpus) -> Result<bool> {
        if !self.evolving {
            return Ok(false);
        }
        let mut fresh = false;
        for d in dialogues {
            fresh |= self.coocc.observe_dialogue(d, &corpus.catalog)?;
        }
        if fresh {
            self.meta = evolve(&self.commonsense, &self.coocc, Some(&self.meta))?;
        }
        Ok(fresh)
    }
}

/// Parameters, final graph and log of one training phase.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ParamStore,
    pub graph: MetaKnowledgeGraph,
    pub log: TrainLog,
}

struct EarlyStopping {
    patience: usize,
    best: f64,
    best_round: usize,
    since: usize,
    best_params: Option<ParamStore>,
}

impl EarlyStopping {
    fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_round: 0,
            since: 0,
            best_params: None,
        }
    }

    /// Records a validation round; true when training should stop.
    fn record(&mut self, phase: &str, round: usize, loss: f64, params: &ParamStore, log: &mut TrainLog) -> bool {
        if loss < self.best {
            self.best = loss;
            self.best_round = round;
            self.since = 0;
            self.best_params = Some(params.clone());
        } else {
            self.since += 1;
        }
        log.push(LogEvent::Validation {
            phase: phase.into(),
            round,
            loss,
            best: self.best,
            patience: self.since,
        });
        if self.since >= self.patience {
            log.push(LogEvent::EarlyStop {
                phase: phase.into(),
                round,
                best_round: self.best_round,
            });
            return true;
        }
        false
    }

    /// Best parameters, with feature rows for nodes added after the best
    /// round taken from `current`.
    fn finish(self, current: ParamStore) -> Result<ParamStore> {
        let Some(mut best) = self.best_params else {
            return Ok(current);
        };
        let id = current.id(FEATURE_PARAM)?;
        let (have, want) = (best.value(id).rows(), current.value(id).rows());
        if have < want {
            let f = current.value(id);
            let extra = crate::numcore::Tensor::new(vec![want - have, f.cols()], f.data()[have * f.cols()..].to_vec())?;
            best.append_rows(id, &extra)?;
        }
        Ok(best)
    }
}

fn grow(store: &mut ParamStore, model: &Model, graph: &MetaKnowledgeGraph, r: &mut Rng) -> Result<usize> {
    grow_features(store, graph, model.config.embed_dim, model.config.init_bound, r)
}

/// Names the parameter with the largest magnitude in a numeric failure.
pub(crate) fn blame(store: &ParamStore, e: Error) -> Error {
    let Error::NonFinite(what) = &e else {
        return e;
    };
    let worst = store
        .ids()
        .map(|id| {
            let m =
                store.value(id).data().iter().fold(
                    0.0f64,
                    |a, x| if x.is_finite() { a.max(x.abs()) } else { f64::INFINITY },
                );
            (m, id)
        })
        .max_by(|a, b| a.0.total_cmp(&b.0));
    match worst {
        Some((m, id)) => Error::NonFinite(format!("{what}; largest parameter `{}` at {m:.3e}", store.name(id))),
        None => e,
    }
}

fn dialogue_index(corpus: &Corpus) -> BTreeMap<&str, &Dialogue> {
    corpus.dialogues.iter().map(|d| (d.id.as_str(), d)).collect()
}

/// Seeded dialogue-level hold-out of `fraction` of the corpus.
fn hold_out(corpus: &Corpus, fraction: f64, seed: u64, label: &str) -> BTreeSet<String> {
    let mut ids: Vec<&String> = corpus.dialogues.iter().map(|d| &d.id).collect();
    let n = (ids.len() as f64 * fraction).round() as usize;
    let n = n.min(ids.len().saturating_sub(1));
    ids.shuffle(&mut rng::stream(seed, label));
    ids.into_iter().take(n).cloned().collect()
}

/// Reptile meta-training over source-disease tasks. With evolution on,
/// every task batch's dialogues are observed into the co-occurrence graph
/// before the batch's forward passes. Returns the best parameters by mean
/// query loss of held-out tasks (after inner adaptation), if any are held
/// out, else the final ones.
pub fn meta_train(
    model: &Model,
    init: ParamStore,
    source: &Corpus,
    commonsense: &CommonsenseGraph,
    config: &MetaConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    const PHASE: &str = "meta";
    let mut log = TrainLog::default();
    let bank = InstanceBank::new(source, &model.vocab)?;
    let index = dialogue_index(source);
    let mut graph = GraphState::new(commonsense, config.evolve_enabled)?;
    let mut store = init;
    let mut feat_rng = rng::stream(config.seed, "meta/features");
    grow(&mut store, model, &graph.meta, &mut feat_rng)?;

    let validation: Vec<Task> = if config.validation_tasks > 0 {
        let mut v = make_tasks(source, config, usize::MAX);
        v.truncate(config.validation_tasks);
        v
    } else {
        Vec::new()
    };
    let held: BTreeSet<&String> = validation.iter().flat_map(Task::dialogues).collect();
    let train = source.subset(|d| !held.contains(&d.id));

    let mut stopper = EarlyStopping::new(config.patience);
    let mut epoch = 0;
    let mut stream = make_tasks(&train, config, epoch);
    if stream.is_empty() && config.outer_iterations > 0 {
        return Err(Error::Training("no usable meta-training tasks".into()));
    }
    let mut pos = 0;
    let mut iteration = 0;
    let mut last_validated = 0;
    let validate = |store: &ParamStore, graph: &MetaKnowledgeGraph| -> Result<f64> {
        let mut total = 0.0;
        for t in &validation {
            let support = bank.gather(&t.support);
            let query = bank.gather(&t.query);
            let adapted = inner_adapt(store, config.inner_rate, config.inner_steps, |s| {
                batch_loss_and_grad(s, model, graph, &support)
            })?;
            total += mean_loss(&adapted, model, graph, &query)?;
        }
        Ok(total / validation.len() as f64)
    };

    while iteration < config.outer_iterations {
        if pos >= stream.len() {
            epoch += 1;
            stream = make_tasks(&train, config, epoch);
            pos = 0;
        }
        let end = (pos + config.task_batch_size).min(stream.len());
        let batch = &stream[pos..end];
        pos = end;

        let seen = batch
            .iter()
            .flat_map(Task::dialogues)
            .filter_map(|id| index.get(id.as_str()).copied());
        if graph.observe(seen, source)? {
            grow(&mut store, model, &graph.meta, &mut feat_rng)?;
            log.push(LogEvent::Evolve {
                phase: PHASE.into(),
                iteration,
                nodes: graph.meta.len(),
                edges: graph.meta.graph.edge_count(),
            });
        }

        let mut adapted = Vec::with_capacity(batch.len());
        let mut last_failure = String::new();
        let mut first_losses = 0.0;
        for task in batch {
            let support = bank.gather(&task.support);
            if support.is_empty() {
                log.push(LogEvent::Skipped {
                    phase: PHASE.into(),
                    what: task.disease.clone(),
                    reason: "task has no support instances".into(),
                });
                continue;
            }
            let first = Cell::new(None);
            let result = inner_adapt(&store, config.inner_rate, config.inner_steps, |s| {
                let (l, g) = batch_loss_and_grad(s, model, &graph.meta, &support)?;
                if first.get().is_none() {
                    first.set(Some(l));
                }
                Ok((l, g))
            });
            match result {
                Ok(a) => {
                    first_losses += first.get().unwrap_or(f64::NAN);
                    adapted.push(a);
                }
                Err(e) if e.is_numeric() => {
                    log.push(LogEvent::Skipped {
                        phase: PHASE.into(),
                        what: task.disease.clone(),
                        reason: e.to_string(),
                    });
                    last_failure = e.to_string();
                }
                Err(e) => return Err(e),
            }
        }
        if adapted.is_empty() {
            return Err(Error::NonFinite(format!(
                "every task of outer iteration {iteration} ({last_failure})"
            )));
        }
        store = reptile_outer(&store, &adapted, config.outer_rate)?;
        log.push(LogEvent::Iteration {
            phase: PHASE.into(),
            iteration,
            loss: first_losses / adapted.len() as f64,
            tasks: adapted.len(),
        });
        iteration += 1;

        if !validation.is_empty() && iteration % config.validate_every == 0 {
            last_validated = iteration;
            let loss = validate(&store, &graph.meta)?;
            if stopper.record(PHASE, iteration / config.validate_every, loss, &store, &mut log) {
                break;
            }
        }
    }
    if !validation.is_empty() && last_validated != iteration {
        let loss = validate(&store, &graph.meta)?;
        stopper.record(PHASE, iteration.div_ceil(config.validate_every), loss, &store, &mut log);
    }
    Ok(TrainOutcome {
        params: stopper.finish(store)?,
        graph: graph.meta,
        log,
    })
}

/// Pooled mini-batch Adam over `corpus` with dialogue-level hold-out and
/// early stopping. With `online`, each batch's dialogues are observed into
/// the graph before its forward pass.
#[allow(clippy::too_many_arguments)]
fn supervised(
    phase: &str,
    model: &Model,
    mut store: ParamStore,
    mut graph: GraphState,
    corpus: &Corpus,
    config: &MetaConfig,
    epochs: usize,
    online: bool,
    mut log: TrainLog,
) -> Result<TrainOutcome> {
    let held = hold_out(
        corpus,
        config.validation_fraction,
        config.seed,
        &format!("{phase}/validation"),
    );
    let bank = InstanceBank::new(corpus, &model.vocab)?;
    let train_ids: Vec<&String> = corpus
        .dialogues
        .iter()
        .map(|d| &d.id)
        .filter(|id| !held.contains(*id))
        .collect();
    let train: Vec<&PreparedInstance> = bank.gather(train_ids.iter().copied());
    let valid: Vec<&PreparedInstance> = bank.gather(held.iter());
    if train.is_empty() {
        return Err(Error::Training(format!("{phase}: no training instances")));
    }
    let index = dialogue_index(corpus);
    let mut feat_rng = rng::stream(config.seed, &format!("{phase}/features"));
    grow(&mut store, model, &graph.meta, &mut feat_rng)?;
    let mut opt = Optimizer::adam();
    let mut stopper = EarlyStopping::new(config.patience);
    let mut iteration = 0;
    for epoch in 0..epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng::stream(config.seed, &format!("{phase}/epoch/{epoch}")));
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&PreparedInstance> = chunk.iter().map(|&i| train[i]).collect();
            if online {
                let seen = batch.iter().filter_map(|i| index.get(i.dialogue.as_str()).copied());
                if graph.observe(seen, corpus)? {
                    grow(&mut store, model, &graph.meta, &mut feat_rng)?;
                    log.push(LogEvent::Evolve {
                        phase: phase.into(),
                        iteration,
                        nodes: graph.meta.len(),
                        edges: graph.meta.graph.edge_count(),
                    });
                }
            }
            let (loss, grads) =
                batch_loss_and_grad(&store, model, &graph.meta, &batch).map_err(|e| blame(&store, e))?;
            if !loss.is_finite() {
                return Err(blame(
                    &store,
                    Error::NonFinite(format!("{phase} loss at iteration {iteration}")),
                ));
            }
            store.accumulate(&grads, 1.0)?;
            opt.step(&mut store, config.learning_rate)
                .map_err(|e| blame(&store, e))?;
            log.push(LogEvent::Iteration {
                phase: phase.into(),
                iteration,
                loss,
                tasks: batch.len(),
            });
            iteration += 1;
        }
        if !valid.is_empty() {
            let loss = mean_loss(&store, model, &graph.meta, &valid)?;
            if stopper.record(phase, epoch, loss, &store, &mut log) {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        params: stopper.finish(store)?,
        graph: graph.meta,
        log,
    })
}

/// Multi-task pretraining: pooled mini-batches over every source disease.
pub fn pretrain_multitask(
    model: &Model,
    init: ParamStore,
    source: &Corpus,
    commonsense: &CommonsenseGraph,
    config: &MetaConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    let graph = GraphState::new(commonsense, config.evolve_enabled)?;
    supervised(
        "pretrain",
        model,
        init,
        graph,
        source,
        config,
        config.pretrain_epochs,
        true,
        TrainLog::default(),
    )
}

/// Fine-tunes `theta` on the target corpus. With evolution on, the graph is
/// first evolved with every target adaptation dialogue.
pub fn adapt_to_target(
    model: &Model,
    theta: ParamStore,
    graph: &MetaKnowledgeGraph,
    commonsense: &CommonsenseGraph,
    target: &Corpus,
    config: &MetaConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if target.dialogues.is_empty() {
        return Err(Error::Training("empty target corpus".into()));
    }
    let mut log = TrainLog::default();
    let mut state = GraphState::resume(commonsense, graph.clone(), config.evolve_enabled);
    if state.observe(&target.dialogues, target)? {
        log.push(LogEvent::Evolve {
            phase: "adapt".into(),
            iteration: 0,
            nodes: state.meta.len(),
            edges: state.meta.graph.edge_count(),
        });
    }
    supervised(
        "adapt",
        model,
        theta,
        state,
        target,
        config,
        config.adapt_epochs,
        false,
        log,
    )
}
