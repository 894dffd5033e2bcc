use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::{Catalog, EntityKind, Instance, Utterance, Vocabulary, EOS};
use crate::error::{Error, Result};

/// A context in model terms: token ids per utterance and the entity names
/// each utterance mentions.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedContext {
    pub utterances: Vec<Vec<usize>>,
    pub mentions: Vec<BTreeSet<String>>,
    pub kinds: BTreeMap<String, EntityKind>,
}

impl PreparedContext {
    pub fn new(context: &[Utterance], vocab: &Vocabulary, catalog: &Catalog) -> Result<Self> {
        let mut kinds = BTreeMap::new();
        let mut mentions = Vec::with_capacity(context.len());
        for u in context {
            let mut names = BTreeSet::new();
            for id in &u.entity_mentions {
                let e = catalog.get(id).ok_or_else(|| Error::UnknownEntity(id.clone()))?;
                kinds.insert(e.name.clone(), e.kind);
                names.insert(e.name.clone());
            }
            mentions.push(names);
        }
        Ok(Self {
            utterances: context.iter().map(|u| vocab.encode(&u.tokens)).collect(),
            mentions,
            kinds,
        })
    }

    /// Kind of a mentioned entity; names outside the context default to
    /// symptom.
    pub fn kind_of(&self, name: &str) -> EntityKind {
        self.kinds.get(name).copied().unwrap_or(EntityKind::Symptom)
    }
}

/// A training or test example in model terms.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedInstance {
    pub id: String,
    pub dialogue: String,
    pub disease: String,
    pub context: PreparedContext,
    /// Response token ids followed by EOS.
    pub target: Vec<usize>,
    pub response_tokens: Vec<String>,
    /// Gold entity names.
    pub gold: BTreeSet<String>,
}

impl PreparedInstance {
    pub fn new(inst: &Instance, vocab: &Vocabulary, catalog: &Catalog) -> Result<Self> {
        let mut target = vocab.encode(&inst.response.tokens);
        target.push(EOS);
        let gold = inst
            .gold_entities
            .iter()
            .map(|id| {
                catalog
                    .get(id)
                    .map(|e| e.name.clone())
                    .ok_or_else(|| Error::UnknownEntity(id.clone()))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            id: inst.id(),
            dialogue: inst.dialogue_id.clone(),
            disease: inst.disease.clone(),
            context: PreparedContext::new(&inst.context, vocab, catalog)?,
            target,
            response_tokens: inst.response.tokens.clone(),
            gold,
        })
    }
}

/// Prepares every instance of every dialogue, in corpus order.
pub fn prepare_corpus(corpus: &crate::corpus::Corpus, vocab: &Vocabulary) -> Result<Vec<PreparedInstance>> {
    let mut out = Vec::new();
    for d in &corpus.dialogues {
        for inst in crate::corpus::extract_instances(d) {
            out.push(PreparedInstance::new(&inst, vocab, &corpus.catalog)?);
        }
    }
    Ok(out)
}
