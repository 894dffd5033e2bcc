use std::collections::BTreeSet;

use super::Graph;
use crate::corpus::{Catalog, Dialogue};
use crate::error::{Error, Result};

/// Online graph linking every pair of entities mentioned in the same
/// dialogue (the disease label counts as a mention).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CoOccurrenceGraph {
    pub graph: Graph,
    seen: BTreeSet<String>,
}

impl CoOccurrenceGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the dialogue's co-mention edges. Returns false if the dialogue
    /// id was already observed, in which case nothing changes.
    pub fn observe_dialogue(&mut self, dialogue: &Dialogue, catalog: &Catalog) -> Result<bool> {
        if self.seen.contains(&dialogue.id) {
            return Ok(false);
        }
        let mut ids = dialogue.mentioned_entities();
        ids.insert(dialogue.disease.clone());
        let mut idx = Vec::with_capacity(ids.len());
        for id in &ids {
            let e = catalog.get(id).ok_or_else(|| Error::UnknownEntity(id.clone()))?;
            idx.push(self.graph.add_node(&e.name, e.kind)?);
        }
        for (k, &a) in idx.iter().enumerate() {
            for &b in &idx[k + 1..] {
                self.graph.add_edge(a, b)?;
            }
        }
        self.seen.insert(dialogue.id.clone());
        Ok(true)
    }

    pub fn seen_dialogues(&self) -> &BTreeSet<String> {
        &self.seen
    }
}
