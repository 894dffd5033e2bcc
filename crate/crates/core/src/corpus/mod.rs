//! Dialogue corpora: domain types, JSONL ingestion, vocabulary, entity
//! annotation, training-instance extraction and synthetic generation.

mod annotate;
mod instances;
mod io;
mod synth;
mod vocab;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use annotate::annotate_entities;
pub use instances::{extract_instances, Instance};
pub use io::{load_corpus, parse_corpus, save_corpus, to_jsonl};
pub use synth::{commonsense_triples, generate_synthetic_corpus, DiseaseSpec, SynthSpec};
pub use vocab::{build_vocabulary, Vocabulary, BOS, EOS, PAD, UNK};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Patient,
    Doctor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Disease,
    Symptom,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Disease => "disease",
            EntityKind::Symptom => "symptom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "disease" => Some(EntityKind::Disease),
            "symptom" => Some(EntityKind::Symptom),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    #[default]
    Source,
    Target,
}

/// Joins the words of a multi-word entity name with underscores so every
/// canonical name is a single token.
pub fn canonical_name(name: &str) -> String {
    name.split_whitespace().collect::<Vec<_>>().join("_")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub name: String,
    pub kind: EntityKind,
}

/// Entity catalog in declaration order, indexed by id and by canonical name.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Catalog {
    entries: Vec<Entity>,
    by_id: BTreeMap<String, usize>,
    by_name: BTreeMap<String, usize>,
}

impl Catalog {
    pub fn new(entities: impl IntoIterator<Item = Entity>) -> Result<Self> {
        let mut c = Catalog::default();
        for e in entities {
            c.push(e)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, mut entity: Entity) -> Result<()> {
        entity.name = canonical_name(&entity.name);
        if entity.id.is_empty() || entity.name.is_empty() {
            return Err(Error::Corpus("entity with empty id or name".into()));
        }
        if self.by_id.contains_key(&entity.id) {
            return Err(Error::Corpus(format!("duplicate entity id `{}`", entity.id)));
        }
        if self.by_name.contains_key(&entity.name) {
            return Err(Error::Corpus(format!("duplicate entity name `{}`", entity.name)));
        }
        let slot = self.entries.len();
        self.by_id.insert(entity.id.clone(), slot);
        self.by_name.insert(entity.name.clone(), slot);
        self.entries.push(entity);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Entity> {
        self.by_id.get(id).map(|&i| &self.entries[i])
    }

    pub fn by_name(&self, name: &str) -> Option<&Entity> {
        self.by_name.get(name).map(|&i| &self.entries[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Entity> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Longest canonical name, in underscore-separated words.
    pub(crate) fn max_name_words(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.name.split('_').count())
            .max()
            .unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: Speaker,
    pub tokens: Vec<String>,
    /// Entity ids mentioned in this turn.
    #[serde(rename = "entities")]
    pub entity_mentions: BTreeSet<String>,
}

impl Utterance {
    pub fn new(speaker: Speaker, tokens: Vec<String>, entity_mentions: BTreeSet<String>) -> Self {
        Self {
            speaker,
            tokens,
            entity_mentions,
        }
    }

    /// Builds an utterance from whitespace-separated text, annotating
    /// mentions against the catalog.
    pub fn from_text(speaker: Speaker, text: &str, catalog: &Catalog) -> Self {
        let tokens: Vec<String> = text.split_whitespace().map(str::to_string).collect();
        let entity_mentions = annotate_entities(&tokens, catalog);
        Self {
            speaker,
            tokens,
            entity_mentions,
        }
    }

    fn validate(&self, catalog: &Catalog) -> Result<()> {
        if self.tokens.is_empty() {
            return Err(Error::Corpus("utterance has no tokens".into()));
        }
        for id in &self.entity_mentions {
            let entity = catalog.get(id).ok_or_else(|| Error::UnknownEntity(id.clone()))?;
            if !mentions_name(&self.tokens, &entity.name) {
                return Err(Error::Corpus(format!(
                    "mentioned entity `{id}` has no `{}` token",
                    entity.name
                )));
            }
        }
        Ok(())
    }
}

fn mentions_name(tokens: &[String], name: &str) -> bool {
    if tokens.iter().any(|t| t == name) {
        return true;
    }
    let words: Vec<&str> = name.split('_').collect();
    words.len() > 1
        && tokens
            .windows(words.len())
            .any(|w| w.iter().zip(&words).all(|(a, b)| a == b))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    pub id: String,
    pub disease: String,
    pub utterances: Vec<Utterance>,
}

impl Dialogue {
    pub fn validate(&self, catalog: &Catalog) -> Result<()> {
        if self.utterances.len() < 2 {
            return Err(Error::Corpus(format!(
                "dialogue `{}` has fewer than 2 utterances",
                self.id
            )));
        }
        if !self.utterances.iter().any(|u| u.speaker == Speaker::Doctor) {
            return Err(Error::Corpus(format!("dialogue `{}` has no doctor turn", self.id)));
        }
        match catalog.get(&self.disease) {
            Some(e) if e.kind == EntityKind::Disease => {}
            Some(_) => {
                return Err(Error::Corpus(format!(
                    "dialogue `{}` is labelled with non-disease `{}`",
                    self.id, self.disease
                )))
            }
            None => return Err(Error::UnknownEntity(self.disease.clone())),
        }
        self.utterances.iter().try_for_each(|u| u.validate(catalog))
    }

    /// Every entity mentioned anywhere in the dialogue.
    pub fn mentioned_entities(&self) -> BTreeSet<String> {
        self.utterances
            .iter()
            .flat_map(|u| u.entity_mentions.iter().cloned())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    pub dialogues: Vec<Dialogue>,
    pub catalog: Catalog,
    pub split: SplitTag,
}

impl Corpus {
    pub fn new(dialogues: Vec<Dialogue>, catalog: Catalog, split: SplitTag) -> Result<Self> {
        let c = Self {
            dialogues,
            catalog,
            split,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for d in &self.dialogues {
            if !seen.insert(d.id.as_str()) {
                return Err(Error::Corpus(format!("duplicate dialogue id `{}`", d.id)));
            }
            d.validate(&self.catalog)?;
        }
        Ok(())
    }

    /// Diseases in first-appearance order.
    pub fn diseases(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.dialogues
            .iter()
            .filter(|d| seen.insert(d.disease.clone()))
            .map(|d| d.disease.clone())
            .collect()
    }

    pub fn dialogues_of<'a>(&'a self, disease: &'a str) -> impl Iterator<Item = &'a Dialogue> + 'a {
        self.dialogues.iter().filter(move |d| d.disease == disease)
    }

    /// Dialogue counts per disease, in first-appearance order.
    pub fn counts_by_disease(&self) -> Vec<(String, usize)> {
        self.diseases()
            .into_iter()
            .map(|d| {
                let n = self.dialogues_of(&d).count();
                (d, n)
            })
            .collect()
    }

    /// A corpus restricted to the given dialogues, sharing the catalog.
    pub fn subset(&self, keep: impl Fn(&Dialogue) -> bool) -> Corpus {
        Corpus {
            dialogues: self.dialogues.iter().filter(|d| keep(d)).cloned().collect(),
            catalog: self.catalog.clone(),
            split: self.split,
        }
    }
}
