use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{extract_instances, Corpus, Vocabulary};
use crate::error::Result;
use crate::model::PreparedInstance;
use crate::rng;

use super::MetaConfig;

/// A handful of one disease's dialogues, split into support and query
/// halves at dialogue granularity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub disease: String,
    pub support: Vec<String>,
    pub query: Vec<String>,
}

impl Task {
    pub fn dialogues(&self) -> impl Iterator<Item = &String> {
        self.support.iter().chain(&self.query)
    }
}

/// Builds the task stream of one epoch. Each disease's dialogues are
/// shuffled and cut into tasks of `task_size`; leftovers are dealt
/// round-robin onto that disease's tasks, so every dialogue lands in exactly
/// one task. Diseases with fewer than `task_size` dialogues are skipped.
pub fn make_tasks(corpus: &Corpus, config: &MetaConfig, epoch: usize) -> Vec<Task> {
    let r = &mut rng::stream(config.seed, &format!("tasks/{epoch}"));
    let mut tasks = Vec::new();
    for disease in corpus.diseases() {
        let mut ids: Vec<String> = corpus.dialogues_of(&disease).map(|d| d.id.clone()).collect();
        if ids.len() < config.task_size {
            log::warn!(
                "skipping disease `{disease}`: {} dialogues, task size {}",
                ids.len(),
                config.task_size
            );
            continue;
        }
        ids.shuffle(r);
        let full = ids.len() / config.task_size;
        let mut groups: Vec<Vec<String>> = ids
            .chunks(config.task_size)
            .take(full)
            .map(<[String]>::to_vec)
            .collect();
        for (k, id) in ids[full * config.task_size..].iter().enumerate() {
            groups[k % full].push(id.clone());
        }
        for g in groups {
            let n = ((g.len() as f64 * config.support_fraction).round() as usize).clamp(1, g.len() - 1);
            tasks.push(Task {
                disease: disease.clone(),
                support: g[..n].to_vec(),
                query: g[n..].to_vec(),
            });
        }
    }
    tasks.shuffle(r);
    tasks
}

/// Prepared instances grouped by dialogue id.
#[derive(Clone, Debug, Default)]
pub struct InstanceBank {
    by_dialogue: BTreeMap<String, Vec<PreparedInstance>>,
}

impl InstanceBank {
    pub fn new(corpus: &Corpus, vocab: &Vocabulary) -> Result<Self> {
        let mut by_dialogue = BTreeMap::new();
        for d in &corpus.dialogues {
            let insts = extract_instances(d)
                .iter()
                .map(|i| PreparedInstance::new(i, vocab, &corpus.catalog))
                .collect::<Result<Vec<_>>>()?;
            by_dialogue.insert(d.id.clone(), insts);
        }
        Ok(Self { by_dialogue })
    }

    /// Instances of the given dialogues, in the given order.
    pub fn gather<'a, I>(&self, ids: I) -> Vec<&PreparedInstance>
    where
        I: IntoIterator<Item = &'a String>,
    {
        ids.into_iter()
            .flat_map(|id| self.by_dialogue.get(id).into_iter().flatten())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.by_dialogue.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
