//! Synthetic consultation dialogues with a known disease-symptom structure.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{
    annotate_entities, canonical_name, Catalog, Corpus, Dialogue, Entity, EntityKind, Speaker, SplitTag, Utterance,
};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiseaseSpec {
    pub name: String,
    pub symptoms: Vec<String>,
}

/// Generator settings, stored as a JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub diseases: Vec<DiseaseSpec>,
    /// Caps how many of a disease's symptoms one patient exhibits.
    #[serde(default)]
    pub symptoms_per_disease: Option<usize>,
    pub dialogues_per_disease: Vec<usize>,
    /// Inclusive range of doctor inquiry rounds before the diagnosis.
    pub turns_range: (usize, usize),
    /// Probability that each exhibited symptom is mentioned.
    pub mention_prob: f64,
    /// Per-patient-turn probability of mentioning an unrelated symptom.
    pub noise_rate: f64,
    pub seed: u64,
    /// Minimum utterances per dialogue.
    #[serde(default = "default_min_turns")]
    pub min_turns: usize,
    /// Minimum true symptoms mentioned per dialogue.
    #[serde(default)]
    pub min_entities: usize,
    /// Extra symptoms used only as distractors.
    #[serde(default)]
    pub distractors: Vec<String>,
    #[serde(default = "default_fillers")]
    pub filler_vocab: Vec<String>,
    #[serde(default)]
    pub split: SplitTag,
    #[serde(default)]
    pub id_prefix: String,
}

fn default_min_turns() -> usize {
    2
}

fn default_fillers() -> Vec<String> {
    [
        "hello", "doctor", "recently", "lately", "really", "today", "please", "help", "so", "also",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

const ADVICE: [&[&str]; 3] = [
    &["please", "rest", "and", "drink", "water"],
    &["take", "the", "medicine", "twice", "a", "day"],
    &["see", "a", "specialist", "soon"],
];

impl SynthSpec {
    /// A spec with default generator knobs.
    pub fn new(diseases: Vec<DiseaseSpec>, dialogues_per_disease: Vec<usize>, seed: u64) -> Self {
        Self {
            diseases,
            symptoms_per_disease: None,
            dialogues_per_disease,
            turns_range: (1, 3),
            mention_prob: 0.8,
            noise_rate: 0.1,
            seed,
            min_turns: default_min_turns(),
            min_entities: 0,
            distractors: Vec::new(),
            filler_vocab: default_fillers(),
            split: SplitTag::Source,
            id_prefix: String::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.diseases.is_empty() {
            return bad("spec declares no diseases".into());
        }
        if self.dialogues_per_disease.len() != self.diseases.len() {
            return bad(format!(
                "dialogues_per_disease has {} entries for {} diseases",
                self.dialogues_per_disease.len(),
                self.diseases.len()
            ));
        }
        if self.turns_range.0 > self.turns_range.1 {
            return bad("turns_range is empty".into());
        }
        for (name, p) in [("mention_prob", self.mention_prob), ("noise_rate", self.noise_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        if self.symptoms_per_disease == Some(0) {
            return bad("symptoms_per_disease must be positive".into());
        }
        let need_rounds = self.min_turns.saturating_sub(2).div_ceil(2);
        for d in &self.diseases {
            if d.symptoms.is_empty() {
                return bad(format!("disease `{}` has no symptoms", d.name));
            }
            let active = self
                .symptoms_per_disease
                .map_or(d.symptoms.len(), |c| c.min(d.symptoms.len()));
            if active < self.min_entities.max(need_rounds + 1) && (self.min_entities > 0 || need_rounds > 0) {
                return bad(format!(
                    "disease `{}` has too few symptoms for min_entities/min_turns",
                    d.name
                ));
            }
        }
        Ok(())
    }

    /// Catalog over every disease, symptom and distractor in the spec.
    pub fn catalog(&self) -> Result<Catalog> {
        let mut kinds: BTreeMap<String, EntityKind> = BTreeMap::new();
        let mut order = Vec::new();
        let mut add = |name: &str, kind: EntityKind| -> Result<()> {
            let name = canonical_name(name);
            match kinds.get(&name) {
                Some(&k) if k != kind => Err(Error::Config(format!(
                    "`{name}` is declared as both disease and symptom"
                ))),
                Some(_) => Ok(()),
                None => {
                    kinds.insert(name.clone(), kind);
                    order.push((name, kind));
                    Ok(())
                }
            }
        };
        for d in &self.diseases {
            add(&d.name, EntityKind::Disease)?;
        }
        for d in &self.diseases {
            for s in &d.symptoms {
                add(s, EntityKind::Symptom)?;
            }
        }
        for s in &self.distractors {
            add(s, EntityKind::Symptom)?;
        }
        Catalog::new(order.into_iter().map(|(name, kind)| Entity {
            id: name.clone(),
            name,
            kind,
        }))
    }
}

fn words(ws: &[&str]) -> Vec<String> {
    ws.iter().map(|s| s.to_string()).collect()
}

fn join_with(items: &[String], sep: &str) -> Vec<String> {
    let mut out = Vec::new();
    for (i, s) in items.iter().enumerate() {
        if i > 0 {
            out.push(sep.to_string());
        }
        out.push(s.clone());
    }
    out
}

/// Generates a corpus from `spec` using `seed` (the spec's own seed is
/// ignored here so callers can sweep seeds).
pub fn generate_synthetic_corpus(spec: &SynthSpec, seed: u64) -> Result<Corpus> {
    spec.validate()?;
    let catalog = spec.catalog()?;
    let r = &mut rng::stream(seed, "synth");

    let all_symptoms: Vec<String> = catalog
        .iter()
        .filter(|e| e.kind == EntityKind::Symptom)
        .map(|e| e.name.clone())
        .collect();
    let need_rounds = spec.min_turns.saturating_sub(2).div_ceil(2);

    let mut dialogues = Vec::new();
    for (d, &count) in spec.diseases.iter().zip(&spec.dialogues_per_disease) {
        let disease = canonical_name(&d.name);
        let truth: Vec<String> = d.symptoms.iter().map(|s| canonical_name(s)).collect();
        let truth_set: BTreeSet<&String> = truth.iter().collect();
        let distractors: Vec<&String> = all_symptoms.iter().filter(|s| !truth_set.contains(s)).collect();

        for k in 0..count {
            let mut active = truth.clone();
            active.shuffle(r);
            if let Some(cap) = spec.symptoms_per_disease {
                active.truncate(cap);
            }
            let mut mentioned: Vec<String> = Vec::new();
            let mut silent: Vec<String> = Vec::new();
            for s in &active {
                if r.gen_bool(spec.mention_prob) {
                    mentioned.push(s.clone());
                } else {
                    silent.push(s.clone());
                }
            }
            let floor = spec.min_entities.max(if need_rounds > 0 { need_rounds + 1 } else { 0 });
            while mentioned.len() < floor {
                mentioned.push(silent.remove(0));
            }

            let drawn = r.gen_range(spec.turns_range.0..=spec.turns_range.1);
            let rounds = drawn.max(need_rounds).min(mentioned.len().saturating_sub(1));
            // Bucket 0 is the opening self-report; buckets 1..=rounds are
            // answered inquiries. Each gets at least one symptom.
            let mut buckets: Vec<Vec<String>> = vec![Vec::new(); rounds + 1];
            for (i, s) in mentioned.iter().enumerate() {
                let b = if i <= rounds { i } else { r.gen_range(0..=rounds) };
                buckets[b].push(s.clone());
            }

            let noise = |r: &mut rng::Rng| -> Option<String> {
                if !distractors.is_empty() && r.gen_bool(spec.noise_rate) {
                    Some(distractors[r.gen_range(0..distractors.len())].clone())
                } else {
                    None
                }
            };
            let filler = |r: &mut rng::Rng, max: usize| -> Vec<String> {
                let n = if spec.filler_vocab.is_empty() {
                    0
                } else {
                    r.gen_range(0..=max)
                };
                (0..n)
                    .map(|_| spec.filler_vocab[r.gen_range(0..spec.filler_vocab.len())].clone())
                    .collect()
            };

            let mut turns: Vec<(Speaker, Vec<String>)> = Vec::new();
            let mut opening = filler(r, 2);
            if buckets[0].is_empty() {
                opening.extend(words(&["i", "feel", "unwell"]));
            } else {
                opening.extend(words(&["i", "have"]));
                opening.extend(join_with(&buckets[0], "and"));
            }
            if let Some(x) = noise(r) {
                opening.extend(words(&["and", "maybe"]));
                opening.push(x);
            }
            turns.push((Speaker::Patient, opening));

            for bucket in &buckets[1..] {
                let mut ask = if r.gen_bool(0.5) {
                    words(&["do", "you", "have"])
                } else {
                    words(&["any"])
                };
                ask.extend(join_with(bucket, "or"));
                ask.extend(words(&["?", "it", "may", "be"]));
                ask.push(disease.clone());
                turns.push((Speaker::Doctor, ask));

                let mut answer = words(&["yes", "i", "have"]);
                answer.extend(join_with(bucket, "and"));
                if let Some(x) = noise(r) {
                    answer.extend(words(&["but", "no"]));
                    answer.push(x);
                }
                answer.extend(filler(r, 1));
                turns.push((Speaker::Patient, answer));
            }

            let mut diagnosis = words(&["you", "may", "have"]);
            diagnosis.push(disease.clone());
            diagnosis.push(",".into());
            diagnosis.extend(words(ADVICE[r.gen_range(0..ADVICE.len())]));
            turns.push((Speaker::Doctor, diagnosis));

            let utterances = turns
                .into_iter()
                .map(|(speaker, tokens)| {
                    let mentions = annotate_entities(&tokens, &catalog);
                    Utterance::new(speaker, tokens, mentions)
                })
                .collect();
            dialogues.push(Dialogue {
                id: format!("{}{}-{:04}", spec.id_prefix, disease, k),
                disease: disease.clone(),
                utterances,
            });
        }
    }
    Corpus::new(dialogues, catalog, spec.split)
}

/// Emits a commonsense triple file over the spec's catalog that keeps a
/// seeded `keep_fraction` of the true edges (disease-symptom links and
/// symptom pairs sharing a disease).
pub fn commonsense_triples(spec: &SynthSpec, keep_fraction: f64, seed: u64) -> Result<String> {
    if !(0.0..=1.0).contains(&keep_fraction) {
        return Err(Error::Config("keep_fraction must lie in [0, 1]".into()));
    }
    let catalog = spec.catalog()?;
    let mut edges: BTreeSet<(String, String)> = BTreeSet::new();
    let pair = |a: &str, b: &str| {
        if a < b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        }
    };
    for d in &spec.diseases {
        let dn = canonical_name(&d.name);
        let syms: Vec<String> = d.symptoms.iter().map(|s| canonical_name(s)).collect();
        for (i, s) in syms.iter().enumerate() {
            edges.insert(pair(&dn, s));
            for t in &syms[i + 1..] {
                if s != t {
                    edges.insert(pair(s, t));
                }
            }
        }
    }
    let mut edges: Vec<_> = edges.into_iter().collect();
    edges.shuffle(&mut rng::stream(seed, "commonsense"));
    let keep = (edges.len() as f64 * keep_fraction).round() as usize;
    let mut kept: Vec<_> = edges.into_iter().take(keep).collect();
    kept.sort();

    let mut out = String::from("# commonsense disease-symptom graph\n");
    for e in catalog.iter() {
        let _ = writeln!(out, "node {} {}", e.name, e.kind.as_str());
    }
    for (a, b) in kept {
        let _ = writeln!(out, "edge {a} {b}");
    }
    Ok(out)
}
