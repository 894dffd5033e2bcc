use std::collections::BTreeSet;

use geml_core::corpus::{generate_synthetic_corpus, Corpus, DiseaseSpec, SynthSpec};
use geml_core::kgraph::{parse_commonsense, CoOccurrenceGraph, CommonsenseGraph};
use geml_core::rng;
use rand::seq::SliceRandom;
use rand::Rng;

/// Random corpus with at most 50 dialogues over at most 20 entities, plus a
/// random commonsense graph over the same catalog.
pub fn random_world(seed: u64) -> (Corpus, CommonsenseGraph) {
    let r = &mut rng::stream(seed, "world");
    let n_diseases = r.gen_range(1..=4);
    let n_symptoms = r.gen_range(2..=20 - n_diseases);
    let pool: Vec<String> = (0..n_symptoms).map(|i| format!("s{i}")).collect();
    let diseases = (0..n_diseases)
        .map(|d| {
            let k = r.gen_range(1..=n_symptoms.min(5));
            DiseaseSpec {
                name: format!("d{d}"),
                symptoms: pool.choose_multiple(r, k).cloned().collect(),
            }
        })
        .collect();
    let counts = (0..n_diseases).map(|_| r.gen_range(0..=50 / n_diseases)).collect();
    let mut spec = SynthSpec::new(diseases, counts, seed);
    spec.distractors = pool.clone();
    spec.mention_prob = r.gen_range(0.2..1.0);
    spec.noise_rate = r.gen_range(0.0..0.5);
    let corpus = generate_synthetic_corpus(&spec, seed).unwrap();

    let mut text = String::new();
    for e in corpus.catalog.iter() {
        text.push_str(&format!("node {} {}\n", e.name, e.kind.as_str()));
    }
    let names: Vec<&str> = corpus.catalog.iter().map(|e| e.name.as_str()).collect();
    for _ in 0..r.gen_range(0..30) {
        let a = names[r.gen_range(0..names.len())];
        let b = names[r.gen_range(0..names.len())];
        if a != b {
            text.push_str(&format!("edge {a} {b}\n"));
        }
    }
    (corpus, parse_commonsense(&text).unwrap())
}

pub fn brute_force(corpus: &Corpus, cs: &CommonsenseGraph) -> BTreeSet<(String, String)> {
    let mut edges = cs.graph.named_edges();
    for d in &corpus.dialogues {
        let mut ents: Vec<String> = d.mentioned_entities().into_iter().collect();
        ents.push(d.disease.clone());
        for a in &ents {
            for b in &ents {
                if a < b {
                    edges.insert((a.clone(), b.clone()));
                }
            }
        }
    }
    edges
}

pub fn observe_all<'a>(
    corpus: &Corpus,
    order: impl Iterator<Item = &'a geml_core::corpus::Dialogue>,
) -> CoOccurrenceGraph {
    let mut g = CoOccurrenceGraph::new();
    for d in order {
        g.observe_dialogue(d, &corpus.catalog).unwrap();
    }
    g
}
