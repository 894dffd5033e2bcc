use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{annotate_entities, extract_instances, Corpus};
use crate::error::{Error, Result};
use crate::kgraph::MetaKnowledgeGraph;
use crate::model::{generate, Model, PreparedInstance};
use crate::numcore::ParamStore;

use super::{bleu_sentence, entity_f1};

/// Scores of one disease, all scaled by 100.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiseaseScores {
    pub disease: String,
    pub instances: usize,
    pub bleu: f64,
    pub entity_f1: f64,
    /// Entity-F1 of entities found in the generated text.
    pub generation_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub diseases: Vec<DiseaseScores>,
    /// Unweighted means over `diseases`.
    pub average: DiseaseScores,
    pub instances: usize,
    pub truncated: usize,
    pub config_digest: String,
    pub seed: Option<u64>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Digest of the model settings, vocabulary and graph a report was made with.
pub fn config_digest(model: &Model, graph: &MetaKnowledgeGraph) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&model.config).expect("config serializes"));
    h.update(model.vocab.hash().as_bytes());
    h.update(graph.hash().as_bytes());
    hex::encode(h.finalize())[..16].to_string()
}

/// Scores every instance of `test` with frozen parameters and graph, then
/// averages per disease and across diseases.
pub fn evaluate(store: &ParamStore, model: &Model, graph: &MetaKnowledgeGraph, test: &Corpus) -> Result<EvalReport> {
    let mut rows: Vec<(String, Vec<(f64, f64, f64)>)> = Vec::new();
    let mut truncated = 0;
    let mut total = 0;
    for d in &test.dialogues {
        for inst in extract_instances(d) {
            let p = PreparedInstance::new(&inst, &model.vocab, &test.catalog)?;
            let unknown = p
                .context
                .mentions
                .iter()
                .flatten()
                .filter(|n| !graph.graph.contains(n))
                .count();
            if unknown > 0 {
                log::debug!("{}: {unknown} context entities attached outside the graph", p.id);
            }
            let g = generate(store, model, graph, &p.context)?;
            truncated += usize::from(g.truncated);
            let found: BTreeSet<String> = annotate_entities(&g.tokens, &test.catalog)
                .into_iter()
                .filter_map(|id| test.catalog.get(&id).map(|e| e.name.clone()))
                .collect();
            let scores = (
                bleu_sentence(&g.tokens, &p.response_tokens),
                entity_f1(&g.entities, &p.gold),
                entity_f1(&found, &p.gold),
            );
            match rows.iter_mut().find(|(name, _)| *name == d.disease) {
                Some((_, v)) => v.push(scores),
                None => rows.push((d.disease.clone(), vec![scores])),
            }
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::Eval("empty test set".into()));
    }
    let diseases: Vec<DiseaseScores> = rows
        .into_iter()
        .map(|(disease, v)| {
            let n = v.len() as f64;
            DiseaseScores {
                disease,
                instances: v.len(),
                bleu: 100.0 * v.iter().map(|s| s.0).sum::<f64>() / n,
                entity_f1: 100.0 * v.iter().map(|s| s.1).sum::<f64>() / n,
                generation_f1: 100.0 * v.iter().map(|s| s.2).sum::<f64>() / n,
            }
        })
        .collect();
    let k = diseases.len() as f64;
    let average = DiseaseScores {
        disease: "average".into(),
        instances: total,
        bleu: diseases.iter().map(|d| d.bleu).sum::<f64>() / k,
        entity_f1: diseases.iter().map(|d| d.entity_f1).sum::<f64>() / k,
        generation_f1: diseases.iter().map(|d| d.generation_f1).sum::<f64>() / k,
    };
    Ok(EvalReport {
        diseases,
        average,
        instances: total,
        truncated,
        config_digest: config_digest(model, graph),
        seed: None,
    })
}

/// Plain-text table with one row per labelled report: Entity-F1 and BLEU
/// per disease, then the averages.
pub fn render_table(rows: &[(String, &EvalReport)]) -> String {
    let Some((_, first)) = rows.first() else {
        return String::new();
    };
    let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(8);
    let cols: Vec<&str> = first
        .diseases
        .iter()
        .map(|d| d.disease.as_str())
        .chain(["average"])
        .collect();
    let col_w = cols.iter().map(|c| c.len()).max().unwrap_or(0).max(13);
    let mut out = String::new();
    let _ = write!(out, "{:label_w$}", "");
    for c in &cols {
        let _ = write!(out, " | {c:^col_w$}");
    }
    out.push('\n');
    let _ = write!(out, "{:label_w$}", "");
    for _ in &cols {
        let _ = write!(out, " | {:^col_w$}", "E-F1   BLEU");
    }
    out.push('\n');
    out.push_str(&"-".repeat(label_w + cols.len() * (col_w + 3)));
    out.push('\n');
    for (label, r) in rows {
        let _ = write!(out, "{label:label_w$}");
        for d in r.diseases.iter().chain([&r.average]) {
            let cell = format!("{:6.2} {:6.2}", d.entity_f1, d.bleu);
            let _ = write!(out, " | {cell:^col_w$}");
        }
        out.push('\n');
    }
    out
}
