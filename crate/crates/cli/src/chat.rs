use std::collections::BTreeSet;
use std::fs;
use std::io::{self, BufRead, Write};

use anyhow::Result;
use geml_core::corpus::{annotate_entities, Catalog, Entity, Speaker, Utterance};
use geml_core::kgraph::{import_json, MetaKnowledgeGraph};
use geml_core::model::{generate, load_model, Model, PreparedContext};
use geml_core::numcore::ParamStore;

use crate::config::graph_path_for;
use crate::{ChatArgs, UsageError};

/// Lowercases, splits on whitespace and detaches punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.to_lowercase().split_whitespace() {
        let mut cur = String::new();
        for ch in word.chars() {
            if ch.is_ascii_punctuation() && ch != '_' && ch != '\'' && ch != '-' {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            } else {
                cur.push(ch);
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

struct Session {
    store: ParamStore,
    model: Model,
    graph: MetaKnowledgeGraph,
    catalog: Catalog,
    context: Vec<Utterance>,
    last: Vec<(String, f64)>,
}

impl Session {
    fn utterance(&self, speaker: Speaker, tokens: Vec<String>) -> Utterance {
        let mentions = annotate_entities(&tokens, &self.catalog);
        Utterance::new(speaker, tokens, mentions)
    }

    fn reply(&mut self, out: &mut impl Write) -> Result<()> {
        if self.context.is_empty() {
            writeln!(out, "need at least one utterance")?;
            return Ok(());
        }
        let ctx = PreparedContext::new(&self.context, &self.model.vocab, &self.catalog)?;
        let g = generate(&self.store, &self.model, &self.graph, &ctx)?;
        writeln!(out, "doctor: {}", g.tokens.join(" "))?;
        let shown: Vec<String> = g
            .probabilities
            .iter()
            .filter(|(n, _)| g.entities.contains(n))
            .map(|(n, p)| format!("{n}={p:.4}"))
            .collect();
        writeln!(out, "entities: {}", shown.join(" "))?;
        self.last = g
            .probabilities
            .iter()
            .filter(|(n, _)| g.entities.contains(n))
            .cloned()
            .collect();
        if !g.tokens.is_empty() {
            let u = self.utterance(Speaker::Doctor, g.tokens);
            self.context.push(u);
        }
        Ok(())
    }

    fn show_graph(&self, out: &mut impl Write) -> Result<()> {
        let mentioned: BTreeSet<&String> = self.context.iter().flat_map(|u| &u.entity_mentions).collect();
        let names: Vec<&str> = mentioned.iter().map(|s| s.as_str()).collect();
        writeln!(out, "mentioned: {}", names.join(" "))?;
        let predicted: Vec<String> = self.last.iter().map(|(n, p)| format!("{n}={p:.4}")).collect();
        writeln!(out, "predicted: {}", predicted.join(" "))?;
        Ok(())
    }
}

pub fn run(a: &ChatArgs) -> Result<()> {
    let (store, manifest) = load_model(&a.checkpoint)?;
    let graph_path = a.graph.clone().unwrap_or_else(|| graph_path_for(&a.checkpoint));
    let bytes =
        fs::read(&graph_path).map_err(|e| UsageError(format!("cannot read graph {}: {e}", graph_path.display())))?;
    let graph = import_json(&bytes)?;
    manifest.check(&manifest.vocab, Some(&graph))?;
    let catalog = Catalog::new(graph.graph.nodes().iter().map(|n| Entity {
        id: n.name.clone(),
        name: n.name.clone(),
        kind: n.kind,
    }))?;
    let mut s = Session {
        store,
        model: manifest.model()?,
        graph,
        catalog,
        context: Vec::new(),
        last: Vec::new(),
    };
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    for line in stdin.lock().lines() {
        let line = line?;
        match line.trim() {
            "/reset" => {
                s.context.clear();
                s.last.clear();
                writeln!(out, "context cleared")?;
            }
            "/graph" => s.show_graph(&mut out)?,
            text => {
                let tokens = tokenize(text);
                if !tokens.is_empty() {
                    let u = s.utterance(Speaker::Patient, tokens);
                    s.context.push(u);
                }
                s.reply(&mut out)?;
            }
        }
        out.flush()?;
    }
    Ok(())
}
