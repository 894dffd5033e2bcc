use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use geml_core::corpus::{commonsense_triples, generate_synthetic_corpus, load_corpus, save_corpus, Corpus, SynthSpec};
use geml_core::eval::{
    evaluate, initial_state, render_table, run_ablation, train_source, Benchmark, BenchmarkSpec, Regime,
};
use geml_core::kgraph::{
    export_graph as render_graph, import_json, load_commonsense, parse_commonsense, GraphFormat, MetaKnowledgeGraph,
};
use geml_core::meta::{adapt_to_target, MetaConfig};
use geml_core::model::{load_model, save_model, Model, ModelManifest};
use geml_core::numcore::ParamStore;
use serde_json::json;

use crate::config::{graph_path_for, Overrides, RunConfig};
use crate::{ExportArgs, SynthArgs, UsageError};

fn summary(corpus: &Corpus) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:24} {:>9}", "disease", "dialogues");
    for (d, n) in corpus.counts_by_disease() {
        let _ = writeln!(out, "{d:24} {n:>9}");
    }
    let _ = writeln!(out, "{:24} {:>9}", "total", corpus.dialogues.len());
    out
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| UsageError(format!("cannot write {}: {e}", path.display())).into())
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    if a.benchmark {
        let spec = if a.spec == "standard" {
            BenchmarkSpec::standard()
        } else {
            let text = fs::read_to_string(&a.spec).map_err(|_| UsageError(format!("spec not found: {}", a.spec)))?;
            serde_json::from_str(&text).map_err(|e| UsageError(format!("invalid benchmark spec {}: {e}", a.spec)))?
        };
        let seed = a.seed.ok_or_else(|| UsageError("--benchmark needs --seed".into()))?;
        let data = spec.generate(seed)?;
        fs::create_dir_all(&a.out).map_err(|e| UsageError(format!("cannot create {}: {e}", a.out.display())))?;
        for (name, corpus) in [
            ("source", &data.source),
            ("target_adapt", &data.target_adapt),
            ("target_test", &data.target_test),
        ] {
            save_corpus(corpus, a.out.join(format!("{name}.jsonl")))?;
            println!("{name}:\n{}", summary(corpus));
        }
        write(&a.out.join("commonsense.txt"), &data.commonsense_triples)?;
        return Ok(());
    }
    let text = fs::read_to_string(&a.spec).map_err(|_| UsageError(format!("spec not found: {}", a.spec)))?;
    let spec = SynthSpec::from_json(&text).map_err(|e| UsageError(format!("invalid spec {}: {e}", a.spec)))?;
    let seed = a.seed.unwrap_or(spec.seed);
    let corpus = generate_synthetic_corpus(&spec, seed)?;
    save_corpus(&corpus, &a.out)?;
    if let Some(path) = &a.commonsense {
        write(path, commonsense_triples(&spec, a.keep, seed)?)?;
    }
    print!("{}", summary(&corpus));
    Ok(())
}

/// The benchmark named by a config. Without a test corpus the test split is
/// left empty; it plays no part in the vocabulary.
fn load_bench(c: &RunConfig, with_test: bool) -> Result<Benchmark> {
    let p = &c.paths;
    let source = load_corpus(c.need(&p.source, "source")?)?;
    let adapt = load_corpus(c.need(&p.target_adapt, "target_adapt")?)?;
    let test = if with_test {
        load_corpus(c.need(&p.target_test, "target_test")?)?
    } else {
        adapt.subset(|_| false)
    };
    let cs = load_commonsense(c.need(&p.commonsense, "commonsense")?)?;
    Ok(Benchmark::new(source, adapt, test, cs)?)
}

fn save_run(
    dir: &Path,
    stem: &str,
    store: &ParamStore,
    model: &Model,
    graph: &MetaKnowledgeGraph,
    c: &RunConfig,
) -> Result<PathBuf> {
    let ckpt = dir.join(format!("{stem}.ckpt"));
    let info = json!({ "regime": c.regime.as_str(), "seed": c.seed, "stage": stem });
    save_model(store, &ModelManifest::new(model, graph, info), &ckpt)?;
    write(&graph_path_for(&ckpt), render_graph(graph, GraphFormat::Json))?;
    Ok(ckpt)
}

/// Loads a checkpoint and its graph and checks both against the benchmark.
fn load_run(c: &RunConfig, bench: &Benchmark, default: &Path) -> Result<(ParamStore, Model, MetaKnowledgeGraph)> {
    let ckpt = c.paths.checkpoint.clone().unwrap_or_else(|| default.to_path_buf());
    let (store, manifest) = load_model(&ckpt).with_context(|| format!("loading {}", ckpt.display()))?;
    let graph_path = c.paths.graph.clone().unwrap_or_else(|| graph_path_for(&ckpt));
    let bytes =
        fs::read(&graph_path).map_err(|e| UsageError(format!("cannot read graph {}: {e}", graph_path.display())))?;
    let graph = import_json(&bytes)?;
    manifest.check(&bench.vocab, Some(&graph))?;
    if let Some(r) = manifest.info.get("regime").and_then(|r| r.as_str()) {
        if r != c.regime.as_str() {
            return Err(UsageError(format!(
                "checkpoint was trained with regime {r}, config asks for {}",
                c.regime
            ))
            .into());
        }
    }
    if manifest.config != c.model {
        log::warn!("model config differs from the checkpoint's; using the checkpoint's");
    }
    Ok((store, manifest.model()?, graph))
}

pub fn train(path: &Path, o: &Overrides) -> Result<()> {
    let c = RunConfig::load(path, o)?;
    let bench = load_bench(&c, false)?;
    let dir = c.out_dir()?;
    let (model, init) = initial_state(&bench, &c.model, c.seed)?;
    let out = train_source(&bench, &model, init, &c.meta, c.regime.plan())?;
    let ckpt = save_run(dir, "source", &out.params, &model, &out.graph, &c)?;
    out.log.write(&dir.join("train_log.jsonl"))?;
    println!(
        "{} source phase done: graph {} nodes / {} edges, checkpoint {}",
        c.regime,
        out.graph.len(),
        out.graph.graph.edge_count(),
        ckpt.display()
    );
    Ok(())
}

pub fn adapt(path: &Path, o: &Overrides) -> Result<()> {
    let c = RunConfig::load(path, o)?;
    if c.regime == Regime::Pt {
        return Err(UsageError("regime pt has no adaptation phase".into()).into());
    }
    let bench = load_bench(&c, false)?;
    let dir = c.out_dir()?;
    let (store, model, graph) = load_run(&c, &bench, &dir.join("source.ckpt"))?;
    let cfg = MetaConfig {
        evolve_enabled: c.regime.plan().graph_evolving,
        ..c.meta.clone()
    };
    let out = adapt_to_target(&model, store, &graph, &bench.commonsense, &bench.target_adapt, &cfg)?;
    let ckpt = save_run(dir, "adapted", &out.params, &model, &out.graph, &c)?;
    out.log.write(&dir.join("adapt_log.jsonl"))?;
    println!(
        "{} adapted on {} dialogues, checkpoint {}",
        c.regime,
        bench.target_adapt.dialogues.len(),
        ckpt.display()
    );
    Ok(())
}

pub fn eval(path: &Path, o: &Overrides) -> Result<()> {
    let c = RunConfig::load(path, o)?;
    let bench = load_bench(&c, true)?;
    let dir = c.out_dir()?;
    let stem = if c.regime == Regime::Pt { "source" } else { "adapted" };
    let (store, model, graph) = load_run(&c, &bench, &dir.join(format!("{stem}.ckpt")))?;
    let mut report = evaluate(&store, &model, &graph, &bench.target_test)?;
    report.seed = Some(c.seed);
    write(&dir.join("report.json"), report.to_json())?;
    print!("{}", render_table(&[(c.regime.to_string(), &report)]));
    Ok(())
}

pub fn ablate(path: &Path, o: &Overrides) -> Result<()> {
    let c = RunConfig::load(path, o)?;
    let bench = load_bench(&c, true)?;
    let dir = c.out_dir()?;
    let grid = run_ablation(&bench, &c.model, &c.meta);
    write(&dir.join("ablation.json"), grid.to_json())?;
    print!("{}", grid.render());
    Ok(())
}

pub fn export_graph(a: &ExportArgs) -> Result<()> {
    let format: GraphFormat = a.format.parse()?;
    let bytes = fs::read(&a.graph).map_err(|e| UsageError(format!("cannot read graph {}: {e}", a.graph.display())))?;
    let graph = if bytes.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{') {
        import_json(&bytes)?
    } else {
        let text = String::from_utf8(bytes).map_err(|_| UsageError(format!("{} is not text", a.graph.display())))?;
        MetaKnowledgeGraph::from_commonsense(&parse_commonsense(&text)?)
    };
    let out = render_graph(&graph, format);
    match &a.out {
        Some(p) => write(p, out),
        None => {
            std::io::stdout().write_all(&out)?;
            Ok(())
        }
    }
}
