use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{generate_synthetic_corpus, Corpus, DiseaseSpec, SplitTag, SynthSpec, Vocabulary};
use crate::error::{Error, Result};
use crate::kgraph::{parse_commonsense, CommonsenseGraph, MetaKnowledgeGraph};
use crate::meta::{adapt_to_target, meta_train, pretrain_multitask, MetaConfig, TrainLog, TrainOutcome};
use crate::model::{init_params, Model, ModelConfig};
use crate::numcore::ParamStore;
use crate::rng;

use super::{evaluate, EvalReport};

/// Source corpus, target adaptation and test corpora, the (incomplete)
/// commonsense graph and the shared vocabulary.
#[derive(Clone, Debug)]
pub struct Benchmark {
    pub source: Corpus,
    pub target_adapt: Corpus,
    pub target_test: Corpus,
    pub commonsense: CommonsenseGraph,
    pub vocab: Vocabulary,
}

impl Benchmark {
    /// Vocabulary over the training corpora plus every graph node name.
    pub fn new(
        source: Corpus,
        target_adapt: Corpus,
        target_test: Corpus,
        commonsense: CommonsenseGraph,
    ) -> Result<Self> {
        let names: Vec<String> = commonsense.graph.nodes().iter().map(|n| n.name.clone()).collect();
        let vocab = Vocabulary::build_from(&[&source, &target_adapt], 1, names.iter().map(String::as_str))?;
        Ok(Self {
            source,
            target_adapt,
            target_test,
            commonsense,
            vocab,
        })
    }
}

/// Layout of a synthetic benchmark: the first `source_diseases` diseases
/// are source diseases, the rest are targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub diseases: Vec<DiseaseSpec>,
    pub source_diseases: usize,
    pub source_dialogues: usize,
    pub target_adapt_dialogues: usize,
    pub target_test_dialogues: usize,
    /// Share of true edges kept in the commonsense graph.
    pub keep_fraction: f64,
    pub turns_range: (usize, usize),
    pub mention_prob: f64,
    pub noise_rate: f64,
}

fn disease(name: &str, symptoms: [&str; 3], shared: &str) -> DiseaseSpec {
    DiseaseSpec {
        name: name.into(),
        symptoms: symptoms
            .iter()
            .map(|s| s.to_string())
            .chain([shared.to_string()])
            .collect(),
    }
}

impl BenchmarkSpec {
    /// Twelve diseases with three specific symptoms each plus one shared
    /// symptom; eight source diseases with 200 dialogues, four targets with
    /// 30 adaptation and 40 test dialogues; half the true edges known.
    pub fn standard() -> Self {
        let diseases = vec![
            disease("influenza", ["runny nose", "sore throat", "muscle ache"], "fever"),
            disease("bronchitis", ["wheezing", "chest tightness", "sputum"], "cough"),
            disease("gastritis", ["stomach pain", "bloating", "heartburn"], "nausea"),
            disease("anemia", ["pale skin", "cold hands", "brittle nails"], "fatigue"),
            disease("pneumonia", ["chest pain", "chills", "rapid breathing"], "fever"),
            disease("asthma", ["breathlessness", "night cough", "tight throat"], "cough"),
            disease(
                "migraine",
                ["headache", "light sensitivity", "blurred vision"],
                "nausea",
            ),
            disease("hypothyroidism", ["weight gain", "dry skin", "hair loss"], "fatigue"),
            disease("enteritis", ["diarrhea", "cramps", "loose stool"], "fever"),
            disease("pharyngitis", ["throat pain", "hoarseness", "swollen glands"], "cough"),
            disease("cholecystitis", ["right pain", "yellow eyes", "dark urine"], "nausea"),
            disease("diabetes", ["thirst", "frequent urination", "slow healing"], "fatigue"),
        ];
        Self {
            diseases,
            source_diseases: 8,
            source_dialogues: 200,
            target_adapt_dialogues: 30,
            target_test_dialogues: 40,
            keep_fraction: 0.5,
            turns_range: (1, 3),
            mention_prob: 0.8,
            noise_rate: 0.1,
        }
    }

    /// Model and training settings sized for the standard benchmark on one
    /// CPU core: width 16, Reptile with a unit inner rate over 2000 outer
    /// iterations, 12 pretraining epochs, 20 adaptation epochs.
    pub fn desk_configs(seed: u64) -> (ModelConfig, MetaConfig) {
        let model = ModelConfig {
            max_decode_len: 24,
            ..ModelConfig::with_dim(16)
        };
        let meta = MetaConfig {
            inner_rate: 1.0,
            outer_rate: 0.5,
            inner_steps: 3,
            task_batch_size: 4,
            outer_iterations: 2000,
            task_size: 4,
            validate_every: 50,
            validation_tasks: 8,
            pretrain_epochs: 12,
            adapt_epochs: 20,
            seed,
            ..MetaConfig::default()
        };
        (model, meta)
    }

    fn synth(&self, counts: Vec<usize>, split: SplitTag, prefix: &str) -> SynthSpec {
        SynthSpec {
            turns_range: self.turns_range,
            mention_prob: self.mention_prob,
            noise_rate: self.noise_rate,
            split,
            id_prefix: prefix.into(),
            ..SynthSpec::new(self.diseases.clone(), counts, 0)
        }
    }

    /// The three corpora and the commonsense triple file of a benchmark.
    pub fn generate(&self, seed: u64) -> Result<BenchmarkData> {
        if self.source_diseases == 0 || self.source_diseases >= self.diseases.len() {
            return Err(Error::Config("need at least one source and one target disease".into()));
        }
        let n = self.diseases.len();
        let per = |src: usize, tgt: usize| {
            (0..n)
                .map(|i| if i < self.source_diseases { src } else { tgt })
                .collect()
        };
        let r = &mut rng::stream(seed, "benchmark");
        let (s1, s2, s3, s4): (u64, u64, u64, u64) = (r.gen(), r.gen(), r.gen(), r.gen());
        Ok(BenchmarkData {
            source: generate_synthetic_corpus(
                &self.synth(per(self.source_dialogues, 0), SplitTag::Source, "src-"),
                s1,
            )?,
            target_adapt: generate_synthetic_corpus(
                &self.synth(per(0, self.target_adapt_dialogues), SplitTag::Target, "ada-"),
                s2,
            )?,
            target_test: generate_synthetic_corpus(
                &self.synth(per(0, self.target_test_dialogues), SplitTag::Target, "tst-"),
                s3,
            )?,
            commonsense_triples: crate::corpus::commonsense_triples(
                &self.synth(per(1, 1), SplitTag::Source, ""),
                self.keep_fraction,
                s4,
            )?,
        })
    }

    pub fn build(&self, seed: u64) -> Result<Benchmark> {
        let d = self.generate(seed)?;
        Benchmark::new(
            d.source,
            d.target_adapt,
            d.target_test,
            parse_commonsense(&d.commonsense_triples)?,
        )
    }
}

/// Raw benchmark artifacts as written to disk.
#[derive(Clone, Debug)]
pub struct BenchmarkData {
    pub source: Corpus,
    pub target_adapt: Corpus,
    pub target_test: Corpus,
    pub commonsense_triples: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Pt,
    Ft,
    Meta,
    Geml,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::Pt, Regime::Ft, Regime::Meta, Regime::Geml];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Pt => "pt",
            Regime::Ft => "ft",
            Regime::Meta => "meta",
            Regime::Geml => "geml",
        }
    }

    pub fn plan(self) -> Plan {
        let (meta_transfer, graph_evolving, adapt) = match self {
            Regime::Pt => (false, false, false),
            Regime::Ft => (false, false, true),
            Regime::Meta => (true, false, true),
            Regime::Geml => (true, true, true),
        };
        Plan {
            meta_transfer,
            graph_evolving,
            adapt,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pt" => Ok(Regime::Pt),
            "ft" => Ok(Regime::Ft),
            "meta" => Ok(Regime::Meta),
            "geml" => Ok(Regime::Geml),
            _ => Err(Error::Config(format!("unknown regime `{s}` (pt, ft, meta, geml)"))),
        }
    }
}

/// How a run trains: Reptile or pooled pretraining on the source diseases,
/// with or without graph evolution, then optionally target adaptation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub meta_transfer: bool,
    pub graph_evolving: bool,
    pub adapt: bool,
}

/// Everything a finished run produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub model: Model,
    pub params: ParamStore,
    pub graph: MetaKnowledgeGraph,
    pub log: TrainLog,
    pub report: EvalReport,
}

/// Initial parameters for a benchmark: the commonsense graph's nodes get
/// feature rows, everything is drawn from `meta.seed`.
pub fn initial_state(bench: &Benchmark, model_config: &ModelConfig, seed: u64) -> Result<(Model, ParamStore)> {
    let model = Model::new(model_config.clone(), bench.vocab.clone())?;
    let graph = MetaKnowledgeGraph::from_commonsense(&bench.commonsense);
    let params = init_params(model_config, &model.vocab, &graph, seed)?;
    Ok((model, params))
}

/// Source phase of a plan.
pub fn train_source(
    bench: &Benchmark,
    model: &Model,
    init: ParamStore,
    meta: &MetaConfig,
    plan: Plan,
) -> Result<TrainOutcome> {
    let cfg = MetaConfig {
        evolve_enabled: plan.graph_evolving,
        ..meta.clone()
    };
    if plan.meta_transfer {
        meta_train(model, init, &bench.source, &bench.commonsense, &cfg)
    } else {
        pretrain_multitask(model, init, &bench.source, &bench.commonsense, &cfg)
    }
}

/// Target phase of a plan followed by evaluation on the target test set.
pub fn finish_run(
    bench: &Benchmark,
    model: &Model,
    source: TrainOutcome,
    meta: &MetaConfig,
    plan: Plan,
) -> Result<RunOutput> {
    let cfg = MetaConfig {
        evolve_enabled: plan.graph_evolving,
        ..meta.clone()
    };
    let mut log = source.log;
    let (params, graph) = if plan.adapt {
        let out = adapt_to_target(
            model,
            source.params,
            &source.graph,
            &bench.commonsense,
            &bench.target_adapt,
            &cfg,
        )?;
        log.extend(out.log);
        (out.params, out.graph)
    } else {
        (source.params, source.graph)
    };
    let mut report = evaluate(&params, model, &graph, &bench.target_test)?;
    report.seed = Some(meta.seed);
    Ok(RunOutput {
        model: model.clone(),
        params,
        graph,
        log,
        report,
    })
}

pub fn run_plan(bench: &Benchmark, model_config: &ModelConfig, meta: &MetaConfig, plan: Plan) -> Result<RunOutput> {
    let (model, init) = initial_state(bench, model_config, meta.seed)?;
    let source = train_source(bench, &model, init, meta, plan)?;
    finish_run(bench, &model, source, meta, plan)
}

pub fn run_regime(
    bench: &Benchmark,
    model_config: &ModelConfig,
    meta: &MetaConfig,
    regime: Regime,
) -> Result<RunOutput> {
    run_plan(bench, model_config, meta, regime.plan())
}

/// Runs several regimes, training each distinct source phase once (PT and
/// FT share their pretraining).
pub fn run_regimes(
    bench: &Benchmark,
    model_config: &ModelConfig,
    meta: &MetaConfig,
    regimes: &[Regime],
) -> Result<Vec<(Regime, RunOutput)>> {
    let (model, init) = initial_state(bench, model_config, meta.seed)?;
    let mut cache: Vec<((bool, bool), TrainOutcome)> = Vec::new();
    let mut out = Vec::new();
    for &regime in regimes {
        let plan = regime.plan();
        let key = (plan.meta_transfer, plan.graph_evolving);
        let source = match cache.iter().find(|(k, _)| *k == key) {
            Some((_, s)) => s.clone(),
            None => {
                let s = train_source(bench, &model, init.clone(), meta, plan)?;
                cache.push((key, s.clone()));
                s
            }
        };
        out.push((regime, finish_run(bench, &model, source, meta, plan)?));
    }
    Ok(out)
}
