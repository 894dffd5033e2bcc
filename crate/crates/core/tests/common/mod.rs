#![allow(dead_code)]

pub mod graphs;
pub mod oracles;

use geml_core::corpus::{generate_synthetic_corpus, Corpus, DiseaseSpec, SynthSpec, Vocabulary};
use geml_core::kgraph::{parse_commonsense, MetaKnowledgeGraph};
use geml_core::model::{init_params, prepare_corpus, Model, ModelConfig, PreparedInstance};
use geml_core::numcore::ParamStore;

pub struct World {
    pub spec: SynthSpec,
    pub corpus: Corpus,
    pub graph: MetaKnowledgeGraph,
    pub model: Model,
    pub store: ParamStore,
    pub instances: Vec<PreparedInstance>,
}

pub fn diseases() -> Vec<DiseaseSpec> {
    let d = |n: &str, s: &[&str]| DiseaseSpec {
        name: n.into(),
        symptoms: s.iter().map(|x| x.to_string()).collect(),
    };
    vec![
        d("flu", &["fever", "cough", "sore throat"]),
        d("gastritis", &["nausea", "stomach pain", "fever"]),
        d("migraine", &["headache", "dizziness", "nausea"]),
    ]
}

/// A small corpus, a half-complete commonsense graph and fresh parameters.
pub fn world(seed: u64, dim: usize, per_disease: usize) -> World {
    world_with(
        seed,
        ModelConfig {
            max_decode_len: 12,
            ..ModelConfig::with_dim(dim)
        },
        per_disease,
    )
}

pub fn world_with(seed: u64, config: ModelConfig, per_disease: usize) -> World {
    let spec = SynthSpec::new(diseases(), vec![per_disease; 3], seed);
    let corpus = generate_synthetic_corpus(&spec, seed).unwrap();
    let triples = geml_core::corpus::commonsense_triples(&spec, 0.5, seed).unwrap();
    let graph = MetaKnowledgeGraph::from_commonsense(&parse_commonsense(&triples).unwrap());
    let vocab = Vocabulary::build(&corpus, 1).unwrap();
    let store = init_params(&config, &vocab, &graph, seed).unwrap();
    let instances = prepare_corpus(&corpus, &vocab).unwrap();
    World {
        spec,
        corpus,
        graph,
        model: Model::new(config, vocab).unwrap(),
        store,
        instances,
    }
}
