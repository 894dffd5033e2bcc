mod common;

use std::collections::{BTreeMap, BTreeSet};

use geml_core::corpus::{generate_synthetic_corpus, DiseaseSpec, SynthSpec};
use geml_core::kgraph::{parse_commonsense, CommonsenseGraph, MetaKnowledgeGraph};
use geml_core::meta::{
    adapt_to_target, inner_adapt, make_tasks, meta_train, pretrain_multitask, reptile_outer, InstanceBank, LogEvent,
    MetaConfig,
};
use geml_core::model::{mean_loss, PreparedInstance};
use geml_core::numcore::{Gradients, ParamStore, Tape, Tensor};
use proptest::prelude::*;

fn spec(diseases: usize, per: usize, seed: u64) -> SynthSpec {
    let ds = (0..diseases)
        .map(|i| DiseaseSpec {
            name: format!("d{i}"),
            symptoms: vec![format!("s{i}a"), format!("s{i}b"), "fever".into()],
        })
        .collect();
    SynthSpec::new(ds, vec![per; diseases], seed)
}

fn quadratic(s: &ParamStore) -> geml_core::Result<(f64, Gradients)> {
    let id = s.id("theta")?;
    let mut t = Tape::new(s);
    let th = t.param(id);
    let one = t.input(Tensor::vector(vec![1.0]));
    let neg = t.scale(one, -1.0)?;
    let d = t.add(th, neg)?;
    let sq = t.mul(d, d)?;
    let sum = t.sum(sq)?;
    let l = t.scale(sum, 0.5)?;
    Ok((t.scalar(l), t.backward(l)?))
}

fn scalar_store(x: f64) -> ParamStore {
    let mut s = ParamStore::new();
    s.insert("theta", Tensor::vector(vec![x])).unwrap();
    s
}

fn random_store(seed: u64) -> ParamStore {
    let r = &mut geml_core::rng::stream(seed, "test");
    let mut s = ParamStore::new();
    s.insert("a", Tensor::uniform(&[3, 4], 2.0, r)).unwrap();
    s.insert("b", Tensor::uniform(&[5], 2.0, r)).unwrap();
    s
}

fn flat(s: &ParamStore) -> Vec<f64> {
    s.ids().flat_map(|id| s.value(id).data().to_vec()).collect()
}

#[test]
fn four_dialogues_make_one_even_task() {
    let corpus = generate_synthetic_corpus(&spec(1, 4, 1), 1).unwrap();
    let cfg = MetaConfig {
        task_size: 4,
        support_fraction: 0.5,
        ..Default::default()
    };
    let tasks = make_tasks(&corpus, &cfg, 0);
    assert_eq!(tasks.len(), 1);
    assert_eq!((tasks[0].support.len(), tasks[0].query.len()), (2, 2));
    assert_eq!(tasks, make_tasks(&corpus, &cfg, 0));
    assert_ne!(make_tasks(&corpus, &cfg, 0), make_tasks(&corpus, &cfg, 1));
}

#[test]
fn small_diseases_are_skipped() {
    let mut s = spec(2, 6, 2);
    s.dialogues_per_disease = vec![6, 3];
    let corpus = generate_synthetic_corpus(&s, 2).unwrap();
    let tasks = make_tasks(&corpus, &MetaConfig::default(), 0);
    assert!(tasks.iter().all(|t| t.disease == "d0"));
}

#[test]
fn every_dialogue_in_exactly_one_task_per_epoch() {
    for per in [20, 23] {
        let corpus = generate_synthetic_corpus(&spec(5, per, 3), 3).unwrap();
        for epoch in 0..3 {
            let tasks = make_tasks(&corpus, &MetaConfig::default(), epoch);
            let mut count: BTreeMap<&String, usize> = BTreeMap::new();
            for t in &tasks {
                for id in t.dialogues() {
                    *count.entry(id).or_default() += 1;
                }
            }
            assert_eq!(count.len(), corpus.dialogues.len());
            assert!(count.values().all(|&c| c == 1));
        }
    }
}

#[test]
fn inner_adaptation_matches_closed_form() {
    let s = scalar_store(0.0);
    for k in 1..=5 {
        let a = inner_adapt(&s, 0.1, k, quadratic).unwrap();
        let want = 1.0 - 0.9f64.powi(k as i32);
        assert!((a.value(a.id("theta").unwrap()).data()[0] - want).abs() <= 1e-12);
    }
    assert_eq!(flat(&s), vec![0.0]);
}

#[test]
fn reptile_endpoints_are_exact() {
    let theta = random_store(1);
    let ti = random_store(2);
    assert_eq!(flat(&reptile_outer(&theta, std::slice::from_ref(&ti), 1.0).unwrap()), flat(&ti));
    assert_eq!(
        flat(&reptile_outer(&theta, &[ti.clone(), random_store(3)], 0.0).unwrap()),
        flat(&theta)
    );
}

#[test]
fn reptile_two_tasks_match_direct_formula() {
    let (theta, a, b) = (random_store(4), random_store(5), random_store(6));
    let got = flat(&reptile_outer(&theta, &[a.clone(), b.clone()], 0.5).unwrap());
    let want: Vec<f64> = flat(&theta)
        .iter()
        .zip(flat(&a))
        .zip(flat(&b))
        .map(|((t, x), y)| 0.5 * t + 0.5 * ((x + y) / 2.0))
        .collect();
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() <= 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reptile_step_is_bounded(seed in 0u64..10_000, n in 1usize..5, gamma in 0.0f64..=1.0) {
        let theta = random_store(seed);
        let adapted: Vec<ParamStore> = (0..n).map(|i| random_store(seed + 1 + i as u64)).collect();
        let out = reptile_outer(&theta, &adapted, gamma).unwrap();
        let dist = |a: &ParamStore| flat(a).iter().zip(flat(&theta)).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let max = adapted.iter().map(dist).fold(0.0, f64::max);
        prop_assert!(dist(&out) <= gamma * max + 1e-12);
    }

    #[test]
    fn tasks_are_disjoint_single_disease(seed in 0u64..500, per in 4usize..12, size in 2usize..6, frac in 0.1f64..0.9) {
        let corpus = generate_synthetic_corpus(&spec(2, per, seed), seed).unwrap();
        let cfg = MetaConfig { task_size: size, support_fraction: frac, seed, ..Default::default() };
        let disease: BTreeMap<&String, &String> = corpus.dialogues.iter().map(|d| (&d.id, &d.disease)).collect();
        for t in make_tasks(&corpus, &cfg, 0) {
            prop_assert!(!t.support.is_empty() && !t.query.is_empty());
            let s: BTreeSet<_> = t.support.iter().collect();
            prop_assert!(t.query.iter().all(|q| !s.contains(q)));
            prop_assert!(t.dialogues().all(|id| disease[id] == &t.disease));
        }
    }
}

fn tiny_config(seed: u64) -> MetaConfig {
    MetaConfig {
        inner_rate: 0.05,
        outer_iterations: 6,
        task_batch_size: 2,
        validation_tasks: 0,
        pretrain_epochs: 2,
        adapt_epochs: 2,
        seed,
        ..Default::default()
    }
}

fn commonsense(w: &common::World) -> CommonsenseGraph {
    let triples = geml_core::corpus::commonsense_triples(&w.spec, 0.5, 21).unwrap();
    parse_commonsense(&triples).unwrap()
}

#[test]
fn no_evolution_keeps_the_commonsense_graph() {
    let w = common::world(21, 6, 4);
    let cs = commonsense(&w);
    let cfg = MetaConfig {
        evolve_enabled: false,
        ..tiny_config(21)
    };
    let out = meta_train(&w.model, w.store.clone(), &w.corpus, &cs, &cfg).unwrap();
    assert_eq!(out.graph, MetaKnowledgeGraph::from_commonsense(&cs));
    assert!(out.params.max_abs_diff(&w.store).unwrap() > 0.0);
}

#[test]
fn zero_outer_iterations_return_the_initialisation() {
    let w = common::world(22, 6, 4);
    let cfg = MetaConfig {
        outer_iterations: 0,
        ..tiny_config(22)
    };
    let out = meta_train(&w.model, w.store.clone(), &w.corpus, &commonsense(&w), &cfg).unwrap();
    assert_eq!(out.params, w.store);
}

#[test]
fn evolved_graph_matches_brute_force_after_one_epoch() {
    let w = common::world(23, 6, 4);
    let cs = commonsense(&w);
    let cfg = tiny_config(23);
    let tasks = make_tasks(&w.corpus, &cfg, 0).len();
    let cfg = MetaConfig {
        outer_iterations: tasks.div_ceil(cfg.task_batch_size),
        ..cfg
    };
    let out = meta_train(&w.model, w.store.clone(), &w.corpus, &cs, &cfg).unwrap();

    let mut want: BTreeSet<(String, String)> = cs.graph.named_edges().into_iter().collect();
    for d in &w.corpus.dialogues {
        let mut names: BTreeSet<String> = d
            .mentioned_entities()
            .iter()
            .map(|id| w.corpus.catalog.get(id).unwrap().name.clone())
            .collect();
        names.insert(w.corpus.catalog.get(&d.disease).unwrap().name.clone());
        let names: Vec<_> = names.into_iter().collect();
        for (i, a) in names.iter().enumerate() {
            for b in &names[i + 1..] {
                want.insert((a.clone(), b.clone()));
            }
        }
    }
    let got: BTreeSet<(String, String)> = out.graph.graph.named_edges().into_iter().collect();
    assert_eq!(got, want);

    let mut last = 0;
    for e in &out.log.events {
        if let LogEvent::Evolve { edges, .. } = e {
            assert!(*edges >= last);
            last = *edges;
        }
    }
    let rows = out
        .params
        .value(out.params.id(geml_core::kgraph::FEATURE_PARAM).unwrap())
        .rows();
    assert_eq!(rows, out.graph.len());
}

#[test]
fn meta_training_is_deterministic_and_uses_validation() {
    let w = common::world(24, 6, 6);
    let cs = commonsense(&w);
    let cfg = MetaConfig {
        validation_tasks: 2,
        validate_every: 2,
        patience: 2,
        outer_iterations: 8,
        ..tiny_config(24)
    };
    let a = meta_train(&w.model, w.store.clone(), &w.corpus, &cs, &cfg).unwrap();
    let b = meta_train(&w.model, w.store.clone(), &w.corpus, &cs, &cfg).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.log.to_jsonl(), b.log.to_jsonl());
    assert!(!a.log.validation_losses("meta").is_empty());
    for e in &a.log.events {
        if let LogEvent::Validation { patience, .. } = e {
            assert!(*patience <= cfg.patience);
        }
    }
}

fn train_loss(w: &common::World, params: &ParamStore, graph: &MetaKnowledgeGraph) -> f64 {
    let bank = InstanceBank::new(&w.corpus, &w.model.vocab).unwrap();
    let all: Vec<&PreparedInstance> = bank.gather(w.corpus.dialogues.iter().map(|d| &d.id));
    mean_loss(params, &w.model, graph, &all).unwrap()
}

#[test]
fn adaptation_contracts() {
    let w = common::world(25, 8, 5);
    let cs = commonsense(&w);
    let graph = MetaKnowledgeGraph::from_commonsense(&cs);
    let none = MetaConfig {
        adapt_epochs: 0,
        evolve_enabled: false,
        ..tiny_config(25)
    };
    let out = adapt_to_target(&w.model, w.store.clone(), &graph, &cs, &w.corpus, &none).unwrap();
    assert_eq!(out.params, w.store);

    let cfg = MetaConfig {
        adapt_epochs: 5,
        validation_fraction: 0.0,
        ..tiny_config(25)
    };
    let out = adapt_to_target(&w.model, w.store.clone(), &graph, &cs, &w.corpus, &cfg).unwrap();
    assert!(out.graph.graph.edge_count() >= graph.graph.edge_count());
    assert!(train_loss(&w, &out.params, &out.graph) < train_loss(&w, &w.store, &out.graph));

    let empty = w.corpus.subset(|_| false);
    assert!(adapt_to_target(&w.model, w.store.clone(), &graph, &cs, &empty, &cfg).is_err());
}

#[test]
fn pretraining_is_reproducible() {
    let w = common::world(26, 6, 4);
    let cs = commonsense(&w);
    let cfg = tiny_config(26);
    let a = pretrain_multitask(&w.model, w.store.clone(), &w.corpus, &cs, &cfg).unwrap();
    let b = pretrain_multitask(&w.model, w.store.clone(), &w.corpus, &cs, &cfg).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.graph, b.graph);
    assert!(a.log.losses("pretrain").len() > 1);
}
