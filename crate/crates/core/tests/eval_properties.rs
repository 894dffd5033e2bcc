mod common;

use std::collections::BTreeSet;

use geml_core::corpus::extract_instances;
use geml_core::corpus::DiseaseSpec;
use geml_core::eval::{
    bleu_n, bleu_sentence, entity_f1, evaluate, render_table, run_regime, run_toggles, BenchmarkSpec, Regime, Toggles,
};
use geml_core::meta::MetaConfig;
use geml_core::model::{generate, ModelConfig, PreparedInstance};
use proptest::prelude::*;
use rand::Rng;

use common::oracles::{fixed_pairs, oracle_bleu, oracle_f1};

#[test]
fn bleu_matches_clean_room_oracle_on_fixed_pairs() {
    for (h, r) in fixed_pairs() {
        let (a, b) = (bleu_sentence(&h, &r), oracle_bleu(&h, &r));
        assert!((a - b).abs() <= 1e-9, "{h:?} / {r:?}: {a} vs {b}");
    }
}

#[test]
fn entity_f1_matches_direct_formula() {
    let r = &mut geml_core::rng::stream(7, "f1-pairs");
    for _ in 0..1000 {
        let a: BTreeSet<u8> = (0..r.gen_range(0..6)).map(|_| r.gen_range(0..8)).collect();
        let b: BTreeSet<u8> = (0..r.gen_range(0..6)).map(|_| r.gen_range(0..8)).collect();
        assert_eq!(entity_f1(&a, &b), oracle_f1(&a, &b));
    }
}

proptest! {
    #[test]
    fn bleu_in_unit_interval_and_matches_oracle(
        h in prop::collection::vec(0u8..6, 0..12),
        r in prop::collection::vec(0u8..6, 1..12),
    ) {
        let h: Vec<String> = h.iter().map(|x| format!("w{x}")).collect();
        let r: Vec<String> = r.iter().map(|x| format!("w{x}")).collect();
        let b = bleu_sentence(&h, &r);
        prop_assert!((0.0..=1.0).contains(&b));
        prop_assert!((b - oracle_bleu(&h, &r)).abs() <= 1e-9);
        prop_assert_eq!(bleu_sentence(&r, &r), 1.0);
    }

    #[test]
    fn matching_continuation_never_lowers_bleu1(
        r in prop::collection::vec(0u8..5, 2..14),
        noise in prop::collection::vec(0u8..5, 14),
        flips in prop::collection::vec(any::<bool>(), 14),
        k in 1usize..13,
    ) {
        let r: Vec<String> = r.iter().map(|x| format!("w{x}")).collect();
        let k = k.min(r.len() - 1);
        let mut h: Vec<String> = (0..k).map(|i| if flips[i] { format!("w{}", noise[i]) } else { r[i].clone() }).collect();
        let before = bleu_n(&h, &r, 1);
        h.push(r[k].clone());
        prop_assert!(bleu_n(&h, &r, 1) >= before - 1e-15);
    }

    #[test]
    fn entity_f1_symmetric_and_one_iff_equal(
        a in prop::collection::btree_set(0u8..6, 1..5),
        b in prop::collection::btree_set(0u8..6, 1..5),
    ) {
        prop_assert_eq!(entity_f1(&a, &b), entity_f1(&b, &a));
        prop_assert_eq!(entity_f1(&a, &b) == 1.0, a == b);
    }
}

fn tiny_spec() -> BenchmarkSpec {
    let d = |n: &str, s: [&str; 3]| DiseaseSpec {
        name: n.into(),
        symptoms: s.iter().map(|x| x.to_string()).collect(),
    };
    BenchmarkSpec {
        diseases: vec![
            d("flu", ["fever", "cough", "sore throat"]),
            d("gastritis", ["nausea", "stomach pain", "fever"]),
            d("migraine", ["headache", "dizziness", "nausea"]),
            d("asthma", ["wheezing", "cough", "chest tightness"]),
        ],
        source_diseases: 2,
        source_dialogues: 8,
        target_adapt_dialogues: 4,
        target_test_dialogues: 3,
        ..BenchmarkSpec::standard()
    }
}

fn tiny_meta(seed: u64) -> MetaConfig {
    MetaConfig {
        inner_rate: 0.05,
        outer_iterations: 4,
        task_batch_size: 2,
        validation_tasks: 0,
        pretrain_epochs: 1,
        adapt_epochs: 1,
        seed,
        ..Default::default()
    }
}

#[test]
fn report_averages_are_means_of_disease_rows() {
    let bench = tiny_spec().build(3).unwrap();
    let run = run_regime(&bench, &ModelConfig::with_dim(6), &tiny_meta(3), Regime::Ft).unwrap();
    let r = &run.report;
    assert_eq!(r.diseases.len(), 2);
    let mean = |f: fn(&geml_core::eval::DiseaseScores) -> f64| r.diseases.iter().map(f).sum::<f64>() / 2.0;
    assert!((r.average.bleu - mean(|d| d.bleu)).abs() < 1e-12);
    assert!((r.average.entity_f1 - mean(|d| d.entity_f1)).abs() < 1e-12);
    assert!((r.average.generation_f1 - mean(|d| d.generation_f1)).abs() < 1e-12);
    assert_eq!(r.instances, r.diseases.iter().map(|d| d.instances).sum::<usize>());
    for d in r.diseases.iter().chain([&r.average]) {
        assert!((0.0..=100.0).contains(&d.bleu) && (0.0..=100.0).contains(&d.entity_f1));
    }
    let again = evaluate(&run.params, &run.model, &run.graph, &bench.target_test).unwrap();
    assert_eq!(
        serde_json::to_string(&again).unwrap(),
        serde_json::to_string(&{
            let mut x = r.clone();
            x.seed = None;
            x
        })
        .unwrap()
    );
    assert!(render_table(&[("ft".into(), r)]).contains("average"));

    let empty = bench.target_test.subset(|_| false);
    assert!(evaluate(&run.params, &run.model, &run.graph, &empty).is_err());
}

#[test]
fn report_matches_instancewise_recomputation() {
    let w = common::world(31, 8, 3);
    let r = evaluate(&w.store, &w.model, &w.graph, &w.corpus).unwrap();
    let mut per: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for d in &w.corpus.dialogues {
        for inst in extract_instances(d) {
            let p = PreparedInstance::new(&inst, &w.model.vocab, &w.corpus.catalog).unwrap();
            let g = generate(&w.store, &w.model, &w.graph, &p.context).unwrap();
            let s = (
                bleu_sentence(&g.tokens, &p.response_tokens),
                entity_f1(&g.entities, &p.gold),
            );
            match per.iter_mut().find(|(n, _)| *n == d.disease) {
                Some((_, v)) => v.push(s),
                None => per.push((d.disease.clone(), vec![s])),
            }
        }
    }
    assert_eq!(r.diseases.len(), per.len());
    for (row, (name, v)) in r.diseases.iter().zip(&per) {
        assert_eq!(&row.disease, name);
        assert_eq!(row.instances, v.len());
        let n = v.len() as f64;
        assert!((row.bleu - 100.0 * v.iter().map(|x| x.0).sum::<f64>() / n).abs() < 1e-9);
        assert!((row.entity_f1 - 100.0 * v.iter().map(|x| x.1).sum::<f64>() / n).abs() < 1e-9);
    }
}

#[test]
fn full_ablation_row_is_the_geml_regime() {
    let bench = tiny_spec().build(4).unwrap();
    let cfg = ModelConfig::with_dim(6);
    let meta = tiny_meta(4);
    let geml = run_regime(&bench, &cfg, &meta, Regime::Geml).unwrap();
    let full = run_toggles(&bench, &cfg, &meta, Toggles::ALL_ON).unwrap();
    assert_eq!(geml.params, full.params);
    assert_eq!(geml.report, full.report);
    let grid = Toggles::grid();
    assert_eq!(grid.len(), 5);
    for (label, t) in &grid[1..] {
        let off = [t.graph_reasoning, t.copy_mechanism, t.meta_transfer, t.graph_evolving];
        assert_eq!(off.iter().filter(|x| !**x).count(), 1, "{label}");
    }
}
