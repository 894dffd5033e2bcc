mod common;

use std::collections::BTreeSet;

use geml_core::corpus::EntityKind;
use geml_core::kgraph::{augment, evolve, export_graph, import_json, CoOccurrenceGraph, GraphFormat};
use geml_core::rng;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use common::graphs::{brute_force, observe_all, random_world};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn evolved_adjacency_is_the_or_of_its_sources(seed in any::<u64>()) {
        let (corpus, cs) = random_world(seed);
        let co = observe_all(&corpus, corpus.dialogues.iter());
        let meta = evolve(&cs, &co, None).unwrap();
        prop_assert_eq!(meta.graph.named_edges(), brute_force(&corpus, &cs));
        let m = meta.graph.adjacency_matrix();
        for i in 0..m.len() {
            prop_assert!(!m[i][i]);
            for j in 0..m.len() {
                prop_assert_eq!(m[i][j], m[j][i]);
            }
        }
        prop_assert!(meta.graph.named_edges().is_superset(&cs.graph.named_edges()));
        prop_assert!(meta.graph.named_edges().is_superset(&co.graph.named_edges()));
        prop_assert_eq!(evolve(&cs, &co, Some(&meta)).unwrap(), meta);
    }

    #[test]
    fn observation_is_monotone_and_order_free(seed in any::<u64>()) {
        let (corpus, _) = random_world(seed);
        let mut g = CoOccurrenceGraph::new();
        let mut prev = BTreeSet::new();
        for d in &corpus.dialogues {
            g.observe_dialogue(d, &corpus.catalog).unwrap();
            let now = g.graph.named_edges();
            prop_assert!(now.is_superset(&prev));
            prev = now;
        }
        let mut shuffled: Vec<_> = corpus.dialogues.iter().collect();
        shuffled.shuffle(&mut rng::stream(seed, "order"));
        let other = observe_all(&corpus, shuffled.into_iter());
        prop_assert_eq!(other.graph.named_edges(), g.graph.named_edges());
        let names = |c: &CoOccurrenceGraph| c.graph.nodes().iter().map(|n| n.name.clone()).collect::<BTreeSet<_>>();
        prop_assert_eq!(names(&other), names(&g));
    }

    #[test]
    fn prior_nodes_keep_their_positions(seed in any::<u64>()) {
        let (corpus, cs) = random_world(seed);
        let half = corpus.dialogues.len() / 2;
        let first = observe_all(&corpus, corpus.dialogues[..half].iter());
        let m1 = evolve(&cs, &first, None).unwrap();
        let all = observe_all(&corpus, corpus.dialogues.iter());
        let m2 = evolve(&cs, &all, Some(&m1)).unwrap();
        for (i, n) in m1.graph.nodes().iter().enumerate() {
            prop_assert_eq!(&m2.graph.node(i).name, &n.name);
        }
        prop_assert!(m2.graph.named_edges().is_superset(&m1.graph.named_edges()));
    }

    #[test]
    fn cross_edges_equal_the_mention_relation(seed in any::<u64>()) {
        let (corpus, cs) = random_world(seed);
        let meta = evolve(&cs, &CoOccurrenceGraph::new(), None).unwrap();
        let r = &mut rng::stream(seed, "mentions");
        let names: Vec<String> = corpus.catalog.iter().map(|e| e.name.clone()).collect();
        let mentions: Vec<BTreeSet<String>> = (0..r.gen_range(1..6))
            .map(|_| names.iter().filter(|_| r.gen_bool(0.2)).cloned().collect())
            .collect();
        let g = augment(&meta, &mentions, vec![(); mentions.len()], |_| EntityKind::Symptom).unwrap();
        let expected: BTreeSet<(usize, String)> = mentions
            .iter()
            .enumerate()
            .flat_map(|(u, s)| s.iter().map(move |n| (u, n.clone())))
            .collect();
        let got: BTreeSet<(usize, String)> = g.cross_edges.iter().map(|&(u, e)| (u, g.entity(e).name.clone())).collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn json_export_round_trips(seed in any::<u64>()) {
        let (corpus, cs) = random_world(seed);
        let co = observe_all(&corpus, corpus.dialogues.iter());
        let meta = evolve(&cs, &co, None).unwrap();
        let bytes = export_graph(&meta, GraphFormat::Json);
        let back = import_json(&bytes).unwrap();
        prop_assert_eq!(back.graph.adjacency_matrix(), meta.graph.adjacency_matrix());
        prop_assert_eq!(&back, &meta);
        prop_assert_eq!(export_graph(&meta, GraphFormat::Dot), export_graph(&back, GraphFormat::Dot));
    }
}
