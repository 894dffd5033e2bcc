use std::collections::BTreeSet;

use super::{EntityNode, MetaKnowledgeGraph};
use crate::corpus::EntityKind;
use crate::error::{Error, Result};

/// A meta graph plus one node per context utterance, linked to the entities
/// that utterance mentions. Utterance nodes never link to each other.
///
/// Entities mentioned in the context but missing from the base graph are
/// attached after the base nodes, in first-mention order; they carry no
/// trainable feature row.
#[derive(Clone, Debug)]
pub struct AugmentedGraph<'a, V> {
    pub base: &'a MetaKnowledgeGraph,
    pub utterance_vectors: Vec<V>,
    pub attached: Vec<EntityNode>,
    /// `(utterance, entity node)` pairs.
    pub cross_edges: BTreeSet<(usize, usize)>,
}

impl<V> AugmentedGraph<'_, V> {
    /// Base nodes followed by attached nodes.
    pub fn entity_count(&self) -> usize {
        self.base.len() + self.attached.len()
    }

    pub fn entity(&self, i: usize) -> &EntityNode {
        let n = self.base.len();
        if i < n {
            self.base.graph.node(i)
        } else {
            &self.attached[i - n]
        }
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.base.graph.position(name).or_else(|| {
            self.attached
                .iter()
                .position(|e| e.name == name)
                .map(|k| self.base.len() + k)
        })
    }

    /// Utterances mentioning each entity node, in node order.
    pub fn mentioning_utterances(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.entity_count()];
        for &(u, e) in &self.cross_edges {
            out[e].push(u);
        }
        out
    }
}

/// Builds the augmented graph for one context. `mentions[i]` holds the
/// entity names of utterance `i`; `kind_of` classifies names missing from
/// the base graph.
pub fn augment<'a, V>(
    meta: &'a MetaKnowledgeGraph,
    mentions: &[BTreeSet<String>],
    utterance_vectors: Vec<V>,
    kind_of: impl Fn(&str) -> EntityKind,
) -> Result<AugmentedGraph<'a, V>> {
    if mentions.len() != utterance_vectors.len() {
        return Err(Error::Graph(format!(
            "{} utterance vectors for {} annotated utterances",
            utterance_vectors.len(),
            mentions.len()
        )));
    }
    let mut g = AugmentedGraph {
        base: meta,
        utterance_vectors,
        attached: Vec::new(),
        cross_edges: BTreeSet::new(),
    };
    for (u, names) in mentions.iter().enumerate() {
        for name in names {
            let node = match g.position(name) {
                Some(i) => i,
                None => {
                    let i = g.entity_count();
                    g.attached.push(EntityNode {
                        name: name.clone(),
                        kind: kind_of(name),
                        feature_index: i,
                    });
                    i
                }
            };
            g.cross_edges.insert((u, node));
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgraph::parse_commonsense;

    fn meta() -> MetaKnowledgeGraph {
        MetaKnowledgeGraph::from_commonsense(
            &parse_commonsense("node d1 disease\nnode s1 symptom\nedge d1 s1\n").unwrap(),
        )
    }

    #[test]
    fn mention_relation() {
        let m = meta();
        let g = augment(&m, &[["s1".to_string()].into(), BTreeSet::new()], vec![(), ()], |_| {
            EntityKind::Symptom
        })
        .unwrap();
        assert_eq!(g.cross_edges, [(0, 1)].into());
        assert!(g.attached.is_empty());
        let none = augment(&m, &[BTreeSet::new()], vec![()], |_| EntityKind::Symptom).unwrap();
        assert!(none.cross_edges.is_empty());
    }

    #[test]
    fn unknown_entities_are_attached_without_touching_base() {
        let m = meta();
        let before = m.clone();
        let g = augment(&m, &[["s7".to_string(), "s1".to_string()].into()], vec![()], |_| {
            EntityKind::Symptom
        })
        .unwrap();
        assert_eq!(g.entity_count(), 3);
        assert_eq!(g.entity(2).name, "s7");
        assert!(g.cross_edges.contains(&(0, 2)));
        assert_eq!(m, before);
        assert!(augment(&m, &[BTreeSet::new()], Vec::<()>::new(), |_| EntityKind::Symptom).is_err());
    }
}
