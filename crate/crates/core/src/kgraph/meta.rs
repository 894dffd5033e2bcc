use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CoOccurrenceGraph, CommonsenseGraph, Graph};
use crate::corpus::EntityKind;
use crate::error::{Error, Result};
use crate::numcore::{ParamStore, Tensor};
use crate::rng::Rng;

/// Name of the trainable node-feature matrix in a parameter store; row `i`
/// belongs to node `i` of the meta-knowledge graph.
pub const FEATURE_PARAM: &str = "graph.node_features";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeSource {
    Prior,
    Evolved,
}

/// The graph the reasoner runs on: commonsense edges OR co-occurrence edges.
/// Edges remember whether they came from the prior graph.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MetaKnowledgeGraph {
    pub graph: Graph,
    prior: BTreeSet<(usize, usize)>,
}

impl MetaKnowledgeGraph {
    pub fn from_commonsense(cs: &CommonsenseGraph) -> Self {
        Self {
            graph: cs.graph.clone(),
            prior: cs.graph.edges().collect(),
        }
    }

    pub(crate) fn from_parts(graph: Graph, prior: BTreeSet<(usize, usize)>) -> Self {
        Self { graph, prior }
    }

    pub fn len(&self) -> usize {
        self.graph.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.is_empty()
    }

    pub fn edge_source(&self, a: usize, b: usize) -> Option<EdgeSource> {
        let key = (a.min(b), a.max(b));
        if !self.graph.adjacent(a, b) {
            None
        } else if self.prior.contains(&key) {
            Some(EdgeSource::Prior)
        } else {
            Some(EdgeSource::Evolved)
        }
    }

    /// Adds an isolated node if the name is new.
    pub fn ensure_node(&mut self, name: &str, kind: EntityKind) -> Result<usize> {
        self.graph.add_node(name, kind)
    }

    /// SHA-256 over node order, kinds and edges, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for n in self.graph.nodes() {
            h.update(format!("node {} {}\n", n.name, n.kind.as_str()));
        }
        for (a, b) in self.graph.edges() {
            h.update(format!("edge {a} {b}\n"));
        }
        hex::encode(h.finalize())
    }
}

/// Element-wise OR of the commonsense adjacency, the co-occurrence adjacency
/// and, when given, a previous meta graph. Nodes of `prior` keep their
/// positions so their feature rows stay aligned; new nodes are appended.
pub fn evolve(
    commonsense: &CommonsenseGraph,
    coocc: &CoOccurrenceGraph,
    prior: Option<&MetaKnowledgeGraph>,
) -> Result<MetaKnowledgeGraph> {
    let (mut graph, mut prior_edges) = match prior {
        Some(p) => (p.graph.clone(), p.prior.clone()),
        None => (Graph::new(), BTreeSet::new()),
    };
    graph.merge(&commonsense.graph)?;
    for (a, b) in commonsense.graph.edges() {
        let x = graph.position(&commonsense.graph.node(a).name).expect("merged");
        let y = graph.position(&commonsense.graph.node(b).name).expect("merged");
        prior_edges.insert((x.min(y), x.max(y)));
    }
    graph.merge(&coocc.graph)?;
    Ok(MetaKnowledgeGraph::from_parts(graph, prior_edges))
}

/// Appends freshly initialised feature rows for nodes that have none yet,
/// creating the matrix on first use. Returns the number of rows added.
pub fn grow_features(
    store: &mut ParamStore,
    graph: &MetaKnowledgeGraph,
    dim: usize,
    bound: f64,
    rng: &mut Rng,
) -> Result<usize> {
    let n = graph.len();
    match store.id(FEATURE_PARAM).ok() {
        None => {
            store.insert(FEATURE_PARAM, Tensor::uniform(&[n, dim], bound, rng))?;
            Ok(n)
        }
        Some(id) => {
            let have = store.value(id).rows();
            if store.value(id).cols() != dim {
                return Err(Error::shape(
                    "grow_features",
                    format!("feature width {} != {dim}", store.value(id).cols()),
                ));
            }
            if have > n {
                return Err(Error::Graph(format!("graph has {n} nodes but {have} feature rows")));
            }
            if have < n {
                let rows = Tensor::uniform(&[n - have, dim], bound, rng);
                store.append_rows(id, &rows)?;
            }
            Ok(n - have)
        }
    }
}
