//! Disease-symptom graphs: the prior commonsense graph, the online
//! co-occurrence graph, their OR-merge into the meta-knowledge graph, and
//! per-instance augmentation with utterance nodes.

mod augment;
mod commonsense;
mod cooccur;
mod export;
mod meta;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::EntityKind;
use crate::error::{Error, Result};

pub use augment::{augment, AugmentedGraph};
pub use commonsense::{load_commonsense, parse_commonsense, CommonsenseGraph};
pub use cooccur::CoOccurrenceGraph;
pub use export::{export_graph, import_json, GraphFormat};
pub use meta::{evolve, grow_features, EdgeSource, MetaKnowledgeGraph, FEATURE_PARAM};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityNode {
    pub name: String,
    pub kind: EntityKind,
    /// Row of this node in the feature matrix.
    pub feature_index: usize,
}

/// Undirected simple graph over named entity nodes. Nodes keep insertion
/// order; edges are stored once as `(low, high)` index pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Graph {
    nodes: Vec<EntityNode>,
    index: BTreeMap<String, usize>,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a node, or returns the existing one if the name is known with
    /// the same kind.
    pub fn add_node(&mut self, name: &str, kind: EntityKind) -> Result<usize> {
        if let Some(&i) = self.index.get(name) {
            if self.nodes[i].kind != kind {
                return Err(Error::Graph(format!(
                    "node `{name}` declared as both {} and {}",
                    self.nodes[i].kind.as_str(),
                    kind.as_str()
                )));
            }
            return Ok(i);
        }
        let i = self.nodes.len();
        self.nodes.push(EntityNode {
            name: name.to_string(),
            kind,
            feature_index: i,
        });
        self.index.insert(name.to_string(), i);
        Ok(i)
    }

    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<bool> {
        let n = self.nodes.len();
        if a >= n || b >= n {
            return Err(Error::Graph(format!("edge ({a}, {b}) out of range for {n} nodes")));
        }
        if a == b {
            return Err(Error::Graph(format!("self-loop on `{}`", self.nodes[a].name)));
        }
        Ok(self.edges.insert((a.min(b), a.max(b))))
    }

    pub fn add_edge_by_name(&mut self, a: &str, b: &str) -> Result<bool> {
        let ia = self.require(a)?;
        let ib = self.require(b)?;
        self.add_edge(ia, ib)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::Graph(format!("undeclared node `{name}`")))
    }

    pub fn nodes(&self) -> &[EntityNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &EntityNode {
        &self.nodes[i]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        match (self.position(a), self.position(b)) {
            (Some(x), Some(y)) => self.adjacent(x, y),
            _ => false,
        }
    }

    /// Edges as `(low, high)` index pairs in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as sorted name pairs, independent of node order.
    pub fn named_edges(&self) -> BTreeSet<(String, String)> {
        self.edges
            .iter()
            .map(|&(a, b)| {
                let (x, y) = (&self.nodes[a].name, &self.nodes[b].name);
                if x <= y {
                    (x.clone(), y.clone())
                } else {
                    (y.clone(), x.clone())
                }
            })
            .collect()
    }

    /// Dense symmetric 0/1 matrix in node order.
    pub fn adjacency_matrix(&self) -> Vec<Vec<bool>> {
        let n = self.nodes.len();
        let mut m = vec![vec![false; n]; n];
        for &(a, b) in &self.edges {
            m[a][b] = true;
            m[b][a] = true;
        }
        m
    }

    /// Neighbor lists in node order.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for &(a, b) in &self.edges {
            out[a].push(b);
            out[b].push(a);
        }
        for l in &mut out {
            l.sort_unstable();
        }
        out
    }

    /// Copies every node and edge of `other` into `self`.
    pub(crate) fn merge(&mut self, other: &Graph) -> Result<()> {
        let map: Vec<usize> = other
            .nodes
            .iter()
            .map(|n| self.add_node(&n.name, n.kind))
            .collect::<Result<_>>()?;
        for &(a, b) in &other.edges {
            self.add_edge(map[a], map[b])?;
        }
        Ok(())
    }
}
