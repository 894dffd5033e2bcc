use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{EdgeSource, Graph, MetaKnowledgeGraph};
use crate::corpus::EntityKind;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphFormat {
    Json,
    Dot,
}

impl FromStr for GraphFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(GraphFormat::Json),
            "dot" => Ok(GraphFormat::Dot),
            other => Err(Error::Config(format!("unsupported graph format `{other}`"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct NodeRecord {
    name: String,
    kind: EntityKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feature_index: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct ProvenanceRecord {
    edge: [usize; 2],
    source: EdgeSource,
}

#[derive(Serialize, Deserialize)]
struct GraphRecord {
    nodes: Vec<NodeRecord>,
    edges: Vec<[usize; 2]>,
    #[serde(default)]
    provenance: Vec<ProvenanceRecord>,
}

/// Positions of nodes when sorted by name, and the inverse map.
fn by_name(graph: &Graph) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..graph.len()).collect();
    order.sort_by(|&a, &b| graph.node(a).name.cmp(&graph.node(b).name));
    let mut rank = vec![0; graph.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    (order, rank)
}

/// Renders the graph with nodes ordered by name. Output is deterministic.
pub fn export_graph(meta: &MetaKnowledgeGraph, format: GraphFormat) -> Vec<u8> {
    let g = &meta.graph;
    let (order, rank) = by_name(g);
    let mut edges: Vec<(usize, usize, EdgeSource)> = g
        .edges()
        .map(|(a, b)| {
            let (x, y) = (rank[a].min(rank[b]), rank[a].max(rank[b]));
            (x, y, meta.edge_source(a, b).expect("edge exists"))
        })
        .collect();
    edges.sort_by_key(|&(x, y, _)| (x, y));
    match format {
        GraphFormat::Json => {
            let record = GraphRecord {
                nodes: order
                    .iter()
                    .map(|&i| NodeRecord {
                        name: g.node(i).name.clone(),
                        kind: g.node(i).kind,
                        feature_index: Some(g.node(i).feature_index),
                    })
                    .collect(),
                edges: edges.iter().map(|&(x, y, _)| [x, y]).collect(),
                provenance: edges
                    .iter()
                    .map(|&(x, y, source)| ProvenanceRecord { edge: [x, y], source })
                    .collect(),
            };
            let mut out = serde_json::to_vec_pretty(&record).expect("graph serializes");
            out.push(b'\n');
            out
        }
        GraphFormat::Dot => {
            let mut out = String::from("graph meta_knowledge {\n");
            for &i in &order {
                let n = g.node(i);
                let shape = match n.kind {
                    EntityKind::Disease => "box",
                    EntityKind::Symptom => "ellipse",
                };
                let _ = writeln!(out, "  \"{}\" [kind={}, shape={shape}];", n.name, n.kind.as_str());
            }
            for &(x, y, source) in &edges {
                let style = match source {
                    EdgeSource::Prior => "source=prior, style=solid",
                    EdgeSource::Evolved => "source=evolved, style=dashed, color=red",
                };
                let _ = writeln!(
                    out,
                    "  \"{}\" -- \"{}\" [{style}];",
                    g.node(order[x]).name,
                    g.node(order[y]).name
                );
            }
            out.push_str("}\n");
            out.into_bytes()
        }
    }
}

/// Reads a JSON export back. Nodes are restored to feature-row order when
/// the export carries `feature_index`, otherwise to file order.
pub fn import_json(bytes: &[u8]) -> Result<MetaKnowledgeGraph> {
    let record: GraphRecord = serde_json::from_slice(bytes)?;
    let n = record.nodes.len();
    let mut order: Vec<usize> = (0..n).collect();
    if record.nodes.iter().all(|r| r.feature_index.is_some()) {
        order.sort_by_key(|&i| record.nodes[i].feature_index);
        let expected: BTreeSet<usize> = (0..n).collect();
        let got: BTreeSet<usize> = record.nodes.iter().filter_map(|r| r.feature_index).collect();
        if got != expected {
            return Err(Error::Graph("feature_index values are not a permutation".into()));
        }
    }
    let mut graph = Graph::new();
    let mut pos = vec![0; n];
    for &i in &order {
        pos[i] = graph.add_node(&record.nodes[i].name, record.nodes[i].kind)?;
    }
    if graph.len() != n {
        return Err(Error::Graph("duplicate node names".into()));
    }
    let check = |[a, b]: [usize; 2]| -> Result<(usize, usize)> {
        if a >= n || b >= n {
            return Err(Error::Graph(format!("edge [{a}, {b}] out of range")));
        }
        Ok((pos[a], pos[b]))
    };
    for &e in &record.edges {
        let (a, b) = check(e)?;
        graph.add_edge(a, b)?;
    }
    let mut prior = BTreeSet::new();
    for p in &record.provenance {
        let (a, b) = check(p.edge)?;
        if p.source == EdgeSource::Prior {
            prior.insert((a.min(b), a.max(b)));
        }
    }
    Ok(MetaKnowledgeGraph::from_parts(graph, prior))
}
