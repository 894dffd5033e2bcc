use std::fs;
use std::path::Path;

use super::Graph;
use crate::corpus::{canonical_name, EntityKind};
use crate::error::{Error, Result};

/// Prior disease-symptom graph loaded from a triple file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CommonsenseGraph {
    pub graph: Graph,
}

pub fn load_commonsense(path: impl AsRef<Path>) -> Result<CommonsenseGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_commonsense(&text)
}

/// Parses `node <name> <kind>` declarations and `edge <head> [relation] <tail>`
/// lines. `#` starts a comment. Edges may precede the nodes they name as long
/// as every node is declared somewhere in the file.
pub fn parse_commonsense(text: &str) -> Result<CommonsenseGraph> {
    let mut graph = Graph::new();
    let mut edges = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        let err = |message: String| Error::Parse { line, message };
        match fields.as_slice() {
            ["node", name, kind] => {
                let kind = EntityKind::parse(kind).ok_or_else(|| err(format!("unknown node kind `{kind}`")))?;
                graph
                    .add_node(&canonical_name(name), kind)
                    .map_err(|e| err(e.to_string()))?;
            }
            ["edge", head, tail] | ["edge", head, _, tail] => {
                edges.push((line, canonical_name(head), canonical_name(tail)));
            }
            _ => return Err(err(format!("unrecognised line `{body}`"))),
        }
    }
    for (line, head, tail) in edges {
        graph.add_edge_by_name(&head, &tail).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
    }
    Ok(CommonsenseGraph { graph })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_triple() {
        let g = parse_commonsense("node d1 disease\nnode s1 symptom\nedge d1 related_symptom s1\n")
            .unwrap()
            .graph;
        let m = g.adjacency_matrix();
        assert!(m[0][1] && m[1][0]);
    }

    #[test]
    fn duplicate_triples_collapse() {
        let g = parse_commonsense("node d1 disease\nnode s1 symptom\nedge d1 s1\nedge s1 d1 # again\n")
            .unwrap()
            .graph;
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn undeclared_node_and_kind_conflict() {
        let e = parse_commonsense("node d1 disease\nedge d1 s9\n").unwrap_err();
        assert!(e.to_string().contains("undeclared"), "{e}");
        assert!(parse_commonsense("node d1 disease\nnode d1 symptom\n").is_err());
        assert!(parse_commonsense("vertex d1\n").is_err());
    }
}
