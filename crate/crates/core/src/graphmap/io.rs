//! JSON map files.
//!
//! ```json
//! {"nodes":[{"id":0,"x":0.0,"y":0.0},...],
//!  "edges":[{"id":0,"from":0,"to":1,"length":100.0},...],
//!  "base":0,"destinations":[1,...]}
//! ```
//!
//! Output is compact, keys appear in the order above, and floats carry nine
//! significant digits. On input `destinations` may be omitted, in which case
//! every non-base node is a destination. Node and edge ids may be arbitrary
//! distinct integers; they are renumbered to `0..n` in ascending id order.

use std::collections::HashMap;
use std::fmt::Write;

use serde::Deserialize;

use super::{EdgeSpec, Graph, GraphError};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
    base: i64,
    #[serde(default)]
    destinations: Option<Vec<i64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: i64,
    x: f64,
    y: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    id: i64,
    from: i64,
    to: i64,
    length: f64,
}

pub fn load_map(bytes: &[u8]) -> Result<Graph, GraphError> {
    let text = std::str::from_utf8(bytes).map_err(|e| GraphError::Parse(e.to_string()))?;
    let mut file: MapFile =
        serde_json::from_str(text).map_err(|e| GraphError::Parse(e.to_string()))?;

    file.nodes.sort_by_key(|n| n.id);
    let mut index = HashMap::with_capacity(file.nodes.len());
    for (i, node) in file.nodes.iter().enumerate() {
        if index.insert(node.id, i).is_some() {
            return Err(GraphError::Validation(format!("duplicate node id {}", node.id)));
        }
    }
    let lookup = |id: i64, what: &str| {
        index
            .get(&id)
            .copied()
            .ok_or_else(|| GraphError::Validation(format!("{what} references unknown node {id}")))
    };

    file.edges.sort_by_key(|e| e.id);
    if let Some(w) = file.edges.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(GraphError::Validation(format!("duplicate edge id {}", w[0].id)));
    }
    let edges = file
        .edges
        .iter()
        .map(|e| {
            Ok(EdgeSpec {
                from: lookup(e.from, "edge")?,
                to: lookup(e.to, "edge")?,
                length: e.length,
            })
        })
        .collect::<Result<Vec<_>, GraphError>>()?;

    let positions: Vec<(f64, f64)> = file.nodes.iter().map(|n| (n.x, n.y)).collect();
    let base = lookup(file.base, "base")?;
    let destinations = match &file.destinations {
        Some(ids) => ids
            .iter()
            .map(|&id| lookup(id, "destination"))
            .collect::<Result<Vec<_>, _>>()?,
        None => (0..positions.len()).filter(|&v| v != base).collect(),
    };
    Graph::new(&positions, &edges, base, destinations)
}

/// Float with nine significant digits, always carrying a decimal point or exponent.
pub(crate) fn format_float(out: &mut String, x: f64) {
    let rounded = crate::num::round_sig9(x);
    let start = out.len();
    write!(out, "{rounded}").expect("writing to a String cannot fail");
    if !out[start..].contains(['.', 'e', 'E', 'N', 'i']) {
        out.push_str(".0");
    }
}

pub fn to_json(graph: &Graph) -> String {
    let mut out = String::with_capacity(64 * (graph.node_count() + graph.edge_count()));
    out.push_str("{\"nodes\":[");
    for (i, node) in graph.nodes().iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(out, "{{\"id\":{},\"x\":", node.id).unwrap();
        format_float(&mut out, node.x);
        out.push_str(",\"y\":");
        format_float(&mut out, node.y);
        out.push('}');
    }
    out.push_str("],\"edges\":[");
    for (i, edge) in graph.edges().iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(out, "{{\"id\":{},\"from\":{},\"to\":{},\"length\":", edge.id, edge.from, edge.to)
            .unwrap();
        format_float(&mut out, edge.length);
        out.push('}');
    }
    write!(out, "],\"base\":{},\"destinations\":[", graph.base()).unwrap();
    for (i, d) in graph.destinations().iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(out, "{d}").unwrap();
    }
    out.push_str("]}");
    out
}
