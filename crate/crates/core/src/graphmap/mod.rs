//! Directed map graph, map generators and importers, and shortest-path search.
//!
//! A [`Graph`] is immutable after construction. Every constructor funnels
//! through [`Graph::new`], which enforces the structural invariants: node ids
//! are contiguous, there are no self-loops or parallel edges, the base is not a
//! destination, and the graph is weakly connected.

mod generate;
mod io;
mod osm;
mod search;

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::num::wrap_angle;

pub use generate::{generate_grid_map, generate_random_map};
pub(crate) use io::format_float;
pub use io::{load_map, to_json};
pub use osm::{bounds_from_extract, import_road_network, BoundingBox, RoadImport};
pub use search::{
    cheapest_round_trips, path_cost, shortest_path, RoundTrip, ShortestPath, ShortestPathTree,
};

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("map parse error: {0}")]
    Parse(String),
    #[error("invalid map: {0}")]
    Validation(String),
    #[error("edge {edge} has invalid weight {weight} (weights must be finite and non-negative)")]
    InvalidWeight { edge: EdgeId, weight: f64 },
    #[error("weight vector has {got} entries, graph has {expected} edges")]
    WeightCount { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("road extract produced no usable graph: {0}")]
    EmptyResult(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectedEdge {
    pub id: EdgeId,
    pub from: NodeId,
    pub to: NodeId,
    /// Meters.
    pub length: f64,
    /// Radians clockwise from north, in `[0, 2π)`.
    pub bearing: f64,
}

/// Edge description used while building a graph; ids are positional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeSpec {
    pub from: NodeId,
    pub to: NodeId,
    pub length: f64,
}

/// Bearing of the segment `(x0, y0) → (x1, y1)`, clockwise from north (+y).
pub fn bearing(x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
    let (dx, dy) = (x1 - x0, y1 - y0);
    if dx == 0.0 && dy == 0.0 {
        return 0.0;
    }
    wrap_angle(dx.atan2(dy))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    nodes: Vec<Node>,
    edges: Vec<DirectedEdge>,
    base: NodeId,
    destinations: Vec<NodeId>,
    out_edges: Vec<Vec<EdgeId>>,
    in_edges: Vec<Vec<EdgeId>>,
    pair_index: HashMap<(NodeId, NodeId), EdgeId>,
}

impl Graph {
    /// Builds and validates a graph. Node `i` gets id `i`, edge `j` gets id `j`.
    pub fn new(
        positions: &[(f64, f64)],
        edges: &[EdgeSpec],
        base: NodeId,
        destinations: impl IntoIterator<Item = NodeId>,
    ) -> Result<Self, GraphError> {
        let invalid = |msg: String| Err(GraphError::Validation(msg));
        let n = positions.len();
        if n == 0 {
            return invalid("graph has no nodes".into());
        }
        if base >= n {
            return invalid(format!("base node {base} does not exist"));
        }
        let nodes: Vec<Node> = positions
            .iter()
            .enumerate()
            .map(|(id, &(x, y))| Node { id, x, y })
            .collect();
        if let Some(node) = nodes.iter().find(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return invalid(format!("node {} has a non-finite position", node.id));
        }

        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        let mut pair_index = HashMap::with_capacity(edges.len());
        let mut built = Vec::with_capacity(edges.len());
        for (id, spec) in edges.iter().enumerate() {
            if spec.from >= n || spec.to >= n {
                return invalid(format!("edge {id} references a missing node"));
            }
            if spec.from == spec.to {
                return invalid(format!("edge {id} is a self-loop on node {}", spec.from));
            }
            if !(spec.length.is_finite() && spec.length > 0.0) {
                return invalid(format!("edge {id} has non-positive length {}", spec.length));
            }
            if pair_index.insert((spec.from, spec.to), id).is_some() {
                return invalid(format!(
                    "duplicate edge {} -> {} (edge {id})",
                    spec.from, spec.to
                ));
            }
            let (a, b) = (nodes[spec.from], nodes[spec.to]);
            built.push(DirectedEdge {
                id,
                from: spec.from,
                to: spec.to,
                length: spec.length,
                bearing: bearing(a.x, a.y, b.x, b.y),
            });
            out_edges[spec.from].push(id);
            in_edges[spec.to].push(id);
        }

        let destinations: BTreeSet<NodeId> = destinations.into_iter().collect();
        if destinations.contains(&base) {
            return invalid("the base cannot be a destination".into());
        }
        if let Some(&d) = destinations.iter().find(|&&d| d >= n) {
            return invalid(format!("destination {d} does not exist"));
        }

        let graph = Graph {
            nodes,
            edges: built,
            base,
            destinations: destinations.into_iter().collect(),
            out_edges,
            in_edges,
            pair_index,
        };
        let components = graph.weak_components();
        if components.iter().any(|&c| c != 0) {
            return invalid("graph is not connected".into());
        }
        Ok(graph)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[DirectedEdge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn edge(&self, id: EdgeId) -> &DirectedEdge {
        &self.edges[id]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn base(&self) -> NodeId {
        self.base
    }

    /// Destination node ids in ascending order.
    pub fn destinations(&self) -> &[NodeId] {
        &self.destinations
    }

    pub fn is_destination(&self, v: NodeId) -> bool {
        self.destinations.binary_search(&v).is_ok()
    }

    /// Outgoing edge ids of `v`, ascending.
    pub fn out_edges(&self, v: NodeId) -> &[EdgeId] {
        &self.out_edges[v]
    }

    /// Incoming edge ids of `v`, ascending.
    pub fn in_edges(&self, v: NodeId) -> &[EdgeId] {
        &self.in_edges[v]
    }

    pub fn edge_between(&self, from: NodeId, to: NodeId) -> Option<EdgeId> {
        self.pair_index.get(&(from, to)).copied()
    }

    pub fn midpoint(&self, e: EdgeId) -> (f64, f64) {
        let edge = &self.edges[e];
        let (a, b) = (&self.nodes[edge.from], &self.nodes[edge.to]);
        (0.5 * (a.x + b.x), 0.5 * (a.y + b.y))
    }

    /// Component label per node when edge directions are ignored. Labels are
    /// assigned in order of the smallest node id they contain.
    pub(crate) fn weak_components(&self) -> Vec<usize> {
        weak_components(self.nodes.len(), self.edges.iter().map(|e| (e.from, e.to)))
    }

    /// Checks that `path` is a walk from `from` to `to`.
    pub fn is_walk(&self, path: &Path, from: NodeId, to: NodeId) -> bool {
        let mut at = from;
        for &e in path.edges() {
            match self.edges.get(e) {
                Some(edge) if edge.from == at => at = edge.to,
                _ => return false,
            }
        }
        at == to
    }

    /// Node sequence visited by a walk starting at `start`.
    pub fn walk_nodes(&self, start: NodeId, path: &Path) -> Vec<NodeId> {
        std::iter::once(start)
            .chain(path.edges().iter().map(|&e| self.edges[e].to))
            .collect()
    }
}

pub(crate) fn weak_components(n: usize, pairs: impl Iterator<Item = (usize, usize)>) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (a, b) in pairs {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut labels = vec![usize::MAX; n];
    let mut root_label = HashMap::new();
    for v in 0..n {
        let r = find(&mut parent, v);
        let next = root_label.len();
        labels[v] = *root_label.entry(r).or_insert(next);
    }
    labels
}

/// Ordered sequence of edge ids forming a walk.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path(pub Vec<EdgeId>);

impl Path {
    pub fn empty() -> Self {
        Path(Vec::new())
    }

    pub fn edges(&self) -> &[EdgeId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Path) -> Path {
        Path(self.0.iter().chain(&other.0).copied().collect())
    }
}

impl From<Vec<EdgeId>> for Path {
    fn from(v: Vec<EdgeId>) -> Self {
        Path(v)
    }
}

/// A delivery cycle: base → destination, then destination → base.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trip {
    pub dest: NodeId,
    pub outbound: Path,
    pub homebound: Path,
}

impl Trip {
    pub fn new(dest: NodeId, outbound: Path, homebound: Path) -> Self {
        Trip {
            dest,
            outbound,
            homebound,
        }
    }

    pub fn is_valid(&self, graph: &Graph) -> bool {
        graph.is_walk(&self.outbound, graph.base(), self.dest)
            && graph.is_walk(&self.homebound, self.dest, graph.base())
    }

    pub fn edge_count(&self) -> usize {
        self.outbound.len() + self.homebound.len()
    }
}
