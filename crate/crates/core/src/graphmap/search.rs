use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{EdgeId, Graph, GraphError, NodeId, Path, Trip};

#[derive(Debug, Clone, PartialEq)]
pub struct ShortestPath {
    pub path: Path,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    cost: f64,
    node: NodeId,
}

impl Eq for HeapEntry {}

// Min-heap on cost, then node id.
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn check_weights(graph: &Graph, weights: &[f64]) -> Result<(), GraphError> {
    if weights.len() != graph.edge_count() {
        return Err(GraphError::WeightCount {
            expected: graph.edge_count(),
            got: weights.len(),
        });
    }
    match weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
        Some(edge) => Err(GraphError::InvalidWeight {
            edge,
            weight: weights[edge],
        }),
        None => Ok(()),
    }
}

/// Sum of `weights` along `path`, accumulated front to back.
///
/// Every trip and path cost in the crate goes through this helper so that the
/// same path always produces bit-identical totals.
pub fn path_cost(weights: &[f64], path: &Path) -> f64 {
    path.edges().iter().fold(0.0, |acc, &e| acc + weights[e])
}

/// Which end of the search is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    /// Paths from the root to every node.
    From,
    /// Paths from every node to the root.
    To,
}

/// Single-source (or single-target) shortest paths.
///
/// Among minimum-cost paths, the lexicographically smallest edge-id sequence
/// (read in travel order) is selected. The rule is exact for strictly positive
/// weights; with zero-weight edges it is best effort.
#[derive(Debug, Clone)]
pub struct ShortestPathTree {
    root: NodeId,
    direction: Direction,
    dist: Vec<f64>,
    /// `From`: edge entering the node. `To`: edge leaving the node.
    link: Vec<Option<EdgeId>>,
}

impl ShortestPathTree {
    /// Shortest paths from `src` to every node.
    pub fn from_source(graph: &Graph, weights: &[f64], src: NodeId) -> Result<Self, GraphError> {
        check_weights(graph, weights)?;
        Ok(forward_search(graph, weights, src, None))
    }

    /// Shortest paths from every node to `dst`.
    pub fn to_target(graph: &Graph, weights: &[f64], dst: NodeId) -> Result<Self, GraphError> {
        check_weights(graph, weights)?;
        Ok(backward_search(graph, weights, dst))
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    /// Search cost to or from `v`; infinite when disconnected.
    pub fn distance(&self, v: NodeId) -> f64 {
        self.dist[v]
    }

    pub fn reaches(&self, v: NodeId) -> bool {
        self.dist[v].is_finite()
    }

    /// Path between the root and `v` in travel order.
    pub fn path(&self, graph: &Graph, v: NodeId) -> Option<Path> {
        if !self.reaches(v) {
            return None;
        }
        let mut edges = Vec::new();
        let mut at = v;
        while at != self.root {
            let e = self.link[at].expect("reached node has a tree link");
            edges.push(e);
            at = match self.direction {
                Direction::From => graph.edge(e).from,
                Direction::To => graph.edge(e).to,
            };
        }
        if self.direction == Direction::From {
            edges.reverse();
        }
        Some(Path(edges))
    }
}

fn prefix_sequence(graph: &Graph, link: &[Option<EdgeId>], root: NodeId, v: NodeId) -> Vec<EdgeId> {
    let mut seq = Vec::new();
    let mut at = v;
    while at != root {
        let e = link[at].expect("labelled node has a predecessor");
        seq.push(e);
        at = graph.edge(e).from;
    }
    seq.reverse();
    seq
}

fn forward_search(graph: &Graph, weights: &[f64], src: NodeId, stop_at: Option<NodeId>) -> ShortestPathTree {
    let n = graph.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut link: Vec<Option<EdgeId>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(HeapEntry { cost: 0.0, node: src });

    while let Some(HeapEntry { cost, node: u }) = heap.pop() {
        if settled[u] || cost > dist[u] {
            continue;
        }
        settled[u] = true;
        if stop_at == Some(u) {
            break;
        }
        for &e in graph.out_edges(u) {
            let v = graph.edge(e).to;
            if settled[v] {
                continue;
            }
            let candidate = cost + weights[e];
            if candidate < dist[v] {
                dist[v] = candidate;
                link[v] = Some(e);
                heap.push(HeapEntry { cost: candidate, node: v });
            } else if candidate == dist[v] && v != src {
                // Equal cost: keep the lexicographically smaller edge sequence.
                let mut challenger = prefix_sequence(graph, &link, src, u);
                challenger.push(e);
                let incumbent = prefix_sequence(graph, &link, src, v);
                if challenger < incumbent {
                    link[v] = Some(e);
                }
            }
        }
    }
    ShortestPathTree {
        root: src,
        direction: Direction::From,
        dist,
        link,
    }
}

// Searching backwards from the target, a node's path is its first edge followed
// by an already-final suffix, so on equal cost the smaller first edge id decides.
fn backward_search(graph: &Graph, weights: &[f64], dst: NodeId) -> ShortestPathTree {
    let n = graph.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut link: Vec<Option<EdgeId>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[dst] = 0.0;
    heap.push(HeapEntry { cost: 0.0, node: dst });

    while let Some(HeapEntry { cost, node: u }) = heap.pop() {
        if settled[u] || cost > dist[u] {
            continue;
        }
        settled[u] = true;
        for &e in graph.in_edges(u) {
            let v = graph.edge(e).from;
            if settled[v] {
                continue;
            }
            let candidate = weights[e] + cost;
            let better = candidate < dist[v]
                || (candidate == dist[v] && link[v].is_some_and(|cur| e < cur));
            if better {
                dist[v] = candidate;
                link[v] = Some(e);
                heap.push(HeapEntry { cost: candidate, node: v });
            }
        }
    }
    ShortestPathTree {
        root: dst,
        direction: Direction::To,
        dist,
        link,
    }
}

/// Minimum-weight path from `src` to `dst`, or `None` when unreachable.
///
/// Ties are broken by the lexicographically smallest edge-id sequence. The
/// returned cost is [`path_cost`] of the returned path.
pub fn shortest_path(
    graph: &Graph,
    weights: &[f64],
    src: NodeId,
    dst: NodeId,
) -> Result<Option<ShortestPath>, GraphError> {
    check_weights(graph, weights)?;
    if src == dst {
        return Ok(Some(ShortestPath {
            path: Path::empty(),
            cost: 0.0,
        }));
    }
    let tree = forward_search(graph, weights, src, Some(dst));
    Ok(tree.path(graph, dst).map(|path| ShortestPath {
        cost: path_cost(weights, &path),
        path,
    }))
}

/// Cheapest cycle through a destination: outbound under one weight vector,
/// homebound under another.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrip {
    pub trip: Trip,
    pub outbound_cost: f64,
    pub homebound_cost: f64,
}

impl RoundTrip {
    pub fn cost(&self) -> f64 {
        self.outbound_cost + self.homebound_cost
    }
}

/// Cheapest round trip from the base to every node, indexed by node id.
///
/// Entries are `None` for the base and for nodes lacking an outbound or
/// homebound path.
pub fn cheapest_round_trips(
    graph: &Graph,
    outbound_weights: &[f64],
    homebound_weights: &[f64],
) -> Result<Vec<Option<RoundTrip>>, GraphError> {
    let out = ShortestPathTree::from_source(graph, outbound_weights, graph.base())?;
    let back = ShortestPathTree::to_target(graph, homebound_weights, graph.base())?;
    Ok((0..graph.node_count())
        .map(|v| {
            if v == graph.base() {
                return None;
            }
            let outbound = out.path(graph, v)?;
            let homebound = back.path(graph, v)?;
            Some(RoundTrip {
                outbound_cost: path_cost(outbound_weights, &outbound),
                homebound_cost: path_cost(homebound_weights, &homebound),
                trip: Trip::new(v, outbound, homebound),
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphmap::EdgeSpec;

    fn graph_from(n: usize, pairs: &[(usize, usize)]) -> Graph {
        let pos: Vec<(f64, f64)> = (0..n).map(|i| (i as f64, (i * i) as f64)).collect();
        let edges: Vec<EdgeSpec> = pairs
            .iter()
            .map(|&(from, to)| EdgeSpec { from, to, length: 1.0 })
            .collect();
        Graph::new(&pos, &edges, 0, []).unwrap()
    }

    #[test]
    fn trivial_and_two_routes() {
        let g = graph_from(3, &[(0, 1), (1, 2), (0, 2)]);
        let w = [1.0, 1.0, 3.0];
        let same = shortest_path(&g, &w, 1, 1).unwrap().unwrap();
        assert!(same.path.is_empty());
        assert_eq!(same.cost, 0.0);
        let sp = shortest_path(&g, &w, 0, 2).unwrap().unwrap();
        assert_eq!(sp.path, Path(vec![0, 1]));
        assert_eq!(sp.cost, 2.0);
        assert!(shortest_path(&g, &w, 2, 0).unwrap().is_none());
    }

    #[test]
    fn rejects_bad_weights() {
        let g = graph_from(2, &[(0, 1)]);
        assert!(matches!(
            shortest_path(&g, &[-1.0], 0, 1),
            Err(GraphError::InvalidWeight { edge: 0, .. })
        ));
        assert!(shortest_path(&g, &[f64::NAN], 0, 1).is_err());
        assert!(shortest_path(&g, &[], 0, 1).is_err());
    }

    #[test]
    fn lexicographic_ties() {
        // Node 1 settles before node 2, so node 3 is first labelled via [e1, e2];
        // the later equal-cost route [e0, e3] is smaller and must win.
        //   e0: 0→2, e1: 0→1, e2: 1→3, e3: 2→3
        let g = graph_from(4, &[(0, 2), (0, 1), (1, 3), (2, 3)]);
        let w = [1.0; 4];
        let sp = shortest_path(&g, &w, 0, 3).unwrap().unwrap();
        assert_eq!(sp.path, Path(vec![0, 3]));

        // A 3-hop route and a 1-hop route of equal cost: [e0, e1, e2] < [e3].
        let g = graph_from(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]);
        let w = [1.0, 1.0, 1.0, 3.0];
        let sp = shortest_path(&g, &w, 0, 3).unwrap().unwrap();
        assert_eq!(sp.path, Path(vec![0, 1, 2]));
        let back = ShortestPathTree::to_target(&g, &w, 3).unwrap();
        assert_eq!(back.path(&g, 0), Some(Path(vec![0, 1, 2])));
    }

    #[test]
    fn backward_tree_tie_uses_first_edge() {
        // 0→1→3 and 0→2→3, both cost 2; the forward order [e0, e2] beats [e1, e3].
        //   e0: 0→1, e1: 0→2, e2: 1→3, e3: 2→3
        let g = graph_from(4, &[(0, 1), (0, 2), (1, 3), (2, 3)]);
        let w = [1.0; 4];
        let back = ShortestPathTree::to_target(&g, &w, 3).unwrap();
        assert_eq!(back.path(&g, 0), Some(Path(vec![0, 2])));
        let fwd = ShortestPathTree::from_source(&g, &w, 0).unwrap();
        assert_eq!(fwd.path(&g, 3), Some(Path(vec![0, 2])));
        assert_eq!(shortest_path(&g, &w, 0, 3).unwrap().unwrap().path, Path(vec![0, 2]));
    }
}
