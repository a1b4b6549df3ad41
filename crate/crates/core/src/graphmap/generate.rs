use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{weak_components, EdgeSpec, Graph, GraphError, NodeId};
use crate::num::round_sig9;

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Node closest to `(cx, cy)`, lowest id on ties.
pub(crate) fn nearest_node(positions: &[(f64, f64)], cx: f64, cy: f64) -> NodeId {
    let mut best = (f64::INFINITY, 0);
    for (i, &p) in positions.iter().enumerate() {
        let d = distance(p, (cx, cy));
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// Builds a graph from symmetric node pairs; lengths are Euclidean and rounded
/// to the map-file precision so that save/load is lossless.
fn assemble(positions: &[(f64, f64)], pairs: &BTreeSet<(NodeId, NodeId)>, base: NodeId) -> Result<Graph, GraphError> {
    let edges: Vec<EdgeSpec> = pairs
        .iter()
        .map(|&(from, to)| EdgeSpec {
            from,
            to,
            length: round_sig9(distance(positions[from], positions[to])),
        })
        .collect();
    let destinations = (0..positions.len()).filter(|&v| v != base);
    Graph::new(positions, &edges, base, destinations)
}

/// Random geometric map: `n` uniform nodes in a `width × height` rectangle,
/// each linked in both directions to its `k` nearest neighbours.
///
/// If the neighbour graph falls apart, components are joined through their
/// closest node pairs until it is connected. The base is the node nearest the centre
/// and every other node is a destination.
pub fn generate_random_map(
    n: usize,
    width: f64,
    height: f64,
    k: usize,
    seed: u64,
) -> Result<Graph, GraphError> {
    if n == 0 || k == 0 || !(width > 0.0 && height > 0.0) {
        return Err(GraphError::InvalidArgument(format!(
            "random map needs n >= 1, k >= 1 and a positive area (n={n}, k={k}, {width}x{height})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let x: f64 = rng.random::<f64>() * width;
            let y: f64 = rng.random::<f64>() * height;
            (round_sig9(x), round_sig9(y))
        })
        .collect();

    let mut pairs = BTreeSet::new();
    let mut order: Vec<(f64, NodeId)> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend(
            (0..n)
                .filter(|&j| j != i && positions[j] != positions[i])
                .map(|j| (distance(positions[i], positions[j]), j)),
        );
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in order.iter().take(k) {
            pairs.insert((i, j));
            pairs.insert((j, i));
        }
    }

    loop {
        let labels = weak_components(n, pairs.iter().copied());
        let count = labels.iter().max().map_or(0, |m| m + 1);
        if count <= 1 {
            break;
        }
        // Join component 0 to the closest node outside it.
        let mut best: Option<(f64, NodeId, NodeId)> = None;
        for a in (0..n).filter(|&a| labels[a] == 0) {
            for b in (0..n).filter(|&b| labels[b] != 0) {
                let d = distance(positions[a], positions[b]);
                if d > 0.0 && best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, a, b));
                }
            }
        }
        let Some((_, a, b)) = best else {
            return Err(GraphError::Validation(
                "random map has coincident nodes that cannot be connected".into(),
            ));
        };
        pairs.insert((a, b));
        pairs.insert((b, a));
    }

    let base = nearest_node(&positions, width / 2.0, height / 2.0);
    assemble(&positions, &pairs, base)
}

/// Square mesh of `rows × cols` nodes spaced `edge_len` apart. Node
/// `r * cols + c` sits at `(c * edge_len, r * edge_len)`.
pub fn generate_grid_map(rows: usize, cols: usize, edge_len: f64) -> Result<Graph, GraphError> {
    if rows == 0 || cols == 0 || !(edge_len > 0.0) {
        return Err(GraphError::InvalidArgument(format!(
            "grid needs rows, cols >= 1 and a positive edge length ({rows}x{cols}, {edge_len})"
        )));
    }
    let id = |r: usize, c: usize| r * cols + c;
    let positions: Vec<(f64, f64)> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (c as f64 * edge_len, r as f64 * edge_len)))
        .map(|(x, y)| (round_sig9(x), round_sig9(y)))
        .collect();
    let mut pairs = BTreeSet::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                pairs.insert((id(r, c), id(r, c + 1)));
                pairs.insert((id(r, c + 1), id(r, c)));
            }
            if r + 1 < rows {
                pairs.insert((id(r, c), id(r + 1, c)));
                pairs.insert((id(r + 1, c), id(r, c)));
            }
        }
    }
    let cx = (cols - 1) as f64 * edge_len / 2.0;
    let cy = (rows - 1) as f64 * edge_len / 2.0;
    let base = nearest_node(&positions, cx, cy);
    assemble(&positions, &pairs, base)
}
