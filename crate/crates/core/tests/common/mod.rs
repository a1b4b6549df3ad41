#![allow(dead_code)]

use dronereach::beliefmodel::{EdgeTerm, EnergyBelief};
use dronereach::graphmap::{EdgeId, EdgeSpec, Graph, NodeId};
use rand::Rng;
use std::collections::BTreeSet;

/// Strongly connected graph on `n` nodes: a random tree flown both ways plus
/// `extra` random one-way edges. Lengths are whole meters in 1..=9 so that
/// path costs are exact and ties are common.
pub fn random_graph(rng: &mut impl Rng, n: usize, extra: usize) -> Graph {
    let positions: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)))
        .collect();
    let mut pairs = BTreeSet::new();
    let mut order = Vec::new();
    let mut push = |from: usize, to: usize| {
        if from != to && pairs.insert((from, to)) {
            order.push((from, to));
        }
    };
    for v in 1..n {
        let u = rng.random_range(0..v);
        push(u, v);
        push(v, u);
    }
    for _ in 0..extra {
        push(rng.random_range(0..n), rng.random_range(0..n));
    }
    let edges: Vec<EdgeSpec> = order
        .into_iter()
        .map(|(from, to)| EdgeSpec {
            from,
            to,
            length: rng.random_range(1..=9) as f64,
        })
        .collect();
    Graph::new(&positions, &edges, 0, 1..n).unwrap()
}

/// Random per-edge weights in 1..=9.
pub fn random_weights(rng: &mut impl Rng, graph: &Graph) -> Vec<f64> {
    (0..graph.edge_count()).map(|_| rng.random_range(1..=9) as f64).collect()
}

/// Every simple path from `from` to `to`, as edge lists.
pub fn simple_paths(graph: &Graph, from: NodeId, to: NodeId) -> Vec<Vec<EdgeId>> {
    fn walk(g: &Graph, at: NodeId, to: NodeId, seen: &mut Vec<bool>, path: &mut Vec<EdgeId>, out: &mut Vec<Vec<EdgeId>>) {
        if at == to {
            out.push(path.clone());
            return;
        }
        for &e in g.out_edges(at) {
            let next = g.edge(e).to;
            if !seen[next] {
                seen[next] = true;
                path.push(e);
                walk(g, next, to, seen, path, out);
                path.pop();
                seen[next] = false;
            }
        }
    }
    let mut seen = vec![false; graph.node_count()];
    seen[from] = true;
    let mut out = Vec::new();
    walk(graph, from, to, &mut seen, &mut Vec::new(), &mut out);
    out
}

pub fn cost(weights: &[f64], edges: &[EdgeId]) -> f64 {
    edges.iter().map(|&e| weights[e]).sum()
}

/// Cheapest cost by exhaustive enumeration, `None` when unreachable.
pub fn brute_force_cost(graph: &Graph, weights: &[f64], from: NodeId, to: NodeId) -> Option<f64> {
    simple_paths(graph, from, to)
        .iter()
        .map(|p| cost(weights, p))
        .min_by(f64::total_cmp)
}

pub fn bellman_ford(graph: &Graph, weights: &[f64], src: NodeId) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; graph.node_count()];
    dist[src] = 0.0;
    for _ in 1..graph.node_count() {
        let mut changed = false;
        for e in graph.edges() {
            let d = dist[e.from] + weights[e.id];
            if d < dist[e.to] {
                dist[e.to] = d;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    dist
}

/// Belief in which each edge is unknown with probability `p_unknown`.
pub fn random_belief(rng: &mut impl Rng, graph: &Graph, p_unknown: f64) -> EnergyBelief {
    let terms: Vec<EdgeTerm> = (0..graph.edge_count())
        .map(|_| {
            let mu = rng.random_range(1.0..9.0);
            if rng.random_bool(p_unknown) {
                EdgeTerm::Unknown(mu, rng.random_range(0.01..4.0))
            } else {
                EdgeTerm::Known(mu)
            }
        })
        .collect();
    EnergyBelief::from_terms(0, &terms, 1.0)
}

/// Standard normal draw (Box-Muller).
pub fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Rejection-sampling estimate of `P(X + Y ≤ B | X > Δ)` from `accepted`
/// conditioned draws.
pub fn truncated_mc(rng: &mut impl Rng, mu: f64, s2: f64, delta: f64, mu_b: f64, s2_b: f64, budget: f64, accepted: usize) -> f64 {
    let (s, sb) = (s2.sqrt(), s2_b.sqrt());
    let (mut kept, mut hits) = (0usize, 0usize);
    while kept < accepted {
        let x = mu + s * gaussian(rng);
        if x <= delta {
            continue;
        }
        kept += 1;
        let y = mu_b + sb * gaussian(rng);
        hits += usize::from(x + y <= budget);
    }
    hits as f64 / kept as f64
}
