//! Accept/reject decisions and the trips to fly.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::beliefmodel::EnergyBelief;
use crate::graphmap::{cheapest_round_trips, Graph, GraphError, NodeId, Path, ShortestPathTree, Trip};
use crate::reachability::{trip_sums, LegSums};
use crate::truthmodel::Configuration;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Request {
    pub dest: NodeId,
    pub config: Configuration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Accept { trip: Trip, expanded: bool },
    Reject,
}

impl Decision {
    pub fn trip(&self) -> Option<&Trip> {
        match self {
            Decision::Accept { trip, .. } => Some(trip),
            Decision::Reject => None,
        }
    }

    pub fn is_accept(&self) -> bool {
        matches!(self, Decision::Accept { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyParams {
    /// Success-probability threshold.
    pub phi: f64,
    /// Budget inflation used in acceptance checks.
    pub alpha: f64,
    /// Probability of forcing a frontier expansion.
    pub beta: f64,
}

impl Default for StrategyParams {
    fn default() -> Self {
        StrategyParams {
            phi: 0.95,
            alpha: 0.0,
            beta: 0.05,
        }
    }
}

impl StrategyParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.phi) {
            return Err(format!("phi = {} is outside [0, 1]", self.phi));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(format!("alpha = {} must be >= 0", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(format!("beta = {} is outside [0, 1]", self.beta));
        }
        Ok(())
    }

    fn check_budget(&self, budget: f64) -> f64 {
        (1.0 + self.alpha) * budget
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    ShortestPath,
    Frontier,
    Optimal,
    Random,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::ShortestPath,
        StrategyKind::Frontier,
        StrategyKind::Optimal,
        StrategyKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::ShortestPath => "shortest-path",
            StrategyKind::Frontier => "frontier",
            StrategyKind::Optimal => "optimal",
            StrategyKind::Random => "random",
        }
    }

    /// Strategies that plan from learned beliefs.
    pub fn learns(self) -> bool {
        !matches!(self, StrategyKind::Optimal)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                format!("unknown strategy '{s}' (expected shortest-path, frontier, optimal or random)")
            })
    }
}

/// Mean-energy shortest-path trees: outbound from the base under the loaded
/// belief, homebound to the base under the unloaded one.
pub struct MeanTrees {
    outbound: ShortestPathTree,
    homebound: ShortestPathTree,
}

impl MeanTrees {
    pub fn new(graph: &Graph, belief_l: &EnergyBelief, belief_0: &EnergyBelief) -> Result<Self, GraphError> {
        Ok(MeanTrees {
            outbound: ShortestPathTree::from_source(graph, &belief_l.mean_weights(), graph.base())?,
            homebound: ShortestPathTree::to_target(graph, &belief_0.mean_weights(), graph.base())?,
        })
    }

    pub fn trip(&self, graph: &Graph, dest: NodeId) -> Option<Trip> {
        Some(Trip::new(
            dest,
            self.outbound.path(graph, dest)?,
            self.homebound.path(graph, dest)?,
        ))
    }
}

fn straight(
    graph: &Graph,
    trees: &MeanTrees,
    belief_l: &EnergyBelief,
    belief_0: &EnergyBelief,
    dest: NodeId,
    budget: f64,
    params: &StrategyParams,
) -> Option<(Trip, bool)> {
    let trip = trees.trip(graph, dest)?;
    let p = trip_sums(belief_l, belief_0, &trip).probability(params.check_budget(budget));
    let ok = p.value >= params.phi;
    Some((trip, ok))
}

/// Flies the mean-energy shortest trip if it succeeds with probability at
/// least `φ` under the inflated budget `(1 + α)·B`.
pub fn plan_shortest_path(
    graph: &Graph,
    belief_l: &EnergyBelief,
    belief_0: &EnergyBelief,
    request: &Request,
    budget: f64,
    params: &StrategyParams,
) -> Result<Decision, GraphError> {
    let trees = MeanTrees::new(graph, belief_l, belief_0)?;
    Ok(match straight(graph, &trees, belief_l, belief_0, request.dest, budget, params) {
        Some((trip, true)) => Decision::Accept { trip, expanded: false },
        _ => Decision::Reject,
    })
}

/// Shortest-path planning with frontier expansion.
///
/// With probability `1 − β` the straight trip is tried first. Otherwise, or
/// when it fails, a random in-neighbor `v_a` and out-neighbor `v_b` of the
/// destination are drawn; if the trip base → `v_a`, `v_b` → base passes the
/// check, the drone flies it with the detour `v_a → dest → v_b` inserted.
pub fn plan_frontier(
    graph: &Graph,
    belief_l: &EnergyBelief,
    belief_0: &EnergyBelief,
    request: &Request,
    budget: f64,
    params: &StrategyParams,
    rng: &mut impl Rng,
) -> Result<Decision, GraphError> {
    let dest = request.dest;
    let trees = MeanTrees::new(graph, belief_l, belief_0)?;
    let r: f64 = rng.random();
    if r >= params.beta {
        if let Some((trip, true)) = straight(graph, &trees, belief_l, belief_0, dest, budget, params) {
            return Ok(Decision::Accept { trip, expanded: false });
        }
    }

    let ins = graph.in_edges(dest);
    let outs = graph.out_edges(dest);
    if ins.is_empty() || outs.is_empty() {
        return Ok(Decision::Reject);
    }
    let attempts = ins.len().max(outs.len());
    for _ in 0..attempts {
        let into = ins[rng.random_range(0..ins.len())];
        let out_of = outs[rng.random_range(0..outs.len())];
        let (va, vb) = (graph.edge(into).from, graph.edge(out_of).to);
        let (Some(rho1), Some(rho2)) = (trees.outbound.path(graph, va), trees.homebound.path(graph, vb)) else {
            continue;
        };
        // The detour edges are left out of the check.
        let sums = LegSums::of(belief_l, rho1.edges()).combine(LegSums::of(belief_0, rho2.edges()));
        if sums.probability(params.check_budget(budget)).value < params.phi {
            return Ok(Decision::Reject);
        }
        let outbound = rho1.concat(&Path(vec![into]));
        let homebound = Path(vec![out_of]).concat(&rho2);
        return Ok(Decision::Accept {
            trip: Trip::new(dest, outbound, homebound),
            expanded: true,
        });
    }
    Ok(Decision::Reject)
}

/// Cheapest true trip, accepted iff it fits in the budget.
pub fn plan_optimal(
    graph: &Graph,
    true_outbound: &[f64],
    true_homebound: &[f64],
    request: &Request,
    budget: f64,
) -> Result<Decision, GraphError> {
    let trips = cheapest_round_trips(graph, true_outbound, true_homebound)?;
    Ok(match trips.into_iter().nth(request.dest).flatten() {
        Some(rt) if rt.cost() <= budget => Decision::Accept {
            trip: rt.trip,
            expanded: false,
        },
        _ => Decision::Reject,
    })
}

/// Hop count from every node to `target` (`usize::MAX` if unreachable).
pub fn hops_to(graph: &Graph, target: NodeId) -> Vec<usize> {
    let mut hops = vec![usize::MAX; graph.node_count()];
    hops[target] = 0;
    let mut queue = VecDeque::from([target]);
    while let Some(v) = queue.pop_front() {
        for &e in graph.in_edges(v) {
            let u = graph.edge(e).from;
            if hops[u] == usize::MAX {
                hops[u] = hops[v] + 1;
                queue.push_back(u);
            }
        }
    }
    hops
}

/// Random walk from `from` to `to` using at most `limit` hops, where `reserve`
/// further hops must remain available after arrival. Moves that make
/// progress toward `to` are three times as likely as the others; moves that
/// could not finish within the limit are never taken.
fn random_walk(
    graph: &Graph,
    hops: &[usize],
    from: NodeId,
    to: NodeId,
    limit: usize,
    reserve: usize,
    rng: &mut impl Rng,
) -> Option<(Path, usize)> {
    let mut at = from;
    let mut left = limit;
    let mut edges = Vec::new();
    let mut options: Vec<(usize, u32)> = Vec::new();
    while at != to {
        options.clear();
        for &e in graph.out_edges(at) {
            let next = graph.edge(e).to;
            if hops[next] != usize::MAX && hops[next] + reserve < left {
                options.push((e, if hops[next] < hops[at] { 3 } else { 1 }));
            }
        }
        let total: u32 = options.iter().map(|o| o.1).sum();
        if total == 0 {
            return None;
        }
        let mut pick = rng.random_range(0..total);
        let &(e, _) = options
            .iter()
            .find(|o| {
                if pick < o.1 {
                    true
                } else {
                    pick -= o.1;
                    false
                }
            })
            .expect("pick is below the total weight");
        edges.push(e);
        at = graph.edge(e).to;
        left -= 1;
    }
    Some((Path(edges), left))
}

/// Random round trip of at most `hop_limit` edges; rejected when even the
/// fewest-hop trip is longer.
pub fn plan_random(graph: &Graph, request: &Request, rng: &mut impl Rng, hop_limit: usize) -> Decision {
    let base = graph.base();
    let to_dest = hops_to(graph, request.dest);
    let to_base = hops_to(graph, base);
    let (out_min, back_min) = (to_dest[base], to_base[request.dest]);
    if out_min == usize::MAX || back_min == usize::MAX || out_min + back_min > hop_limit {
        return Decision::Reject;
    }
    let Some((outbound, left)) = random_walk(graph, &to_dest, base, request.dest, hop_limit, back_min, rng) else {
        return Decision::Reject;
    };
    let Some((homebound, _)) = random_walk(graph, &to_base, request.dest, base, left, 0, rng) else {
        return Decision::Reject;
    };
    Decision::Accept {
        trip: Trip::new(request.dest, outbound, homebound),
        expanded: false,
    }
}
