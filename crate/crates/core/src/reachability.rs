//! Success probabilities and reachable sets.
//!
//! Unknown edge energies are independent Gaussians, so a path's unknown part
//! is Gaussian with summed mean and variance and its success probability is
//! `Φ((C − μ) / σ)`, where `C` is the budget left after the known edges.
//! A zero variance turns this into a step.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::beliefmodel::{EdgeTerm, EnergyBelief};
use crate::graphmap::{cheapest_round_trips, Graph, GraphError, NodeId, Path, Trip};
use crate::num::Real;
use crate::truthmodel::{edge_energies, Configuration, PhysicsConstants, TruthError};

/// Largest graph accepted by the exhaustive trip enumeration.
pub const EXACT_MAX_NODES: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReachError {
    #[error("exact reachability enumerates all simple trips and is limited to {EXACT_MAX_NODES} nodes (graph has {0})")]
    GraphTooLarge(usize),
    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Standard normal CDF.
pub fn normal_cdf<T: Real>(z: T) -> T {
    if z.is_nan() {
        return z;
    }
    T::lit(0.5) * (-z / T::SQRT_2()).erfc()
}

/// Inverse of [`normal_cdf`]; `0 ↦ -∞`, `1 ↦ +∞`.
pub fn normal_quantile<T: Real>(p: T) -> T {
    if p.is_nan() || p < T::zero() || p > T::one() {
        return T::nan();
    }
    if p == T::zero() {
        return T::neg_infinity();
    }
    if p == T::one() {
        return T::infinity();
    }
    if p > T::lit(0.5) {
        return -normal_quantile(T::one() - p);
    }
    // Rational starting point (relative error ~1e-9), then Halley steps on the
    // lower tail, where Φ(x) − p keeps full relative precision.
    let mut x = T::lit(acklam(p.as_f64()));
    let sqrt_2pi = (T::TAU()).sqrt();
    for _ in 0..3 {
        let e = normal_cdf(x) - p;
        let u = e * sqrt_2pi * (x * x / T::lit(2.0)).exp();
        let step = u / (T::one() + x * u / T::lit(2.0));
        if !step.is_finite() {
            break;
        }
        x = x - step;
    }
    x
}

/// Acklam's rational approximation for `p ∈ (0, 0.5]`.
fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    if p < 0.02425 {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Probability that known costs plus Gaussian unknowns fit in a budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessProbability<T = f64> {
    pub value: T,
    /// Summed mean of the unknown edges.
    pub mu_total: T,
    /// Summed variance of the unknown edges.
    pub sigma2_total: T,
    pub known_cost: T,
    /// Budget minus known cost.
    pub slack: T,
}

impl<T: Real> SuccessProbability<T> {
    pub fn evaluate(budget: T, known_cost: T, mu_total: T, sigma2_total: T) -> Self {
        let slack = budget - known_cost;
        let value = if sigma2_total > T::zero() {
            // A Gaussian tail never reaches 1, even when Φ rounds to it.
            normal_cdf((slack - mu_total) / sigma2_total.sqrt()).min(T::one() - T::epsilon())
        } else if mu_total <= slack {
            T::one()
        } else {
            T::zero()
        };
        SuccessProbability {
            value,
            mu_total,
            sigma2_total,
            known_cost,
            slack,
        }
    }

    /// Probability zero with no contributing edges.
    pub fn impossible() -> Self {
        SuccessProbability {
            value: T::zero(),
            mu_total: T::zero(),
            sigma2_total: T::zero(),
            known_cost: T::zero(),
            slack: T::zero(),
        }
    }
}

/// Known cost and unknown moments of a sequence of edges.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LegSums {
    pub known: f64,
    pub mu: f64,
    pub sigma2: f64,
}

impl LegSums {
    pub fn of(belief: &EnergyBelief, edges: &[usize]) -> Self {
        let mut s = LegSums::default();
        for &e in edges {
            match belief.term(e) {
                EdgeTerm::Known(v) => s.known += v,
                EdgeTerm::Unknown(mu, var) => {
                    s.mu += mu;
                    s.sigma2 += var;
                }
            }
        }
        s
    }

    /// Sums of an outbound and a homebound part. Each part is accumulated on
    /// its own first, matching how round-trip costs are computed elsewhere.
    pub fn combine(self, other: LegSums) -> LegSums {
        LegSums {
            known: self.known + other.known,
            mu: self.mu + other.mu,
            sigma2: self.sigma2 + other.sigma2,
        }
    }

    pub fn probability(&self, budget: f64) -> SuccessProbability {
        SuccessProbability::evaluate(budget, self.known, self.mu, self.sigma2)
    }
}

pub fn path_success_probability(belief: &EnergyBelief, path: &Path, budget: f64) -> SuccessProbability {
    LegSums::of(belief, path.edges()).probability(budget)
}

/// Outbound leg under `belief_l` (loaded), homebound leg under `belief_0`.
pub fn trip_success_probability(
    belief_l: &EnergyBelief,
    belief_0: &EnergyBelief,
    trip: &Trip,
    budget: f64,
) -> SuccessProbability {
    trip_sums(belief_l, belief_0, trip).probability(budget)
}

pub fn trip_sums(belief_l: &EnergyBelief, belief_0: &EnergyBelief, trip: &Trip) -> LegSums {
    LegSums::of(belief_l, trip.outbound.edges()).combine(LegSums::of(belief_0, trip.homebound.edges()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReachMode {
    /// Maximum over all simple trips; small graphs only.
    Exact,
    /// The trip made of the two mean-energy shortest paths.
    Surrogate,
    /// Exact up to [`EXACT_MAX_NODES`] nodes, surrogate beyond.
    Auto,
}

impl ReachMode {
    fn exact_for(self, graph: &Graph) -> Result<bool, ReachError> {
        match self {
            ReachMode::Exact if graph.node_count() > EXACT_MAX_NODES => {
                Err(ReachError::GraphTooLarge(graph.node_count()))
            }
            ReachMode::Exact => Ok(true),
            ReachMode::Surrogate => Ok(false),
            ReachMode::Auto => Ok(graph.node_count() <= EXACT_MAX_NODES),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachOutcome {
    pub probability: SuccessProbability,
    /// `None` when no trip exists.
    pub trip: Option<Trip>,
}

/// Mean-energy shortest trip to every node (outbound under `belief_l`,
/// homebound under `belief_0`), indexed by node.
pub fn surrogate_trips(
    graph: &Graph,
    belief_l: &EnergyBelief,
    belief_0: &EnergyBelief,
) -> Result<Vec<Option<Trip>>, GraphError> {
    let trips = cheapest_round_trips(graph, &belief_l.mean_weights(), &belief_0.mean_weights())?;
    Ok(trips.into_iter().map(|t| t.map(|t| t.trip)).collect())
}

struct LegCandidate {
    path: Vec<usize>,
    sums: LegSums,
}

fn simple_paths(graph: &Graph, from: NodeId, to: NodeId, belief: &EnergyBelief) -> Vec<LegCandidate> {
    fn dfs(
        graph: &Graph,
        at: NodeId,
        to: NodeId,
        belief: &EnergyBelief,
        on_path: &mut Vec<bool>,
        stack: &mut Vec<usize>,
        out: &mut Vec<LegCandidate>,
    ) {
        if at == to {
            out.push(LegCandidate {
                sums: LegSums::of(belief, stack),
                path: stack.clone(),
            });
            return;
        }
        for &e in graph.out_edges(at) {
            let next = graph.edge(e).to;
            if !on_path[next] {
                on_path[next] = true;
                stack.push(e);
                dfs(graph, next, to, belief, on_path, stack, out);
                stack.pop();
                on_path[next] = false;
            }
        }
    }
    let mut on_path = vec![false; graph.node_count()];
    on_path[from] = true;
    let mut out = Vec::new();
    dfs(graph, from, to, belief, &mut on_path, &mut Vec::new(), &mut out);
    out
}

/// Candidates that can be part of an optimal pair: the Pareto fronts of
/// (smaller mean, smaller variance) and (smaller mean, larger variance).
/// With a positive margin a smaller variance helps, with a negative one a
/// larger variance does; a smaller mean always helps.
fn pareto_candidates(mut legs: Vec<LegCandidate>) -> Vec<LegCandidate> {
    legs.sort_by(|a, b| {
        let (ma, mb) = (a.sums.known + a.sums.mu, b.sums.known + b.sums.mu);
        ma.total_cmp(&mb).then_with(|| a.path.cmp(&b.path))
    });
    let mut keep = vec![false; legs.len()];
    let (mut best_low, mut best_high) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, leg) in legs.iter().enumerate() {
        if leg.sums.sigma2 < best_low {
            best_low = leg.sums.sigma2;
            keep[i] = true;
        }
        if leg.sums.sigma2 > best_high {
            best_high = leg.sums.sigma2;
            keep[i] = true;
        }
    }
    legs.into_iter().zip(keep).filter(|(_, k)| *k).map(|(l, _)| l).collect()
}

fn exact_reach(
    graph: &Graph,
    belief_l: &EnergyBelief,
    belief_0: &EnergyBelief,
    dest: NodeId,
    budget: f64,
) -> ReachOutcome {
    let out = pareto_candidates(simple_paths(graph, graph.base(), dest, belief_l));
    let back = pareto_candidates(simple_paths(graph, dest, graph.base(), belief_0));
    let mut best: Option<(SuccessProbability, &LegCandidate, &LegCandidate)> = None;
    for o in &out {
        for r in &back {
            let p = o.sums.combine(r.sums).probability(budget);
            if best.as_ref().is_none_or(|(b, _, _)| p.value > b.value) {
                best = Some((p, o, r));
            }
        }
    }
    match best {
        Some((probability, o, r)) => ReachOutcome {
            probability,
            trip: Some(Trip::new(dest, Path(o.path.clone()), Path(r.path.clone()))),
        },
        None => ReachOutcome {
            probability: SuccessProbability::impossible(),
            trip: None,
        },
    }
}

fn surrogate_outcome(
    belief_l: &EnergyBelief,
    belief_0: &EnergyBelief,
    trip: Option<Trip>,
    budget: f64,
) -> ReachOutcome {
    match trip {
        Some(trip) => ReachOutcome {
            probability: trip_success_probability(belief_l, belief_0, &trip, budget),
            trip: Some(trip),
        },
        None => ReachOutcome {
            probability: SuccessProbability::impossible(),
            trip: None,
        },
    }
}

/// Best trip to `dest` and its success probability.
pub fn max_reach_probability(
    graph: &Graph,
    belief_l: &EnergyBelief,
    belief_0: &EnergyBelief,
    dest: NodeId,
    budget: f64,
    mode: ReachMode,
) -> Result<ReachOutcome, ReachError> {
    if mode.exact_for(graph)? {
        return Ok(exact_reach(graph, belief_l, belief_0, dest, budget));
    }
    let mut trips = surrogate_trips(graph, belief_l, belief_0)?;
    Ok(surrogate_outcome(belief_l, belief_0, trips[dest].take(), budget))
}

/// Destinations whose best trip succeeds with probability at least `phi`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReachableSet {
    pub members: BTreeSet<NodeId>,
    /// Best trip and probability of every destination that has a trip.
    pub best: BTreeMap<NodeId, (Trip, SuccessProbability)>,
}

impl ReachableSet {
    pub fn contains(&self, v: NodeId) -> bool {
        self.members.contains(&v)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

pub fn probabilistic_reachable_set(
    graph: &Graph,
    belief_l: &EnergyBelief,
    belief_0: &EnergyBelief,
    budget: f64,
    phi: f64,
    mode: ReachMode,
) -> Result<ReachableSet, ReachError> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(ReachError::InvalidThreshold(phi));
    }
    let exact = mode.exact_for(graph)?;
    let mut surrogate = if exact {
        Vec::new()
    } else {
        surrogate_trips(graph, belief_l, belief_0)?
    };
    let mut set = ReachableSet::default();
    for &dest in graph.destinations() {
        let outcome = if exact {
            exact_reach(graph, belief_l, belief_0, dest, budget)
        } else {
            surrogate_outcome(belief_l, belief_0, surrogate[dest].take(), budget)
        };
        if let Some(trip) = outcome.trip {
            if outcome.probability.value >= phi {
                set.members.insert(dest);
            }
            set.best.insert(dest, (trip, outcome.probability));
        }
    }
    Ok(set)
}

/// Destinations whose cheapest true round trip (outbound loaded, homebound
/// unloaded) costs at most `budget`.
pub fn true_reachable_set(
    graph: &Graph,
    constants: &PhysicsConstants,
    config: &Configuration,
    budget: f64,
) -> Result<BTreeSet<NodeId>, TruthError> {
    let out = edge_energies(graph, config, constants)?;
    let ret = edge_energies(graph, &config.unloaded(), constants)?;
    Ok(true_reachable_from_weights(graph, &out, &ret, budget)?)
}

/// [`true_reachable_set`] for precomputed edge energies.
pub fn true_reachable_from_weights(
    graph: &Graph,
    outbound: &[f64],
    homebound: &[f64],
    budget: f64,
) -> Result<BTreeSet<NodeId>, GraphError> {
    let trips = cheapest_round_trips(graph, outbound, homebound)?;
    Ok(graph
        .destinations()
        .iter()
        .copied()
        .filter(|&v| trips[v].as_ref().is_some_and(|t| t.cost() <= budget))
        .collect())
}
