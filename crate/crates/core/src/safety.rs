//! Contingency planning: abort thresholds, backup paths and reserved energy.
//!
//! Before departure every outbound node `v` gets a threshold `Δ(v)`. A drone
//! standing at `v` having used more than `Δ(v)` is unlikely to finish the
//! trip and diverts to the backup path of `v`. A plan is only issued when the
//! trip and every backup succeed with probability at least `κ`, using a budget
//! from which `2·e_max` has been set aside for mid-edge retreats.

use thiserror::Error;

use crate::beliefmodel::EnergyBelief;
use crate::graphmap::{Graph, GraphError, NodeId, Path, ShortestPathTree, Trip};
use crate::num::Real;
use crate::reachability::{normal_cdf, normal_quantile, trip_sums, LegSums, SuccessProbability};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SafetyError {
    #[error("conditioning event has probability {0:e}; truncated distribution is empty")]
    EmptyConditioning(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Energy consumed so far `X ~ N(mu, sigma2)`, conditioned on `X > delta`,
/// followed by a backup path `Y ~ N(mu_backup, sigma2_backup)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationContext<T = f64> {
    pub mu: T,
    pub sigma2: T,
    pub delta: T,
    pub mu_backup: T,
    pub sigma2_backup: T,
    pub budget: T,
}

fn simpson<T: Real>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
    (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive<T: Real>(f: &impl Fn(T) -> T, a: T, b: T, fa: T, fm: T, fb: T, whole: T, tol: T, depth: u32) -> T {
    let two = T::lit(2.0);
    let m = (a + b) / two;
    let (lm, rm) = ((a + m) / two, (m + b) / two);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= T::lit(15.0) * tol {
        return left + right + diff / T::lit(15.0);
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / two, depth - 1) + adaptive(f, m, b, fm, frm, fb, right, tol / two, depth - 1)
}

fn integrate<T: Real>(f: &impl Fn(T) -> T, a: T, b: T, tol: T) -> T {
    if !(b > a) {
        return T::zero();
    }
    let (fa, fm, fb) = (f(a), f((a + b) / T::lit(2.0)), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// `P(X + Y ≤ B | X > Δ)`.
pub fn truncated_success_probability<T: Real>(ctx: &TruncationContext<T>) -> Result<T, SafetyError> {
    let zero = T::zero();
    let one = T::one();
    let slack = ctx.budget - ctx.mu_backup;
    let sigma_b = ctx.sigma2_backup.max(zero).sqrt();
    // P(Y ≤ r) for a residual budget r.
    let backup_fits = |r: T| {
        if sigma_b > zero {
            normal_cdf(r / sigma_b)
        } else if r >= zero {
            one
        } else {
            zero
        }
    };

    if !(ctx.sigma2 > zero) {
        if ctx.mu > ctx.delta {
            return Ok(backup_fits(slack - ctx.mu));
        }
        return Err(SafetyError::EmptyConditioning(0.0));
    }
    let sigma = ctx.sigma2.sqrt();
    let z0 = (ctx.delta - ctx.mu) / sigma;
    let tail = normal_cdf(-z0);
    if !(tail > T::lit(1e-12)) {
        return Err(SafetyError::EmptyConditioning(tail.as_f64()));
    }
    // X ≤ slack is the success region once Y is fixed at its mean.
    let z_star = (slack - ctx.mu) / sigma;
    if !(sigma_b > zero) {
        if z_star <= z0 {
            return Ok(zero);
        }
        return Ok(((tail - normal_cdf(-z_star)) / tail).max(zero).min(one));
    }

    let inv_sqrt_2pi = T::lit(0.398_942_280_401_432_7);
    let half = T::lit(0.5);
    let f = |z: T| inv_sqrt_2pi * (-half * z * z).exp() / tail * backup_fits(slack - ctx.mu - sigma * z);
    let upper = z0.max(zero) + T::lit(12.0);
    let tol = T::lit(1e-10);
    let value = if z_star > z0 && z_star < upper {
        integrate(&f, z0, z_star, tol) + integrate(&f, z_star, upper, tol)
    } else {
        integrate(&f, z0, upper, tol)
    };
    Ok(value.max(zero).min(one))
}

/// Sums over the rest of the trip from outbound position `position`
/// (the drone stands at the start of `trip.outbound[position]`).
pub fn remaining_sums(belief_l: &EnergyBelief, belief_0: &EnergyBelief, trip: &Trip, position: usize) -> LegSums {
    let rest = &trip.outbound.edges()[position.min(trip.outbound.len())..];
    LegSums::of(belief_l, rest).combine(LegSums::of(belief_0, trip.homebound.edges()))
}

/// Success probability of the remaining trip with `remaining_budget` left.
pub fn remaining_trip_probability(
    belief_l: &EnergyBelief,
    belief_0: &EnergyBelief,
    trip: &Trip,
    position: usize,
    remaining_budget: f64,
) -> SuccessProbability {
    remaining_sums(belief_l, belief_0, trip, position).probability(remaining_budget)
}

/// Most energy the drone may have used on arrival at `position` while the
/// rest of the trip still succeeds with probability at least `φ`.
pub fn compute_delta(
    belief_l: &EnergyBelief,
    belief_0: &EnergyBelief,
    trip: &Trip,
    position: usize,
    budget: f64,
    phi: f64,
) -> f64 {
    if phi <= 0.0 {
        return f64::INFINITY;
    }
    let s = remaining_sums(belief_l, belief_0, trip, position);
    if s.sigma2 > 0.0 {
        let q = normal_quantile(phi);
        budget - (q * s.sigma2.sqrt() + s.mu + s.known)
    } else {
        budget - (s.mu + s.known)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyParams {
    pub phi: f64,
    pub kappa: f64,
    /// Largest energy any single edge is expected to need.
    pub e_max: f64,
}

impl SafetyParams {
    pub fn validate(&self) -> Result<(), SafetyError> {
        if !(0.0..=1.0).contains(&self.phi) || !(0.0..=1.0).contains(&self.kappa) {
            return Err(SafetyError::InvalidArgument(format!(
                "phi = {} and kappa = {} must lie in [0, 1]",
                self.phi, self.kappa
            )));
        }
        if !(self.e_max > 0.0 && self.e_max.is_finite()) {
            return Err(SafetyError::InvalidArgument(format!("e_max = {} must be > 0", self.e_max)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafePlan {
    pub trip: Trip,
    /// Node at each outbound position (the start of each outbound edge).
    pub nodes: Vec<NodeId>,
    /// Backup path to base from each outbound position.
    pub backup: Vec<Path>,
    /// Success probability of each backup given an abort there; `None` when
    /// an abort at that position is numerically impossible.
    pub backup_probability: Vec<Option<f64>>,
    pub delta: Vec<f64>,
    pub reserved: f64,
    pub kappa: f64,
    /// Budget with the reserve removed.
    pub planning_budget: f64,
    pub trip_probability: f64,
}

/// Builds the contingency plan for `trip`, or `None` when the trip or one of
/// its backups falls below `κ`.
pub fn build_safe_trip(
    graph: &Graph,
    belief_l: &EnergyBelief,
    belief_0: &EnergyBelief,
    trip: &Trip,
    budget: f64,
    params: &SafetyParams,
) -> Result<Option<SafePlan>, SafetyError> {
    params.validate()?;
    let reserved = 2.0 * params.e_max;
    let planning_budget = budget - reserved;
    let trip_probability = trip_sums(belief_l, belief_0, trip).probability(planning_budget).value;
    if trip_probability < params.kappa {
        return Ok(None);
    }

    let to_base = ShortestPathTree::to_target(graph, &belief_l.mean_weights(), graph.base())?;
    let nodes = graph.walk_nodes(graph.base(), &trip.outbound);
    let n = trip.outbound.len();
    let mut plan = SafePlan {
        trip: trip.clone(),
        nodes: nodes[..n].to_vec(),
        backup: Vec::with_capacity(n),
        backup_probability: Vec::with_capacity(n),
        delta: Vec::with_capacity(n),
        reserved,
        kappa: params.kappa,
        planning_budget,
        trip_probability,
    };
    for position in 0..n {
        let v = nodes[position];
        let Some(backup) = to_base.path(graph, v) else {
            return Ok(None);
        };
        let delta = compute_delta(belief_l, belief_0, trip, position, planning_budget, params.phi);
        let prefix = LegSums::of(belief_l, &trip.outbound.edges()[..position]);
        let back = LegSums::of(belief_l, backup.edges());
        let ctx = TruncationContext {
            mu: prefix.known + prefix.mu,
            sigma2: prefix.sigma2,
            delta,
            mu_backup: back.known + back.mu,
            sigma2_backup: back.sigma2,
            budget: planning_budget,
        };
        let p = match truncated_success_probability(&ctx) {
            Ok(p) if p < params.kappa => return Ok(None),
            Ok(p) => Some(p),
            Err(SafetyError::EmptyConditioning(_)) => None,
            Err(e) => return Err(e),
        };
        plan.backup.push(backup);
        plan.backup_probability.push(p);
        plan.delta.push(delta);
    }
    Ok(Some(plan))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbortAction<'a> {
    Continue,
    Divert(&'a Path),
}

/// Decision at outbound position `position` with `used` energy spent.
pub fn abort_check(plan: &SafePlan, position: usize, used: f64) -> AbortAction<'_> {
    match plan.delta.get(position) {
        Some(&delta) if used > delta => AbortAction::Divert(&plan.backup[position]),
        _ => AbortAction::Continue,
    }
}

/// The same rule phrased through the remaining success probability.
pub fn abort_by_probability(
    belief_l: &EnergyBelief,
    belief_0: &EnergyBelief,
    trip: &Trip,
    position: usize,
    budget: f64,
    used: f64,
    phi: f64,
) -> bool {
    position < trip.outbound.len()
        && remaining_trip_probability(belief_l, belief_0, trip, position, budget - used).value < phi
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeAction {
    ContinueEdge,
    TurnBack,
}

/// Turn back once more than `e_max` has gone into an unexplored edge.
pub fn mid_edge_turnaround(spent: f64, e_max: f64) -> EdgeAction {
    if spent > e_max {
        EdgeAction::TurnBack
    } else {
        EdgeAction::ContinueEdge
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beliefmodel::EdgeTerm::{Known, Unknown};
    use crate::graphmap::EdgeSpec;

    fn ctx(mu: f64, sigma2: f64, delta: f64, mu_b: f64, s2_b: f64, budget: f64) -> TruncationContext {
        TruncationContext {
            mu,
            sigma2,
            delta,
            mu_backup: mu_b,
            sigma2_backup: s2_b,
            budget,
        }
    }

    #[test]
    fn truncated_limits() {
        let p = truncated_success_probability(&ctx(10.0, 4.0, 12.0, 0.0, 0.0, 1e9)).unwrap();
        assert_eq!(p, 1.0);
        let p = truncated_success_probability(&ctx(10.0, 4.0, 20.0, 0.0, 0.0, 20.0)).unwrap();
        assert_eq!(p, 0.0);
        assert!(matches!(
            truncated_success_probability(&ctx(0.0, 1.0, 8.0, 0.0, 1.0, 5.0)),
            Err(SafetyError::EmptyConditioning(_))
        ));
        assert!(matches!(
            truncated_success_probability(&ctx(3.0, 0.0, 3.0, 0.0, 1.0, 5.0)),
            Err(SafetyError::EmptyConditioning(_))
        ));
        // Degenerate X above the threshold: only Y matters.
        let p = truncated_success_probability(&ctx(3.0, 0.0, 2.0, 1.0, 1.0, 5.0)).unwrap();
        assert!((p - normal_cdf(1.0f64)).abs() < 1e-15);
    }

    #[test]
    fn untruncated_limit_is_the_gaussian_sum() {
        let p = truncated_success_probability(&ctx(10.0, 4.0, -1e6, 5.0, 1.0, 17.0)).unwrap();
        let expected = normal_cdf(2.0 / 5f64.sqrt());
        assert!((p - expected).abs() < 1e-8, "{p} vs {expected}");
    }

    #[test]
    fn step_backup_is_analytic() {
        // X ~ N(0, 1) | X > 0, Y = 1, B = 2: P(0 < X ≤ 1) / 0.5.
        let p = truncated_success_probability(&ctx(0.0, 1.0, 0.0, 1.0, 0.0, 2.0)).unwrap();
        let expected = (normal_cdf(1.0f64) - 0.5) / 0.5;
        assert!((p - expected).abs() < 1e-12);
    }

    #[test]
    fn single_precision_truncation() {
        let c = TruncationContext::<f32> {
            mu: 10.0,
            sigma2: 4.0,
            delta: 12.0,
            mu_backup: 5.0,
            sigma2_backup: 1.0,
            budget: 20.0,
        };
        let p32 = truncated_success_probability(&c).unwrap() as f64;
        let p64 = truncated_success_probability(&ctx(10.0, 4.0, 12.0, 5.0, 1.0, 20.0)).unwrap();
        assert!((p32 - p64).abs() < 1e-4);
    }

    /// Line 0 - 1 - 2; edges 0:0→1, 1:1→0, 2:1→2, 3:2→1.
    fn line3() -> Graph {
        let pos = [(0.0, 0.0), (0.0, 1.0), (0.0, 2.0)];
        let e = |from, to| EdgeSpec { from, to, length: 1.0 };
        Graph::new(&pos, &[e(0, 1), e(1, 0), e(1, 2), e(2, 1)], 0, [1, 2]).unwrap()
    }

    fn trip_to_2() -> Trip {
        Trip::new(2, Path(vec![0, 2]), Path(vec![3, 1]))
    }

    #[test]
    fn remaining_probability_cases() {
        let b = EnergyBelief::from_terms(0, &[Unknown(4.0, 1.0), Known(1.0), Known(2.0), Known(1.0)], 1.0);
        let t = trip_to_2();
        let whole = trip_sums(&b, &b, &t).probability(10.0);
        assert_eq!(remaining_trip_probability(&b, &b, &t, 0, 10.0), whole);
        // At dest, return costs 1 + 1 = 2.
        assert_eq!(remaining_trip_probability(&b, &b, &t, 2, 5.0).value, 1.0);
        // From node 1: known 2 + 1 + 1 = 4 and no unknowns left.
        assert_eq!(remaining_trip_probability(&b, &b, &t, 1, 3.9).value, 0.0);
        let b = EnergyBelief::from_terms(0, &[Known(1.0), Known(1.0), Unknown(4.0, 1.0), Known(1.0)], 1.0);
        let p = remaining_trip_probability(&b, &b, &t, 1, 7.0 + 4.0 - 2.0);
        // Remaining unknown N(4, 1), known 2 (edges 3 and 1), budget 9 → Φ(3).
        assert!((p.value - normal_cdf(3.0f64)).abs() < 1e-15);
    }

    #[test]
    fn delta_values() {
        let b = EnergyBelief::from_terms(0, &[Known(1.0), Known(2.0), Known(3.0), Known(4.0)], 1.0);
        let t = trip_to_2();
        // Fully known remaining cost from position 1 is 3 + 4 + 2 = 9.
        for phi in [0.1, 0.5, 0.99] {
            assert_eq!(compute_delta(&b, &b, &t, 1, 20.0, phi), 11.0);
        }
        assert_eq!(compute_delta(&b, &b, &t, 1, 20.0, 0.0), f64::INFINITY);
        let b = EnergyBelief::from_terms(0, &[Known(1.0), Known(2.0), Unknown(10.0, 4.0), Known(3.0)], 1.0);
        let d = compute_delta(&b, &b, &t, 1, 30.0, 0.95);
        assert!((d - (30.0 - (1.6448536269514722 * 2.0 + 10.0 + 5.0))).abs() < 1e-9);
        assert!((d - 11.7103).abs() < 1e-4);
        let d = compute_delta(&b, &b, &t, 1, 30.0, 0.5);
        assert!((d - 15.0).abs() < 1e-12);
    }

    #[test]
    fn known_graph_plan() {
        let g = line3();
        let b = EnergyBelief::from_terms(0, &[Known(1.0); 4], 1.0);
        let params = SafetyParams { phi: 0.95, kappa: 0.95, e_max: 1.0 };
        let plan = build_safe_trip(&g, &b, &b, &trip_to_2(), 6.0, &params).unwrap().unwrap();
        assert_eq!(plan.nodes, vec![0, 1]);
        assert_eq!(plan.backup, vec![Path(vec![]), Path(vec![1])]);
        assert_eq!(plan.reserved, 2.0);
        assert_eq!(plan.delta, vec![0.0, 1.0]);
        // With the reserve taken out the trip no longer fits.
        assert!(build_safe_trip(&g, &b, &b, &trip_to_2(), 5.9, &params).unwrap().is_none());
        let zero = SafetyParams { kappa: 0.0, ..params };
        assert!(build_safe_trip(&g, &b, &b, &trip_to_2(), 0.0, &zero).unwrap().is_some());
        assert!(build_safe_trip(&g, &b, &b, &trip_to_2(), 6.0, &SafetyParams { e_max: 0.0, ..params }).is_err());
    }

    #[test]
    fn abort_rules() {
        let g = line3();
        let b = EnergyBelief::from_terms(0, &[Known(1.0); 4], 1.0);
        let params = SafetyParams { phi: 0.95, kappa: 0.95, e_max: 1.0 };
        let plan = build_safe_trip(&g, &b, &b, &trip_to_2(), 6.0, &params).unwrap().unwrap();
        assert_eq!(abort_check(&plan, 1, 1.0), AbortAction::Continue);
        assert_eq!(abort_check(&plan, 1, 1.5), AbortAction::Divert(&Path(vec![1])));
        assert_eq!(abort_check(&plan, 2, 100.0), AbortAction::Continue);
        assert!(abort_by_probability(&b, &b, &plan.trip, 1, 4.0, 1.5, 0.95));
        assert!(!abort_by_probability(&b, &b, &plan.trip, 1, 4.0, 1.0, 0.95));
        assert!(!abort_by_probability(&b, &b, &plan.trip, 2, 4.0, 100.0, 0.95));
    }

    #[test]
    fn turnaround_boundary() {
        assert_eq!(mid_edge_turnaround(2.0, 2.0), EdgeAction::ContinueEdge);
        assert_eq!(mid_edge_turnaround(2.0 + 1e-9, 2.0), EdgeAction::TurnBack);
    }
}
