//! End-to-end simulation: requests, flights against the truth model, belief
//! updates and per-request metrics.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::beliefmodel::{BeliefError, BeliefParams, BeliefStore, ConfigGrid, ConfigRanges, EnergyBelief};
use crate::graphmap::{
    cheapest_round_trips, generate_grid_map, generate_random_map, EdgeId, Graph, GraphError, NodeId, Path, Trip,
};
use crate::reachability::{probabilistic_reachable_set, ReachError, ReachMode};
use crate::safety::{abort_check, build_safe_trip, mid_edge_turnaround, AbortAction, EdgeAction, SafePlan, SafetyError, SafetyParams};
use crate::strategies::{hops_to, plan_frontier, plan_random, plan_shortest_path, Decision, Request, StrategyKind, StrategyParams};
use crate::truthmodel::{choose_budget_pooled, edge_energies, Configuration, PhysicsConstants, TruthError};

const REQUEST_SALT: u64 = 0x5245_5155_4553_5453;
const STRATEGY_SALT: u64 = 0x5354_5241_5445_4759;
const PRIOR_SALT: u64 = 0x5052_494f_5253_4545;

/// Trailing window of the run summary.
pub const SUMMARY_WINDOW: usize = 100;

pub const CSV_HEADER: &str =
    "request,accepted,success,aborted,recall,precision,edge_coverage,acc_rate,succ_rate,del_rate";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Truth(#[from] TruthError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Reach(#[from] ReachError),
    #[error(transparent)]
    Safety(#[from] SafetyError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MapSource {
    Inline(Arc<Graph>),
    /// Random geometric map; `seed: None` uses the master seed.
    Random {
        nodes: usize,
        neighbors: usize,
        width: f64,
        height: f64,
        seed: Option<u64>,
    },
    Grid {
        rows: usize,
        cols: usize,
        spacing: f64,
    },
}

impl MapSource {
    pub fn random(nodes: usize, neighbors: usize) -> Self {
        MapSource::Random {
            nodes,
            neighbors,
            width: 1000.0,
            height: 1000.0,
            seed: None,
        }
    }

    pub fn grid(rows: usize, cols: usize) -> Self {
        MapSource::Grid {
            rows,
            cols,
            spacing: 100.0,
        }
    }

    pub fn build(&self, master_seed: u64) -> Result<Arc<Graph>, GraphError> {
        Ok(match self {
            MapSource::Inline(g) => Arc::clone(g),
            MapSource::Random {
                nodes,
                neighbors,
                width,
                height,
                seed,
            } => Arc::new(generate_random_map(*nodes, *width, *height, *neighbors, seed.unwrap_or(master_seed))?),
            MapSource::Grid { rows, cols, spacing } => Arc::new(generate_grid_map(*rows, *cols, *spacing)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EmaxPolicy {
    /// Largest belief mean over all bins and edges, re-read per request.
    BeliefMax,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequestOrder {
    Random,
    /// Destinations in id order, cycling.
    RoundRobin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub map: MapSource,
    pub strategy: StrategyKind,
    pub requests: usize,
    pub phi: f64,
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub e_max: EmaxPolicy,
    pub safety: bool,
    /// Share of (destination, configuration) pairs the budget should cover.
    pub budget_fraction: f64,
    /// Explicit budget; overrides `budget_fraction`.
    pub budget: Option<f64>,
    pub ranges: ConfigRanges,
    /// Belief bins; `None` uses the standard grid over `ranges`.
    pub grid: Option<ConfigGrid>,
    pub belief: BeliefParams,
    pub constants: PhysicsConstants,
    pub seed: u64,
    pub order: RequestOrder,
    pub reach_mode: ReachMode,
    /// Hop limit of random trips as a multiple of the fewest-hop trip.
    pub random_hop_factor: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            map: MapSource::grid(10, 10),
            strategy: StrategyKind::Frontier,
            requests: 5000,
            phi: 0.95,
            alpha: 0.0,
            beta: 0.05,
            kappa: 0.95,
            e_max: EmaxPolicy::BeliefMax,
            safety: false,
            budget_fraction: 0.6,
            budget: None,
            ranges: ConfigRanges::default(),
            grid: None,
            belief: BeliefParams::default(),
            constants: PhysicsConstants::default(),
            seed: 0,
            order: RequestOrder::Random,
            reach_mode: ReachMode::Surrogate,
            random_hop_factor: 2,
        }
    }
}

impl SimConfig {
    pub fn strategy_params(&self) -> StrategyParams {
        StrategyParams {
            phi: self.phi,
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.requests == 0 {
            return bad("request count must be at least 1".into());
        }
        self.strategy_params().validate().map_err(SimError::Config)?;
        if !(0.0..=1.0).contains(&self.kappa) {
            return bad(format!("kappa = {} is outside [0, 1]", self.kappa));
        }
        if let EmaxPolicy::Fixed(e) = self.e_max {
            if !(e > 0.0 && e.is_finite()) {
                return bad(format!("e_max = {e} must be > 0"));
            }
        }
        if !(self.budget_fraction > 0.0 && self.budget_fraction <= 1.0) {
            return bad(format!("budget fraction {} must lie in (0, 1]", self.budget_fraction));
        }
        if let Some(b) = self.budget {
            if !(b > 0.0 && b.is_finite()) {
                return bad(format!("budget {b} must be > 0"));
            }
        }
        self.ranges.validate()?;
        self.belief.validate()?;
        self.constants.validate()?;
        if self.ranges.wind_speed.1 >= self.constants.v_max {
            return bad(format!(
                "wind speeds up to {} reach the airspeed {}",
                self.ranges.wind_speed.1, self.constants.v_max
            ));
        }
        if self.random_hop_factor == 0 {
            return bad("random hop factor must be at least 1".into());
        }
        Ok(())
    }
}

fn stream_rng(seed: u64, salt: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt);
    rng.set_stream(stream);
    rng
}

fn draw(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    rng.random_range(lo..=hi)
}

/// Uniform destination and uniform configuration within `ranges`.
pub fn generate_request(rng: &mut impl Rng, graph: &Graph, ranges: &ConfigRanges) -> Request {
    let dests = graph.destinations();
    let dest = dests[rng.random_range(0..dests.len())];
    Request {
        dest,
        config: sample_config(rng, ranges),
    }
}

pub fn sample_config(rng: &mut impl Rng, ranges: &ConfigRanges) -> Configuration {
    let payload = draw(rng, ranges.payload);
    let wind_speed = draw(rng, ranges.wind_speed);
    let wind_direction = draw(rng, ranges.wind_direction);
    Configuration::new(payload, wind_speed, wind_direction).expect("ranges were validated")
}

/// Configurations used to pick the budget: the standard grid over `ranges`
/// with payloads clamped into the payload range.
pub fn budget_configs(ranges: &ConfigRanges) -> Result<Vec<Configuration>, SimError> {
    let grid = ConfigGrid::standard(ranges)?;
    Ok(grid
        .centers()
        .map(|c| Configuration {
            payload: c.payload.clamp(ranges.payload.0, ranges.payload.1),
            ..c
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub edge: EdgeId,
    /// Flown with the payload on board.
    pub loaded: bool,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlightOutcome {
    pub accepted: bool,
    pub delivered: bool,
    /// Delivered and back at base within the budget.
    pub success: bool,
    pub aborted: bool,
    /// Ran out of energy in the air.
    pub lost: bool,
    pub energy_used: f64,
    /// Fully flown edges, in order.
    pub traversed: Vec<EdgeId>,
    /// Edges whose value was unknown in their bin, deduplicated.
    pub measured: Vec<Measurement>,
}

impl FlightOutcome {
    pub fn rejected() -> Self {
        FlightOutcome::default()
    }
}

/// True energies of one request.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthView {
    pub loaded: Vec<f64>,
    pub unloaded: Vec<f64>,
}

impl TruthView {
    pub fn new(graph: &Graph, config: &Configuration, constants: &PhysicsConstants) -> Result<Self, TruthError> {
        Ok(TruthView {
            loaded: edge_energies(graph, config, constants)?,
            unloaded: edge_energies(graph, &config.unloaded(), constants)?,
        })
    }
}

struct Flight<'a> {
    graph: &'a Graph,
    truth: &'a TruthView,
    budget: f64,
    out: FlightOutcome,
    at: NodeId,
}

impl Flight<'_> {
    /// Flies one whole edge; false when the battery runs out on the way.
    fn fly(&mut self, e: EdgeId, loaded: bool, unknown: bool) -> bool {
        let energy = if loaded { self.truth.loaded[e] } else { self.truth.unloaded[e] };
        if self.out.energy_used + energy > self.budget {
            self.out.energy_used = self.budget;
            self.out.lost = true;
            return false;
        }
        self.out.energy_used += energy;
        self.out.traversed.push(e);
        self.at = self.graph.edge(e).to;
        if unknown && !self.out.measured.iter().any(|m| m.edge == e && m.loaded == loaded) {
            self.out.measured.push(Measurement { edge: e, loaded, energy });
        }
        true
    }

    fn divert(&mut self, backup: &Path, belief_l: &EnergyBelief) {
        self.out.aborted = true;
        for &e in backup.edges() {
            if !self.fly(e, true, !belief_l.is_known(e)) {
                return;
            }
        }
    }
}

/// Flies `trip` against the truth.
///
/// Outbound edges are charged loaded and homebound edges unloaded. With a
/// safety plan the drone checks the abort rule at every outbound node and
/// turns back from any unexplored outbound edge once it has used more than
/// `e_max` on it; both cases end with the backup path of the current node.
pub fn execute_flight(
    graph: &Graph,
    trip: &Trip,
    truth: &TruthView,
    budget: f64,
    belief_l: &EnergyBelief,
    belief_0: &EnergyBelief,
    safety: Option<(&SafePlan, f64)>,
) -> FlightOutcome {
    let mut f = Flight {
        graph,
        truth,
        budget,
        out: FlightOutcome {
            accepted: true,
            ..FlightOutcome::default()
        },
        at: graph.base(),
    };
    for (position, &e) in trip.outbound.edges().iter().enumerate() {
        let unknown = !belief_l.is_known(e);
        if let Some((plan, e_max)) = safety {
            if let AbortAction::Divert(backup) = abort_check(plan, position, f.out.energy_used) {
                f.divert(backup, belief_l);
                return f.out;
            }
            if unknown && mid_edge_turnaround(truth.loaded[e], e_max) == EdgeAction::TurnBack {
                f.out.energy_used += 2.0 * e_max;
                if f.out.energy_used > budget {
                    f.out.energy_used = budget;
                    f.out.lost = true;
                    return f.out;
                }
                f.divert(&plan.backup[position], belief_l);
                return f.out;
            }
        }
        if !f.fly(e, true, unknown) {
            return f.out;
        }
    }
    f.out.delivered = f.at == trip.dest;
    for &e in trip.homebound.edges() {
        if !f.fly(e, false, !belief_0.is_known(e)) {
            return f.out;
        }
    }
    f.out.success = f.out.delivered && f.at == graph.base();
    f.out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetScores {
    pub recall: f64,
    pub precision: f64,
    pub edge_coverage: f64,
}

/// Recall and precision of `predicted` against `truth`, and the share of
/// `optimal` edges that have been visited.
pub fn compute_metrics(
    predicted: &BTreeSet<NodeId>,
    truth: &BTreeSet<NodeId>,
    visited: &[bool],
    optimal: &BTreeSet<EdgeId>,
) -> SetScores {
    let hit = predicted.intersection(truth).count() as f64;
    let ratio = |num: f64, den: usize| if den == 0 { 1.0 } else { num / den as f64 };
    let covered = optimal.iter().filter(|&&e| visited.get(e).copied().unwrap_or(false)).count();
    SetScores {
        recall: ratio(hit, truth.len()),
        precision: ratio(hit, predicted.len()),
        edge_coverage: ratio(covered as f64, optimal.len()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    /// 1-based request number.
    pub request: usize,
    pub accepted: bool,
    pub success: bool,
    pub aborted: bool,
    pub lost: bool,
    pub recall: f64,
    pub precision: f64,
    pub edge_coverage: f64,
    pub acc_rate: f64,
    pub succ_rate: f64,
    pub del_rate: f64,
    /// Predicted set equal to the true set.
    pub exact: bool,
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub rows: Vec<MetricsRow>,
    pub budget: f64,
    pub graph: Arc<Graph>,
    pub store: BeliefStore,
}

impl SimResult {
    pub fn summary(&self) -> RunSummary {
        RunSummary::of(&self.rows)
    }

    pub fn csv(&self) -> String {
        metrics_csv(&self.rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub requests: usize,
    pub acc_rate: f64,
    pub succ_rate: f64,
    pub del_rate: f64,
    /// Means over the last [`SUMMARY_WINDOW`] requests.
    pub recall: f64,
    pub precision: f64,
    pub edge_coverage: f64,
    pub flights: usize,
    pub aborted: usize,
    pub lost: usize,
}

impl RunSummary {
    pub fn of(rows: &[MetricsRow]) -> Self {
        let last = rows.last().expect("a run has at least one request");
        let tail = &rows[rows.len() - rows.len().min(SUMMARY_WINDOW)..];
        let mean = |f: fn(&MetricsRow) -> f64| tail.iter().map(f).sum::<f64>() / tail.len() as f64;
        RunSummary {
            requests: rows.len(),
            acc_rate: last.acc_rate,
            succ_rate: last.succ_rate,
            del_rate: last.del_rate,
            recall: mean(|r| r.recall),
            precision: mean(|r| r.precision),
            edge_coverage: mean(|r| r.edge_coverage),
            flights: rows.iter().filter(|r| r.accepted).count(),
            aborted: rows.iter().filter(|r| r.aborted).count(),
            lost: rows.iter().filter(|r| r.lost).count(),
        }
    }
}

fn flag(b: bool) -> u8 {
    u8::from(b)
}

pub fn write_metrics_row(out: &mut String, r: &MetricsRow) {
    let _ = writeln!(
        out,
        "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
        r.request,
        flag(r.accepted),
        flag(r.success),
        flag(r.aborted),
        r.recall,
        r.precision,
        r.edge_coverage,
        r.acc_rate,
        r.succ_rate,
        r.del_rate
    );
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::with_capacity(80 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        write_metrics_row(&mut out, r);
    }
    out
}

pub fn write_metrics_csv(rows: &[MetricsRow], mut w: impl io::Write) -> io::Result<()> {
    w.write_all(metrics_csv(rows).as_bytes())
}

pub fn resolve_budget(graph: &Graph, cfg: &SimConfig) -> Result<f64, SimError> {
    match cfg.budget {
        Some(b) => Ok(b),
        None => Ok(choose_budget_pooled(
            graph,
            &cfg.constants,
            &budget_configs(&cfg.ranges)?,
            cfg.budget_fraction,
        )?),
    }
}

fn e_max_for(cfg: &SimConfig, store: &BeliefStore) -> f64 {
    match cfg.e_max {
        EmaxPolicy::Fixed(e) => e,
        EmaxPolicy::BeliefMax => store.max_mean(),
    }
}

pub fn run_simulation(cfg: &SimConfig) -> Result<SimResult, SimError> {
    cfg.validate()?;
    let graph = cfg.map.build(cfg.seed)?;
    let g: &Graph = &graph;
    if g.destinations().is_empty() {
        return Err(SimError::Config("the map has no destinations".into()));
    }
    let budget = resolve_budget(g, cfg)?;
    let grid = match &cfg.grid {
        Some(grid) => grid.clone(),
        None => ConfigGrid::standard(&cfg.ranges)?,
    };
    let mut store = BeliefStore::new(g, grid, cfg.belief, cfg.seed ^ PRIOR_SALT)?;
    let params = cfg.strategy_params();
    let safe = cfg.safety && cfg.strategy.learns();
    // A fraction-chosen budget is topped up by the reserve so that planning
    // sees the same share of reachable pairs as without safety.
    let budget = match (safe, cfg.budget) {
        (true, None) => budget + 2.0 * e_max_for(cfg, &store),
        _ => budget,
    };

    let mut visited = vec![false; g.edge_count()];
    let mut rows = Vec::with_capacity(cfg.requests);
    let (mut accepted, mut succeeded) = (0usize, 0usize);

    for i in 0..cfg.requests {
        let mut req_rng = stream_rng(cfg.seed, REQUEST_SALT, i as u64);
        let request = match cfg.order {
            RequestOrder::Random => generate_request(&mut req_rng, g, &cfg.ranges),
            RequestOrder::RoundRobin => Request {
                dest: g.destinations()[i % g.destinations().len()],
                config: sample_config(&mut req_rng, &cfg.ranges),
            },
        };
        let mut strat_rng = stream_rng(cfg.seed, STRATEGY_SALT, i as u64);

        let truth = TruthView::new(g, &request.config, &cfg.constants)?;
        let true_trips = cheapest_round_trips(g, &truth.loaded, &truth.unloaded)?;
        let mut truth_set = BTreeSet::new();
        let mut optimal_edges = BTreeSet::new();
        for &v in g.destinations() {
            if let Some(rt) = true_trips[v].as_ref().filter(|rt| rt.cost() <= budget) {
                truth_set.insert(v);
                optimal_edges.extend(rt.trip.outbound.edges().iter().chain(rt.trip.homebound.edges()));
            }
        }

        let outcome = {
            let (bl, b0) = store.pair(&request.config);
            let decision = match cfg.strategy {
                StrategyKind::ShortestPath => plan_shortest_path(g, bl, b0, &request, budget, &params)?,
                StrategyKind::Frontier => plan_frontier(g, bl, b0, &request, budget, &params, &mut strat_rng)?,
                StrategyKind::Optimal => match &true_trips[request.dest] {
                    Some(rt) if rt.cost() <= budget => Decision::Accept {
                        trip: rt.trip.clone(),
                        expanded: false,
                    },
                    _ => Decision::Reject,
                },
                StrategyKind::Random => {
                    let fewest = hops_to(g, request.dest)[g.base()].saturating_add(hops_to(g, g.base())[request.dest]);
                    plan_random(g, &request, &mut strat_rng, fewest.saturating_mul(cfg.random_hop_factor))
                }
            };
            match decision {
                Decision::Reject => FlightOutcome::rejected(),
                Decision::Accept { trip, .. } if safe => {
                    let e_max = e_max_for(cfg, &store);
                    let sp = SafetyParams {
                        phi: cfg.phi,
                        kappa: cfg.kappa,
                        e_max,
                    };
                    match build_safe_trip(g, bl, b0, &trip, budget, &sp)? {
                        Some(plan) => execute_flight(g, &trip, &truth, budget, bl, b0, Some((&plan, e_max))),
                        None => FlightOutcome::rejected(),
                    }
                }
                Decision::Accept { trip, .. } => execute_flight(g, &trip, &truth, budget, bl, b0, None),
            }
        };

        if cfg.strategy.learns() {
            let unloaded = request.config.unloaded();
            for m in &outcome.measured {
                let config = if m.loaded { &request.config } else { &unloaded };
                store.record(m.edge, config, m.energy)?;
            }
        }
        for &e in &outcome.traversed {
            visited[e] = true;
        }

        let predicted = if cfg.strategy.learns() {
            let (bl, b0) = store.pair(&request.config);
            probabilistic_reachable_set(g, bl, b0, budget, cfg.phi, cfg.reach_mode)?.members
        } else {
            truth_set.clone()
        };
        let scores = compute_metrics(&predicted, &truth_set, &visited, &optimal_edges);

        accepted += usize::from(outcome.accepted);
        succeeded += usize::from(outcome.success);
        let n = (i + 1) as f64;
        rows.push(MetricsRow {
            request: i + 1,
            accepted: outcome.accepted,
            success: outcome.success,
            aborted: outcome.aborted,
            lost: outcome.lost,
            recall: scores.recall,
            precision: scores.precision,
            edge_coverage: scores.edge_coverage,
            acc_rate: accepted as f64 / n,
            succ_rate: if accepted == 0 { 0.0 } else { succeeded as f64 / accepted as f64 },
            del_rate: succeeded as f64 / n,
            exact: predicted == truth_set,
        });
    }
    Ok(SimResult {
        rows,
        budget,
        graph,
        store,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beliefmodel::EdgeTerm::{Known, Unknown};
    use crate::graphmap::EdgeSpec;

    fn line3() -> Graph {
        let pos = [(0.0, 0.0), (0.0, 1.0), (0.0, 2.0)];
        let e = |from, to| EdgeSpec { from, to, length: 1.0 };
        Graph::new(&pos, &[e(0, 1), e(1, 0), e(1, 2), e(2, 1)], 0, [1, 2]).unwrap()
    }

    fn trip_to_2() -> Trip {
        Trip::new(2, Path(vec![0, 2]), Path(vec![3, 1]))
    }

    fn small(strategy: StrategyKind, seed: u64) -> SimConfig {
        SimConfig {
            map: MapSource::grid(4, 4),
            strategy,
            requests: 150,
            seed,
            ..SimConfig::default()
        }
    }

    #[test]
    fn metric_conventions() {
        let s = |v: &[usize]| v.iter().copied().collect::<BTreeSet<_>>();
        let m = compute_metrics(&s(&[1, 2]), &s(&[1, 2]), &[true, true], &s(&[0, 1]));
        assert_eq!((m.recall, m.precision, m.edge_coverage), (1.0, 1.0, 1.0));
        let m = compute_metrics(&s(&[]), &s(&[3]), &[], &s(&[]));
        assert_eq!((m.recall, m.precision, m.edge_coverage), (0.0, 1.0, 1.0));
        let m = compute_metrics(&s(&[1, 2]), &s(&[2, 3]), &[true, false], &s(&[0, 1]));
        assert_eq!((m.recall, m.precision, m.edge_coverage), (0.5, 0.5, 0.5));
    }

    #[test]
    fn flight_success_and_loss() {
        let g = line3();
        let truth = TruthView {
            loaded: vec![2.0, 2.0, 3.0, 3.0],
            unloaded: vec![1.0, 1.0, 1.0, 1.0],
        };
        let b = EnergyBelief::from_terms(0, &[Unknown(1.0, 1.0); 4], 1.0);
        let out = execute_flight(&g, &trip_to_2(), &truth, 7.0, &b, &b, None);
        assert!(out.success && out.delivered && !out.lost);
        assert_eq!(out.energy_used, 7.0);
        assert_eq!(out.traversed, vec![0, 2, 3, 1]);
        assert_eq!(out.measured.len(), 4);
        let out = execute_flight(&g, &trip_to_2(), &truth, 6.5, &b, &b, None);
        assert!(!out.success && out.delivered && out.lost);
        assert_eq!(out.energy_used, 6.5);
        // The last edge was never completed, so it is neither visited nor measured.
        assert_eq!(out.traversed, vec![0, 2, 3]);
        assert_eq!(out.measured.len(), 3);
        let known = EnergyBelief::from_terms(0, &[Known(1.0); 4], 1.0);
        let out = execute_flight(&g, &trip_to_2(), &truth, 7.0, &known, &known, None);
        assert!(out.success && out.measured.is_empty());
    }

    #[test]
    fn abort_diverts_to_backup() {
        let g = line3();
        let b = EnergyBelief::from_terms(0, &[Unknown(1.0, 0.01), Known(1.0), Known(1.0), Known(1.0)], 1.0);
        let params = SafetyParams { phi: 0.95, kappa: 0.95, e_max: 6.0 };
        let plan = build_safe_trip(&g, &b, &b, &trip_to_2(), 20.0, &params).unwrap().unwrap();
        assert_eq!(plan.delta[1], 5.0);
        let truth = TruthView {
            loaded: vec![5.5, 1.0, 1.0, 1.0],
            unloaded: vec![1.0; 4],
        };
        let out = execute_flight(&g, &trip_to_2(), &truth, 20.0, &b, &b, Some((&plan, 6.0)));
        assert!(out.aborted && !out.delivered && !out.success && !out.lost);
        assert_eq!(out.traversed, vec![0, 1]);
        assert_eq!(out.energy_used, 6.5);
        assert_eq!(out.measured, vec![Measurement { edge: 0, loaded: true, energy: 5.5 }]);

        // A cheap first edge passes the check and the trip completes.
        let truth = TruthView {
            loaded: vec![1.0; 4],
            unloaded: vec![1.0; 4],
        };
        let out = execute_flight(&g, &trip_to_2(), &truth, 20.0, &b, &b, Some((&plan, 6.0)));
        assert!(out.success && !out.aborted);
    }

    #[test]
    fn turnaround_on_expensive_unknown_edge() {
        let g = line3();
        let b = EnergyBelief::from_terms(0, &[Known(1.0), Known(1.0), Unknown(1.0, 0.01), Known(1.0)], 1.0);
        let params = SafetyParams { phi: 0.95, kappa: 0.95, e_max: 2.0 };
        let plan = build_safe_trip(&g, &b, &b, &trip_to_2(), 10.0, &params).unwrap().unwrap();
        let truth = TruthView {
            loaded: vec![1.0, 1.0, 2.5, 1.0],
            unloaded: vec![1.0; 4],
        };
        let out = execute_flight(&g, &trip_to_2(), &truth, 10.0, &b, &b, Some((&plan, 2.0)));
        assert!(out.aborted && !out.lost && !out.success);
        assert_eq!(out.traversed, vec![0, 1]);
        assert_eq!(out.energy_used, 1.0 + 4.0 + 1.0);
        assert!(out.measured.is_empty());
    }

    #[test]
    fn request_generation() {
        let g = generate_grid_map(3, 3, 100.0).unwrap();
        let fixed = ConfigRanges::fixed(&Configuration::new(1.0, 3.0, 2.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let r = generate_request(&mut rng, &g, &fixed);
            assert_eq!((r.config.payload, r.config.wind_speed, r.config.wind_direction), (1.0, 3.0, 2.0));
            assert!(g.is_destination(r.dest));
        }
        let single = Graph::new(&[(0.0, 0.0), (1.0, 0.0)], &[EdgeSpec { from: 0, to: 1, length: 1.0 }, EdgeSpec { from: 1, to: 0, length: 1.0 }], 0, [1]).unwrap();
        for _ in 0..20 {
            assert_eq!(generate_request(&mut rng, &single, &ConfigRanges::default()).dest, 1);
        }
    }

    #[test]
    fn optimal_strategy_is_perfect() {
        let res = run_simulation(&small(StrategyKind::Optimal, 3)).unwrap();
        for r in &res.rows {
            assert_eq!((r.recall, r.precision), (1.0, 1.0));
            assert!(!r.accepted || r.success);
            assert!(r.exact);
        }
    }

    #[test]
    fn rate_identity_and_determinism() {
        for strategy in [StrategyKind::ShortestPath, StrategyKind::Frontier, StrategyKind::Random] {
            let cfg = small(strategy, 11);
            let a = run_simulation(&cfg).unwrap();
            for r in &a.rows {
                assert!((r.del_rate - r.acc_rate * r.succ_rate).abs() < 1e-9);
                for v in [r.recall, r.precision, r.edge_coverage, r.acc_rate, r.succ_rate, r.del_rate] {
                    assert!((0.0..=1.0).contains(&v));
                }
                assert!(!r.success || r.accepted);
            }
            let b = run_simulation(&cfg).unwrap();
            assert_eq!(a.csv(), b.csv());
        }
    }

    #[test]
    fn safety_run_completes() {
        let cfg = SimConfig {
            safety: true,
            ..small(StrategyKind::Frontier, 2)
        };
        let res = run_simulation(&cfg).unwrap();
        assert!(res.summary().flights > 0);
    }

    #[test]
    fn invalid_configs() {
        let zero = SimConfig { requests: 0, ..SimConfig::default() };
        assert!(matches!(run_simulation(&zero), Err(SimError::Config(_))));
        let windy = SimConfig {
            ranges: ConfigRanges { wind_speed: (0.0, 15.0), ..ConfigRanges::default() },
            ..SimConfig::default()
        };
        assert!(windy.validate().is_err());
        assert!(SimConfig { phi: 1.5, ..SimConfig::default() }.validate().is_err());
    }

    #[test]
    fn csv_format() {
        let row = MetricsRow {
            request: 1,
            accepted: true,
            success: false,
            aborted: false,
            lost: false,
            recall: 0.5,
            precision: 1.0,
            edge_coverage: 1.0 / 3.0,
            acc_rate: 1.0,
            succ_rate: 0.0,
            del_rate: 0.0,
            exact: false,
        };
        assert_eq!(
            metrics_csv(&[row]),
            format!("{CSV_HEADER}\n1,1,0,0,0.500000,1.000000,0.333333,1.000000,0.000000,0.000000\n")
        );
    }
}
