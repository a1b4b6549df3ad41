//! Ground-truth energy model used by the simulator.
//!
//! The learner never reads this module. Energies depend on the edge length,
//! the edge bearing relative to the wind, the payload and the wind speed.

use thiserror::Error;

use crate::graphmap::{cheapest_round_trips, DirectedEdge, Graph, GraphError};
use crate::num::{wrap_angle, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TruthError {
    #[error("wind overwhelms the airspeed on edge {edge}: cos(beta) = {cos_beta}")]
    DegenerateGeometry { edge: usize, cos_beta: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Payload (kg), wind speed (m/s) and wind direction (radians from north).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Configuration<T = f64> {
    pub payload: T,
    pub wind_speed: T,
    pub wind_direction: T,
}

impl<T: Real> Configuration<T> {
    /// Validates ranges and wraps the direction into `[0, 2π)`.
    pub fn new(payload: T, wind_speed: T, wind_direction: T) -> Result<Self, TruthError> {
        if !(payload >= T::zero() && payload.is_finite()) {
            return Err(TruthError::InvalidArgument(format!("payload {payload} must be >= 0")));
        }
        if !(wind_speed >= T::zero() && wind_speed.is_finite()) {
            return Err(TruthError::InvalidArgument(format!(
                "wind speed {wind_speed} must be >= 0"
            )));
        }
        if !wind_direction.is_finite() {
            return Err(TruthError::InvalidArgument("wind direction must be finite".into()));
        }
        Ok(Configuration {
            payload,
            wind_speed,
            wind_direction: wrap_angle(wind_direction),
        })
    }

    /// Same wind, no payload: the configuration of a homebound leg.
    pub fn unloaded(&self) -> Self {
        Configuration {
            payload: T::zero(),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicsConstants<T = f64> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
    pub e: T,
    /// Empty drone mass, kg.
    pub m0: T,
    /// Airspeed, m/s.
    pub v_max: T,
}

impl<T: Real> Default for PhysicsConstants<T> {
    fn default() -> Self {
        PhysicsConstants {
            a: T::lit(1e-4),
            b: T::one(),
            c: T::lit(25.0),
            d: T::one(),
            e: T::zero(),
            m0: T::lit(1.5),
            v_max: T::lit(15.0),
        }
    }
}

impl<T: Real> PhysicsConstants<T> {
    pub fn validate(&self) -> Result<(), TruthError> {
        let positive = [self.a, self.b, self.c, self.d, self.m0, self.v_max]
            .iter()
            .all(|&x| x > T::zero() && x.is_finite());
        if !positive || !(self.e >= T::zero() && self.e.is_finite()) {
            return Err(TruthError::InvalidArgument(format!(
                "physics constants must be positive (E >= 0): {self:?}"
            )));
        }
        Ok(())
    }
}

/// Energy to fly `length` meters on bearing `bearing` under `config`.
///
/// Returns `(energy, cos β)`; callers decide what a non-positive `cos β` means.
pub fn energy_model<T: Real>(
    length: T,
    bearing: T,
    config: &Configuration<T>,
    k: &PhysicsConstants<T>,
) -> (T, T) {
    let rel = wrap_angle(config.wind_direction - bearing);
    let cross = config.wind_speed * rel.sin();
    let along = k.v_max - config.wind_speed * rel.cos();
    let va2 = cross * cross + along * along;
    let cos_beta = along / va2.sqrt();
    let energy = k.a * (k.m0 + config.payload) * (va2 * k.b + k.c) * length * k.d / cos_beta + k.e;
    (energy, cos_beta)
}

pub fn true_edge_energy(
    edge: &DirectedEdge,
    config: &Configuration,
    constants: &PhysicsConstants,
) -> Result<f64, TruthError> {
    let (energy, cos_beta) = energy_model(edge.length, edge.bearing, config, constants);
    if !(cos_beta > 0.0) {
        return Err(TruthError::DegenerateGeometry {
            edge: edge.id,
            cos_beta,
        });
    }
    Ok(energy)
}

/// True energy of every edge, indexed by edge id.
pub fn edge_energies(
    graph: &Graph,
    config: &Configuration,
    constants: &PhysicsConstants,
) -> Result<Vec<f64>, TruthError> {
    graph
        .edges()
        .iter()
        .map(|e| true_edge_energy(e, config, constants))
        .collect()
}

/// Budget at which the smallest fraction of destinations that is at least
/// `target_fraction` can complete their cheapest round trip.
///
/// The outbound leg is charged under `config`, the homebound leg under the
/// same wind without payload.
pub fn choose_budget(
    graph: &Graph,
    constants: &PhysicsConstants,
    config: &Configuration,
    target_fraction: f64,
) -> Result<f64, TruthError> {
    choose_budget_pooled(graph, constants, std::slice::from_ref(config), target_fraction)
}

/// Like [`choose_budget`], but the fraction is taken over all
/// (destination, configuration) pairs.
pub fn choose_budget_pooled(
    graph: &Graph,
    constants: &PhysicsConstants,
    configs: &[Configuration],
    target_fraction: f64,
) -> Result<f64, TruthError> {
    if !(target_fraction > 0.0 && target_fraction <= 1.0) {
        return Err(TruthError::InvalidArgument(format!(
            "target fraction {target_fraction} must lie in (0, 1]"
        )));
    }
    if graph.destinations().is_empty() || configs.is_empty() {
        return Err(TruthError::InvalidArgument(
            "budget selection needs at least one destination and configuration".into(),
        ));
    }
    let mut costs = Vec::with_capacity(graph.destinations().len() * configs.len());
    for config in configs {
        let out = edge_energies(graph, config, constants)?;
        let ret = edge_energies(graph, &config.unloaded(), constants)?;
        let trips = cheapest_round_trips(graph, &out, &ret)?;
        costs.extend(
            graph
                .destinations()
                .iter()
                .map(|&v| trips[v].as_ref().map_or(f64::INFINITY, |t| t.cost())),
        );
    }
    costs.sort_by(f64::total_cmp);
    let finite = costs.iter().take_while(|c| c.is_finite()).count();
    if finite == 0 {
        return Err(TruthError::InvalidArgument(
            "no destination has a round trip".into(),
        ));
    }
    // Guard against 0.6 * 5 evaluating to 3.0000000000000004.
    let needed = ((target_fraction * costs.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(costs[needed.min(finite) - 1])
}
