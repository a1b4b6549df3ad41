//! Learning energy models and probabilistic reachable sets for
//! battery-limited delivery drones.
//!
//! The Gaussian kernels are generic over [`num::Real`]; graphs, beliefs and
//! the simulator work in `f64`. The aliases below fix the scalar for the
//! common case.

pub mod beliefmodel;
pub mod graphmap;
pub mod num;
pub mod reachability;
pub mod safety;
pub mod simharness;
pub mod strategies;
pub mod truthmodel;

pub use num::Real;

pub type Configuration = truthmodel::Configuration<f64>;
pub type PhysicsConstants = truthmodel::PhysicsConstants<f64>;
pub type GaussianBelief = beliefmodel::GaussianBelief<f64>;
pub type SuccessProbability = reachability::SuccessProbability<f64>;
pub type TruncationContext = safety::TruncationContext<f64>;

pub use beliefmodel::{BeliefParams, BeliefStore, ConfigGrid, ConfigRanges, EnergyBelief};
pub use graphmap::{EdgeId, Graph, GraphError, NodeId, Path, Trip};
pub use reachability::{probabilistic_reachable_set, true_reachable_set, ReachMode};
pub use safety::{build_safe_trip, SafePlan, SafetyParams};
pub use simharness::{run_simulation, MapSource, RunSummary, SimConfig, SimError, SimResult};
pub use strategies::{Decision, Request, StrategyKind, StrategyParams};
