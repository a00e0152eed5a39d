//! Discrete-time microscopic freeway simulation.

pub mod demand;
pub mod idm;
pub mod lane_change;
pub mod network;
pub mod world;

pub use demand::{DemandSpec, PendingArrival};
pub use idm::{human_accel, IdmParams, Leader};
pub use lane_change::{lane_change_decision, LaneChangeParams};
pub use network::{AccessZone, LaneAccess, LanePolicy, RoadNetwork, VehicleClass};
pub use world::{
    InjectedEvent, SimParams, StepObserver, StepReport, TrialRecord, TransitionRecord, Vehicle,
    VehicleSelector, World, WorldCounters,
};
