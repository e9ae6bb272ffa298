//! The slotted environment: zones, RSUs, vehicles, task arrivals and the
//! per-slot cost of a server assignment.

mod env;
pub mod mobility;
mod scenario;
pub mod traffic;

pub use env::{Assignment, Env, Failure, SlotMetrics, SlotOutcome, SlotState, TaskRecord, ZoneAction};
pub use mobility::{MobilityTrace, VehicleState};
pub use scenario::{
    ComputeConfig, GridConfig, MobilityConfig, RoadLayout, RsuConfig, Scenario, TrafficConfig, World,
};
