//! Per-vehicle task arrivals aggregated into zone workloads.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::mobility::{Observed, VehicleId};
use super::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendingTask {
    pub vehicle: VehicleId,
    /// Zone the vehicle was in when the task was generated.
    pub zone: usize,
    pub bits: f64,
}

/// Poisson arrivals over one slot for every observed vehicle, with sizes
/// uniform in the configured range.
pub fn generate_tasks<R: Rng>(vehicles: &[Observed], scenario: &Scenario, rng: &mut R) -> Vec<PendingTask> {
    let mean = scenario.traffic.arrival_rate * scenario.compute.slot_length_s;
    if !(mean > 0.0) {
        return Vec::new();
    }
    let arrivals = Poisson::new(mean).expect("positive finite mean");
    let [lo, hi] = scenario.traffic.task_size_bits;
    let mut out = Vec::new();
    for v in vehicles {
        let count = arrivals.sample(rng) as u64;
        for _ in 0..count {
            let bits = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            out.push(PendingTask {
                vehicle: v.id,
                zone: v.zone,
                bits,
            });
        }
    }
    out
}

pub fn aggregate_workload(tasks: &[PendingTask], n_zones: usize) -> Vec<f64> {
    let mut grid = vec![0.0; n_zones];
    for t in tasks {
        grid[t.zone] += t.bits;
    }
    grid
}

/// Distinct vehicles with a task in `zone`, in first-seen order.
pub fn vehicles_in_zone(tasks: &[PendingTask], zone: usize) -> Vec<VehicleId> {
    let mut ids: Vec<VehicleId> = Vec::new();
    for t in tasks.iter().filter(|t| t.zone == zone) {
        if !ids.contains(&t.vehicle) {
            ids.push(t.vehicle);
        }
    }
    ids
}
