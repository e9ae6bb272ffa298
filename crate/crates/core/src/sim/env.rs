use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mobility::{place_vehicles, Fleet, MobilityTrace, Observed};
use super::scenario::{MobilityConfig, Scenario, World};
use super::traffic::{aggregate_workload, generate_tasks, vehicles_in_zone, PendingTask};
use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::latency::{ComputeParams, DeliverVia, Task};
use crate::tpsa::{tpsa_schedule, TpsaInstance, TpsaOptions};

/// Observation at the start of a slot. Grids are indexed by zone
/// (`road * segments + segment`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotState {
    pub roads: usize,
    pub segments: usize,
    pub workload_bits: Vec<f64>,
    pub speed_mps: Vec<f64>,
    pub backlog_s: Vec<f64>,
}

impl SlotState {
    pub fn n_zones(&self) -> usize {
        self.roads * self.segments
    }

    pub fn n_rsus(&self) -> usize {
        self.backlog_s.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ZoneAction {
    pub receiver: usize,
    pub helper: usize,
    pub deliver: DeliverVia,
}

impl ZoneAction {
    pub fn solo(rsu: usize) -> Self {
        Self {
            receiver: rsu,
            helper: rsu,
            deliver: DeliverVia::Receiver,
        }
    }

    pub fn deliver_rsu(&self) -> usize {
        match self.deliver {
            DeliverVia::Receiver => self.receiver,
            DeliverVia::Helper => self.helper,
        }
    }
}

/// Server choice for every zone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub zones: Vec<ZoneAction>,
}

impl Assignment {
    pub fn uniform(n_zones: usize, action: ZoneAction) -> Self {
        Self {
            zones: vec![action; n_zones],
        }
    }

    pub fn validate(&self, n_zones: usize, n_rsus: usize) -> Result<()> {
        if self.zones.len() != n_zones {
            return Err(Error::Shape {
                expected: n_zones,
                actual: self.zones.len(),
                context: "assignment zones",
            });
        }
        if let Some((z, _)) = self
            .zones
            .iter()
            .enumerate()
            .find(|(_, a)| a.receiver >= n_rsus || a.helper >= n_rsus)
        {
            return Err(Error::Structure(format!(
                "zone {z} selects an RSU outside 0..{n_rsus}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Failure {
    OffloadSnr,
    ForwardSnr,
    Delivery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub zone: usize,
    pub workload_bits: f64,
    pub receiver: usize,
    pub helper: usize,
    pub deliver_rsu: usize,
    pub vehicles: usize,
    /// Present when the task was scheduled.
    pub service_s: Option<f64>,
    pub partition: Option<f64>,
    pub failure: Option<Failure>,
    pub cost: f64,
}

impl TaskRecord {
    pub fn success(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub slot: usize,
    pub cost: f64,
    pub records: Vec<TaskRecord>,
    pub next_state: SlotState,
    /// Tasks whose offloading outlasted some vehicle's stay in the zone.
    pub dwell_violations: usize,
}

/// Aggregates of one slot, as written to the per-slot metrics file.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SlotMetrics {
    pub t: usize,
    pub total_cost: f64,
    pub n_tasks: usize,
    pub n_failures: usize,
    pub total_bits: f64,
    pub mean_service_s: f64,
    pub succeeded_bits: f64,
    pub failed_bits: f64,
    pub success_service_s: f64,
}

impl SlotOutcome {
    pub fn metrics(&self) -> SlotMetrics {
        let scheduled: Vec<f64> = self.records.iter().filter_map(|r| r.service_s).collect();
        let mean_service_s = if scheduled.is_empty() {
            0.0
        } else {
            scheduled.iter().sum::<f64>() / scheduled.len() as f64
        };
        let ok = |r: &&TaskRecord| r.success();
        SlotMetrics {
            t: self.slot,
            total_cost: self.cost,
            n_tasks: self.records.len(),
            n_failures: self.records.iter().filter(|r| !r.success()).count(),
            total_bits: self.records.iter().map(|r| r.workload_bits).sum(),
            mean_service_s,
            succeeded_bits: self.records.iter().filter(ok).map(|r| r.workload_bits).sum(),
            failed_bits: self.records.iter().filter(|r| !r.success()).map(|r| r.workload_bits).sum(),
            success_service_s: self.records.iter().filter(ok).filter_map(|r| r.service_s).sum(),
        }
    }
}

struct LinkTable {
    v2i_rate: Vec<Vec<f64>>,
    r2r_rate: Vec<Vec<f64>>,
    offload_ok: Vec<Vec<bool>>,
    forward_ok: Vec<Vec<bool>>,
    deliver_ok: Vec<Vec<bool>>,
}

impl LinkTable {
    fn build(world: &World, scenario: &Scenario) -> Self {
        let ch = Channel::new(&world.geometry, &scenario.radio);
        let zones = 0..world.n_zones();
        let rsus = || 0..scenario.n_rsus();
        Self {
            v2i_rate: zones.clone().map(|z| rsus().map(|r| ch.rate_v2i(z, r)).collect()).collect(),
            r2r_rate: rsus().map(|r| rsus().map(|q| ch.rate_r2r(r, q)).collect()).collect(),
            offload_ok: zones.clone().map(|z| rsus().map(|r| ch.offload_feasible(z, r)).collect()).collect(),
            forward_ok: rsus().map(|r| rsus().map(|q| ch.forward_feasible(r, q)).collect()).collect(),
            deliver_ok: zones.map(|z| rsus().map(|r| ch.deliver_feasible(z, r)).collect()).collect(),
        }
    }
}

/// The slot-by-slot environment. Owns its generator; one instance is
/// single-threaded but can be moved between threads.
pub struct Env {
    scenario: Scenario,
    world: World,
    params: ComputeParams,
    tpsa: TpsaOptions,
    links: LinkTable,
    trace: Option<Arc<MobilityTrace>>,
    rng: ChaCha8Rng,
    fleet: Fleet,
    observed: Vec<Observed>,
    pending: Vec<PendingTask>,
    backlog: Vec<f64>,
    slot: usize,
}

impl Env {
    pub fn new(scenario: Scenario) -> Result<Self> {
        Self::with_options(scenario, TpsaOptions::default())
    }

    pub fn with_options(scenario: Scenario, tpsa: TpsaOptions) -> Result<Self> {
        scenario.validate()?;
        let trace = match &scenario.traffic.mobility {
            MobilityConfig::Synthetic => None,
            MobilityConfig::Trace { path } => Some(Arc::new(MobilityTrace::from_path(path)?)),
        };
        Self::assemble(scenario, tpsa, trace)
    }

    /// Environment replaying an in-memory trace.
    pub fn with_trace(scenario: Scenario, tpsa: TpsaOptions, trace: MobilityTrace) -> Result<Self> {
        scenario.validate()?;
        Self::assemble(scenario, tpsa, Some(Arc::new(trace)))
    }

    fn assemble(scenario: Scenario, tpsa: TpsaOptions, trace: Option<Arc<MobilityTrace>>) -> Result<Self> {
        let world = World::build(&scenario);
        let links = LinkTable::build(&world, &scenario);
        let params = scenario.compute_params();
        let seed = scenario.seed;
        let mut env = Self {
            backlog: vec![0.0; scenario.n_rsus()],
            scenario,
            world,
            params,
            tpsa,
            links,
            trace,
            rng: ChaCha8Rng::seed_from_u64(seed),
            fleet: Fleet::Synthetic(Vec::new()),
            observed: Vec::new(),
            pending: Vec::new(),
            slot: 0,
        };
        env.reset(seed);
        Ok(env)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn channel(&self) -> Channel<'_> {
        Channel::new(&self.world.geometry, &self.scenario.radio)
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn time_s(&self) -> f64 {
        self.slot as f64 * self.scenario.compute.slot_length_s
    }

    pub fn fleet(&self) -> &Fleet {
        &self.fleet
    }

    pub fn pending_tasks(&self) -> &[PendingTask] {
        &self.pending
    }

    /// Replaces the current slot's tasks (forced arrivals).
    pub fn set_pending_tasks(&mut self, tasks: Vec<PendingTask>) -> Result<()> {
        if let Some(t) = tasks.iter().find(|t| t.zone >= self.world.n_zones() || !(t.bits >= 0.0)) {
            return Err(Error::Structure(format!("invalid forced task {t:?}")));
        }
        self.pending = tasks;
        Ok(())
    }

    /// Places vehicles from `seed`; backlogs and workloads start at zero.
    pub fn reset(&mut self, seed: u64) -> SlotState {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.fleet = match &self.trace {
            Some(trace) => Fleet::Trace {
                trace: Arc::clone(trace),
                time_s: 0.0,
            },
            None => Fleet::Synthetic(place_vehicles(
                &self.world,
                &self.scenario,
                self.scenario.traffic.vehicles,
                &mut self.rng,
            )),
        };
        self.observed = self.fleet.observe(&self.world);
        self.pending.clear();
        self.backlog = vec![0.0; self.scenario.n_rsus()];
        self.slot = 0;
        self.state()
    }

    pub fn state(&self) -> SlotState {
        let n = self.world.n_zones();
        let mut speed = vec![0.0; n];
        let mut count = vec![0usize; n];
        for v in &self.observed {
            speed[v.zone] += v.speed;
            count[v.zone] += 1;
        }
        for (s, c) in speed.iter_mut().zip(&count) {
            if *c > 0 {
                *s /= *c as f64;
            }
        }
        SlotState {
            roads: self.scenario.grid.roads,
            segments: self.scenario.grid.segments,
            workload_bits: aggregate_workload(&self.pending, n),
            speed_mps: speed,
            backlog_s: self.backlog.clone(),
        }
    }

    fn failure_record(&self, zone: usize, bits: f64, a: &ZoneAction, vehicles: usize, failure: Failure) -> TaskRecord {
        TaskRecord {
            zone,
            workload_bits: bits,
            receiver: a.receiver,
            helper: a.helper,
            deliver_rsu: a.deliver_rsu(),
            vehicles,
            service_s: None,
            partition: None,
            failure: Some(failure),
            cost: self.scenario.penalty_per_bit() * bits,
        }
    }

    /// Applies `assignment` to the current slot's tasks and advances one slot.
    pub fn step(&mut self, assignment: &Assignment) -> Result<SlotOutcome> {
        let n_zones = self.world.n_zones();
        assignment.validate(n_zones, self.scenario.n_rsus())?;
        let workload = aggregate_workload(&self.pending, n_zones);

        let mut records: Vec<TaskRecord> = Vec::new();
        let mut tasks: Vec<Task> = Vec::new();
        for (z, &bits) in workload.iter().enumerate() {
            if bits == 0.0 {
                continue;
            }
            let a = &assignment.zones[z];
            let riders = vehicles_in_zone(&self.pending, z).len();
            if !self.links.offload_ok[z][a.receiver] {
                records.push(self.failure_record(z, bits, a, riders, Failure::OffloadSnr));
            } else if !self.links.forward_ok[a.receiver][a.helper] {
                records.push(self.failure_record(z, bits, a, riders, Failure::ForwardSnr));
            } else {
                tasks.push(Task {
                    zone: z,
                    workload_bits: bits,
                    receiver: a.receiver,
                    helper: a.helper,
                    deliver: a.deliver,
                    offload_rate: self.links.v2i_rate[z][a.receiver],
                    forward_rate: self.links.r2r_rate[a.receiver][a.helper],
                });
            }
        }

        let instance = TpsaInstance::new(tasks, self.backlog.clone(), self.params.clone())?;
        let schedule = tpsa_schedule(&instance, &self.tpsa)?;

        let mut dwell_violations = 0;
        for (i, task) in instance.tasks.iter().enumerate() {
            let service = schedule.service_s(i);
            let riders = vehicles_in_zone(&self.pending, task.zone);
            let deliver = task.deliver_rsu();
            let delivered = riders.iter().all(|&id| {
                self.fleet
                    .zone_after(&self.world, &self.scenario, id, service)
                    .is_some_and(|m| self.links.deliver_ok[m][deliver])
            });
            let offload = schedule.timings[i].offload_s;
            let outran = riders.iter().any(|&id| {
                self.observed
                    .iter()
                    .find(|o| o.id == id)
                    .is_some_and(|o| offload > o.dwell_s)
            });
            if outran {
                dwell_violations += 1;
                log::debug!(
                    "slot {}: zone {} offload {:.3}s exceeds a vehicle's zone dwell time",
                    self.slot,
                    task.zone,
                    offload
                );
            }
            records.push(TaskRecord {
                zone: task.zone,
                workload_bits: task.workload_bits,
                receiver: task.receiver,
                helper: task.helper,
                deliver_rsu: deliver,
                vehicles: riders.len(),
                service_s: Some(service),
                partition: Some(schedule.partition[i]),
                failure: (!delivered).then_some(Failure::Delivery),
                cost: if delivered {
                    service
                } else {
                    self.scenario.penalty_per_bit() * task.workload_bits
                },
            });
        }
        records.sort_by_key(|r| r.zone);
        let cost = records.iter().map(|r| r.cost).sum();

        let slot = self.slot;
        self.backlog = schedule.backlog_out;
        self.fleet
            .advance(&self.world, &self.scenario, self.scenario.compute.slot_length_s);
        self.slot += 1;
        self.observed = self.fleet.observe(&self.world);
        self.pending = generate_tasks(&self.observed, &self.scenario, &mut self.rng);

        Ok(SlotOutcome {
            slot,
            cost,
            records,
            next_state: self.state(),
            dwell_violations,
        })
    }
}
