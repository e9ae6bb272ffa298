//! Service-delay pipeline: offload, forward, queue, process.
//!
//! A task's workload is split between its receiver (`x`) and helper (`1 - x`).
//! Given the split, completion on each server depends only on that server's
//! predecessor, so every RSU's queue can be propagated independently.
//!
//! A server that receives a zero share of a task does no work for it: its
//! queue passes through unchanged and it does not bound the service time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputeParams {
    /// CPU-cycle frequency of each RSU, cycles/s.
    pub rsu_capacity: Vec<f64>,
    pub cycles_per_bit: f64,
    pub slot_length_s: f64,
}

impl ComputeParams {
    pub fn uniform(n_rsus: usize, capacity: f64, cycles_per_bit: f64, slot_length_s: f64) -> Self {
        Self {
            rsu_capacity: vec![capacity; n_rsus],
            cycles_per_bit,
            slot_length_s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rsu_capacity.is_empty() || self.rsu_capacity.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::Config("RSU capacities must be positive".into()));
        }
        if !(self.cycles_per_bit > 0.0) || !(self.slot_length_s > 0.0) {
            return Err(Error::Config(
                "cycles per bit and slot length must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn n_rsus(&self) -> usize {
        self.rsu_capacity.len()
    }

    /// Seconds for `rsu` to process `bits` on its own.
    pub fn processing_time(&self, rsu: usize, bits: f64) -> f64 {
        self.cycles_per_bit * bits / self.rsu_capacity[rsu]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliverVia {
    Receiver,
    Helper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Receiver,
    Helper,
}

/// Aggregated workload of one zone in one slot, with its server choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub zone: usize,
    pub workload_bits: f64,
    pub receiver: usize,
    pub helper: usize,
    pub deliver: DeliverVia,
    /// Vehicle-to-receiver rate, bit/s.
    pub offload_rate: f64,
    /// Receiver-to-helper rate, bit/s (infinite when they coincide).
    pub forward_rate: f64,
}

impl Task {
    pub fn is_split(&self) -> bool {
        self.receiver != self.helper
    }

    pub fn deliver_rsu(&self) -> usize {
        match self.deliver {
            DeliverVia::Receiver => self.receiver,
            DeliverVia::Helper => self.helper,
        }
    }

    /// Servers the task occupies, deduplicated.
    pub fn servers(&self) -> impl Iterator<Item = usize> {
        let second = self.is_split().then_some(self.helper);
        std::iter::once(self.receiver).chain(second)
    }

    fn validate(&self, n_rsus: usize) -> Result<()> {
        if !(self.workload_bits >= 0.0) || !self.workload_bits.is_finite() {
            return Err(Error::Structure(format!(
                "task for zone {} has invalid workload {}",
                self.zone, self.workload_bits
            )));
        }
        if self.receiver >= n_rsus || self.helper >= n_rsus {
            return Err(Error::Structure(format!(
                "task for zone {} references RSU outside 0..{n_rsus}",
                self.zone
            )));
        }
        Ok(())
    }
}

/// Offloading delay `W / rate`.
pub fn offload_delay(task: &Task) -> Result<f64> {
    if task.workload_bits == 0.0 {
        return Ok(0.0);
    }
    if !(task.offload_rate > 0.0) {
        return Err(Error::Domain(format!(
            "zone {} has no usable offloading rate",
            task.zone
        )));
    }
    Ok(task.workload_bits / task.offload_rate)
}

/// Delay to forward the helper's share, zero on a self-link.
pub fn forward_delay(task: &Task, x: f64) -> f64 {
    if !task.is_split() || x >= 1.0 {
        return 0.0;
    }
    (1.0 - x) * task.workload_bits / task.forward_rate
}

/// Share of the workload a server processes.
pub fn share(task: &Task, role: Role, x: f64) -> f64 {
    if !task.is_split() {
        return 1.0;
    }
    match role {
        Role::Receiver => x,
        Role::Helper => 1.0 - x,
    }
}

pub fn processing_delay(task: &Task, role: Role, x: f64, params: &ComputeParams) -> f64 {
    let rsu = match role {
        Role::Receiver => task.receiver,
        Role::Helper => task.helper,
    };
    params.processing_time(rsu, share(task, role, x) * task.workload_bits)
}

/// `max{arrival, queue} + processing`.
pub fn server_completion(arrival: f64, queue: f64, processing: f64) -> f64 {
    arrival.max(queue) + processing
}

/// Completion of one side of a task given the queue it finds on its server.
pub fn side_completion(
    task: &Task,
    role: Role,
    x: f64,
    queue: f64,
    params: &ComputeParams,
) -> Result<f64> {
    let s = share(task, role, x);
    if s <= 0.0 {
        return Ok(queue);
    }
    let offload = offload_delay(task)?;
    let arrival = match role {
        Role::Receiver => offload,
        Role::Helper => offload + forward_delay(task, x),
    };
    Ok(server_completion(arrival, queue, processing_delay(task, role, x, params)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskTiming {
    pub offload_s: f64,
    pub forward_s: f64,
    pub receiver_completion_s: f64,
    pub helper_completion_s: f64,
    pub service_s: f64,
}

/// Service time: the later of the two completions, counting only servers
/// that received work.
pub fn service_time(task: &Task, x: f64, receiver_done: f64, helper_done: f64) -> f64 {
    if !task.is_split() {
        return receiver_done;
    }
    let mut t = f64::NEG_INFINITY;
    if x > 0.0 {
        t = t.max(receiver_done);
    }
    if x < 1.0 {
        t = t.max(helper_done);
    }
    t
}

/// Places one task on servers with the given queues and split.
pub fn place(task: &Task, x: f64, queue_r: f64, queue_h: f64, params: &ComputeParams) -> Result<TaskTiming> {
    let x = if task.is_split() { x } else { 1.0 };
    let offload_s = offload_delay(task)?;
    let forward_s = forward_delay(task, x);
    if !task.is_split() {
        let done = side_completion(task, Role::Receiver, x, queue_r, params)?;
        return Ok(TaskTiming {
            offload_s,
            forward_s,
            receiver_completion_s: done,
            helper_completion_s: done,
            service_s: done,
        });
    }
    let r = side_completion(task, Role::Receiver, x, queue_r, params)?;
    let h = side_completion(task, Role::Helper, x, queue_h, params)?;
    Ok(TaskTiming {
        offload_s,
        forward_s,
        receiver_completion_s: r,
        helper_completion_s: h,
        service_s: service_time(task, x, r, h),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// Receiver share per task, indexed like the batch.
    pub partition: Vec<f64>,
    /// Execution order per RSU (task indices).
    pub order: Vec<Vec<usize>>,
    pub timings: Vec<TaskTiming>,
    /// Residual work per RSU carried into the next slot.
    pub backlog_out: Vec<f64>,
}

impl Schedule {
    pub fn total_service_s(&self) -> f64 {
        self.timings.iter().map(|t| t.service_s).sum()
    }

    pub fn service_s(&self, task: usize) -> f64 {
        self.timings[task].service_s
    }

    pub fn is_empty(&self) -> bool {
        self.timings.is_empty()
    }
}

/// Next-slot backlog `max{finish - slot, 0}`.
pub fn carry_backlog(finish: f64, slot_length_s: f64) -> f64 {
    (finish - slot_length_s).max(0.0)
}

/// Checks that `order[r]` lists exactly the tasks using RSU `r`, once each.
pub fn validate_orders(tasks: &[Task], order: &[Vec<usize>], n_rsus: usize) -> Result<()> {
    if order.len() != n_rsus {
        return Err(Error::Shape {
            expected: n_rsus,
            actual: order.len(),
            context: "per-RSU execution orders",
        });
    }
    let mut expected: Vec<Vec<usize>> = vec![Vec::new(); n_rsus];
    for (i, t) in tasks.iter().enumerate() {
        for r in t.servers() {
            expected[r].push(i);
        }
    }
    for (r, (want, got)) in expected.iter().zip(order).enumerate() {
        let mut sorted = got.clone();
        sorted.sort_unstable();
        if &sorted != want {
            return Err(Error::Structure(format!(
                "order on RSU {r} is not a permutation of its assigned tasks"
            )));
        }
    }
    Ok(())
}

/// Propagates queues through each RSU's execution order.
pub fn completion_times(
    tasks: &[Task],
    partition: &[f64],
    order: &[Vec<usize>],
    backlog_in: &[f64],
    params: &ComputeParams,
) -> Result<Schedule> {
    let n_rsus = params.n_rsus();
    if partition.len() != tasks.len() {
        return Err(Error::Shape {
            expected: tasks.len(),
            actual: partition.len(),
            context: "partition ratios",
        });
    }
    if backlog_in.len() != n_rsus {
        return Err(Error::Shape {
            expected: n_rsus,
            actual: backlog_in.len(),
            context: "backlog vector",
        });
    }
    for t in tasks {
        t.validate(n_rsus)?;
    }
    if partition.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::Structure("partition ratio outside [0, 1]".into()));
    }
    validate_orders(tasks, order, n_rsus)?;

    let partition: Vec<f64> = tasks
        .iter()
        .zip(partition)
        .map(|(t, &x)| if t.is_split() { x } else { 1.0 })
        .collect();
    let mut receiver_done = vec![f64::NAN; tasks.len()];
    let mut helper_done = vec![f64::NAN; tasks.len()];
    let mut backlog_out = Vec::with_capacity(n_rsus);

    for (r, seq) in order.iter().enumerate() {
        let mut queue = backlog_in[r];
        for &i in seq {
            let t = &tasks[i];
            let x = partition[i];
            if !t.is_split() {
                queue = side_completion(t, Role::Receiver, x, queue, params)?;
                receiver_done[i] = queue;
                helper_done[i] = queue;
            } else if t.receiver == r {
                queue = side_completion(t, Role::Receiver, x, queue, params)?;
                receiver_done[i] = queue;
            } else {
                queue = side_completion(t, Role::Helper, x, queue, params)?;
                helper_done[i] = queue;
            }
        }
        backlog_out.push(carry_backlog(queue, params.slot_length_s));
    }

    let timings = tasks
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let x = partition[i];
            Ok(TaskTiming {
                offload_s: offload_delay(t)?,
                forward_s: forward_delay(t, x),
                receiver_completion_s: receiver_done[i],
                helper_completion_s: helper_done[i],
                service_s: service_time(t, x, receiver_done[i], helper_done[i]),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Schedule {
        partition,
        order: order.to_vec(),
        timings,
        backlog_out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MBIT: f64 = 1e6;

    fn params() -> ComputeParams {
        ComputeParams::uniform(2, 8e9, 4000.0, 1.0)
    }

    fn split_task(w_mbit: f64) -> Task {
        Task {
            zone: 0,
            workload_bits: w_mbit * MBIT,
            receiver: 0,
            helper: 1,
            deliver: DeliverVia::Receiver,
            offload_rate: 6.0 * MBIT,
            forward_rate: 8.0 * MBIT,
        }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9 * b.abs().max(1.0)
    }

    #[test]
    fn offload_examples() {
        let t = split_task(8.0);
        assert!(close(offload_delay(&t).unwrap(), 8.0 / 6.0));
        let empty = Task { workload_bits: 0.0, ..t.clone() };
        assert_eq!(offload_delay(&empty).unwrap(), 0.0);
        let fast = Task { offload_rate: 12.0 * MBIT, ..t.clone() };
        assert!(close(offload_delay(&fast).unwrap() * 2.0, offload_delay(&t).unwrap()));
        let dead = Task { offload_rate: 0.0, ..t };
        assert!(offload_delay(&dead).is_err());
    }

    #[test]
    fn forward_examples() {
        let t = split_task(8.0);
        assert!(close(forward_delay(&t, 5.0 / 9.0), 4.0 / 9.0));
        assert_eq!(forward_delay(&t, 1.0), 0.0);
        let solo = Task { helper: 0, forward_rate: f64::INFINITY, ..t };
        assert_eq!(forward_delay(&solo, 0.3), 0.0);
    }

    #[test]
    fn processing_examples() {
        let p = params();
        let t = split_task(8.0);
        let solo = Task { helper: 0, ..t.clone() };
        assert!(close(processing_delay(&solo, Role::Receiver, 0.2, &p), 4.0));
        assert_eq!(processing_delay(&t, Role::Helper, 1.0, &p), 0.0);
        assert!(close(processing_delay(&t, Role::Receiver, 5.0 / 9.0, &p), 20.0 / 9.0));
    }

    #[test]
    fn worked_single_task() {
        let p = params();
        let t = split_task(8.0);
        let s = completion_times(&[t], &[5.0 / 9.0], &[vec![0], vec![0]], &[0.0, 0.0], &p).unwrap();
        let tm = s.timings[0];
        let expected = 4.0 / 3.0 + 20.0 / 9.0;
        assert!(close(tm.receiver_completion_s, expected));
        assert!(close(tm.helper_completion_s, expected));
        assert!(close(tm.service_s, expected));
        assert!((tm.service_s - 3.5556).abs() < 1e-4);
        // 3.5556 - 1 s slot
        assert!(close(s.backlog_out[0], expected - 1.0));
    }

    #[test]
    fn unsplit_task_is_offload_plus_processing() {
        let p = params();
        let t = Task { helper: 0, ..split_task(8.0) };
        let s = completion_times(&[t], &[1.0], &[vec![0], vec![]], &[0.0, 0.0], &p).unwrap();
        assert!(close(s.service_s(0), 8.0 / 6.0 + 4.0));
        assert_eq!(s.backlog_out[1], 0.0);
    }

    #[test]
    fn backlog_clamp() {
        assert!(close(carry_backlog(2.5, 1.0), 1.5));
        assert_eq!(carry_backlog(0.4, 1.0), 0.0);
    }

    #[test]
    fn idle_rsu_backlog_decays() {
        let p = params();
        let s = completion_times(&[], &[], &[vec![], vec![]], &[2.5, 0.3], &p).unwrap();
        assert_eq!(s.backlog_out, vec![1.5, 0.0]);
    }

    #[test]
    fn rejects_bad_orders() {
        let p = params();
        let t = split_task(8.0);
        let err = completion_times(std::slice::from_ref(&t), &[0.5], &[vec![0], vec![]], &[0.0, 0.0], &p);
        assert!(matches!(err, Err(Error::Structure(_))));
        let dup = completion_times(std::slice::from_ref(&t), &[0.5], &[vec![0, 0], vec![0]], &[0.0, 0.0], &p);
        assert!(dup.is_err());
        let shape = completion_times(&[t], &[0.5], &[vec![0]], &[0.0, 0.0], &p);
        assert!(matches!(shape, Err(Error::Shape { .. })));
    }

    #[test]
    fn queue_follows_predecessor_completion() {
        let p = params();
        let a = Task { helper: 0, ..split_task(2.0) };
        let b = Task { helper: 0, zone: 1, ..split_task(6.0) };
        let s = completion_times(&[a, b], &[1.0, 1.0], &[vec![0, 1], vec![]], &[0.0, 0.0], &p).unwrap();
        // a: 2/6 + 1 = 1.3333; b: max(1, 1.3333) + 3 = 4.3333
        assert!(close(s.service_s(0), 1.0 / 3.0 + 1.0));
        assert!(close(s.service_s(1), 4.0 + 1.0 / 3.0));
        assert!(close(s.total_service_s(), 17.0 / 3.0));
    }

    #[test]
    fn zero_share_server_passes_queue_through() {
        let p = params();
        let t = split_task(8.0);
        let s = completion_times(&[t], &[1.0], &[vec![0], vec![0]], &[0.0, 5.0], &p).unwrap();
        assert!(close(s.service_s(0), 8.0 / 6.0 + 4.0));
        assert_eq!(s.timings[0].helper_completion_s, 5.0);
        assert_eq!(s.backlog_out[1], 4.0);
    }
}
