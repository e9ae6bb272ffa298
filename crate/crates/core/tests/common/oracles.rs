//! Scheduling oracles written independently of the library's scheduler.

use edgecollab::harness::BenchConfig;
use edgecollab::latency::{ComputeParams, DeliverVia, Task};
use edgecollab::tpsa::{optimal_partition, TpsaInstance};
use rand::Rng;

pub const MBIT: f64 = 1e6;

/// Per-task `(receiver completion, helper completion, service)` after
/// running every RSU's queue in the given order.
pub fn propagate(inst: &TpsaInstance, x: &[f64], order: &[Vec<usize>]) -> Vec<(f64, f64, f64)> {
    let p = &inst.params;
    let mut rc = vec![f64::NAN; inst.tasks.len()];
    let mut hc = vec![f64::NAN; inst.tasks.len()];
    for (r, seq) in order.iter().enumerate() {
        let mut q = inst.backlog_in[r];
        for &i in seq {
            let t = &inst.tasks[i];
            let w = t.workload_bits;
            let t_off = w / t.offload_rate;
            let split = t.receiver != t.helper;
            let (share, ready) = if !split || t.receiver == r {
                (if split { x[i] } else { 1.0 }, t_off)
            } else {
                (1.0 - x[i], t_off + (1.0 - x[i]) * w / t.forward_rate)
            };
            if share > 0.0 {
                q = q.max(ready) + share * w * p.cycles_per_bit / p.rsu_capacity[r];
            }
            if !split || t.receiver == r {
                rc[i] = q;
            }
            if !split || t.helper == r {
                hc[i] = q;
            }
        }
    }
    (0..inst.tasks.len())
        .map(|i| {
            let t = &inst.tasks[i];
            let s = if t.receiver == t.helper || x[i] >= 1.0 {
                rc[i]
            } else if x[i] <= 0.0 {
                hc[i]
            } else {
                rc[i].max(hc[i])
            };
            (rc[i], hc[i], s)
        })
        .collect()
}

pub fn total(inst: &TpsaInstance, x: &[f64], order: &[Vec<usize>]) -> f64 {
    propagate(inst, x, order).iter().map(|v| v.2).sum()
}

/// Service time of one task on the given queues as a function of its split.
pub fn single_service(t: &Task, q_r: f64, q_h: f64, p: &ComputeParams, x: f64) -> f64 {
    let w = t.workload_bits;
    let t_off = w / t.offload_rate;
    let r_done = q_r.max(t_off) + x * w * p.cycles_per_bit / p.rsu_capacity[t.receiver];
    let h_done = q_h.max(t_off + (1.0 - x) * w / t.forward_rate) + (1.0 - x) * w * p.cycles_per_bit / p.rsu_capacity[t.helper];
    if x >= 1.0 {
        r_done
    } else if x <= 0.0 {
        h_done
    } else {
        r_done.max(h_done)
    }
}

/// Minimum service time over splits: ternary search on the interior plus
/// both endpoints.
pub fn best_single_service(t: &Task, q_r: f64, q_h: f64, p: &ComputeParams) -> f64 {
    let f = |x: f64| single_service(t, q_r, q_h, p, x);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if f(a) <= f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    f(0.5 * (lo + hi)).min(f(0.0)).min(f(1.0))
}

fn for_each_permutation(n: usize, mut visit: impl FnMut(&[usize])) {
    // Heap's algorithm
    let mut a: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    visit(&a);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            visit(&a);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Splits and per-RSU orders produced by committing tasks in `seq`.
pub fn commit_sequence(inst: &TpsaInstance, seq: &[usize]) -> (Vec<f64>, Vec<Vec<usize>>) {
    let mut psi = inst.backlog_in.clone();
    let mut x = vec![1.0; inst.tasks.len()];
    let mut order = vec![Vec::new(); psi.len()];
    for &i in seq {
        let t = &inst.tasks[i];
        x[i] = optimal_partition(t, psi[t.receiver], psi[t.helper], &inst.params);
        let one = TpsaInstance {
            tasks: vec![t.clone()],
            backlog_in: psi.clone(),
            params: inst.params.clone(),
        };
        let mut o = vec![Vec::new(); psi.len()];
        o[t.receiver].push(0);
        if t.helper != t.receiver {
            o[t.helper].push(0);
        }
        let (rc, hc, _) = propagate(&one, &[x[i]], &o)[0];
        psi[t.receiver] = rc;
        psi[t.helper] = hc;
        order[t.receiver].push(i);
        if t.helper != t.receiver {
            order[t.helper].push(i);
        }
    }
    (x, order)
}

/// Exhaustive minimum of total service time over commitment sequences,
/// and the number of sequences visited.
pub fn exhaustive_min(inst: &TpsaInstance) -> (f64, usize) {
    let mut best = f64::INFINITY;
    let mut count = 0;
    for_each_permutation(inst.tasks.len(), |seq| {
        count += 1;
        let (x, order) = commit_sequence(inst, seq);
        best = best.min(total(inst, &x, &order));
    });
    (best, count)
}

/// Instance from the benchmark distribution.
pub fn bench_instance(n: usize, rng: &mut impl Rng) -> TpsaInstance {
    BenchConfig::default().instance(n, rng)
}

/// One server, tasks of random size offloaded at a common rate.
pub fn single_server_instance(n: usize, rng: &mut impl Rng) -> TpsaInstance {
    let tasks = (0..n)
        .map(|z| Task {
            zone: z,
            workload_bits: rng.random_range(1.0..21.0) * MBIT,
            receiver: 0,
            helper: 0,
            deliver: DeliverVia::Receiver,
            offload_rate: 6.0 * MBIT,
            forward_rate: f64::INFINITY,
        })
        .collect();
    let backlog = rng.random_range(0.0..3.0);
    TpsaInstance::new(tasks, vec![backlog], ComputeParams::uniform(1, 8e9, 4000.0, 1.0)).unwrap()
}

/// Identical servers, receiver and helper always distinct, and every
/// queue long enough to outlast any offload plus forward.
pub fn long_queue_instance(n: usize, rng: &mut impl Rng) -> TpsaInstance {
    let servers = 5;
    let tasks: Vec<Task> = (0..n)
        .map(|z| {
            let receiver = rng.random_range(0..servers);
            let helper = (receiver + rng.random_range(1..servers)) % servers;
            Task {
                zone: z,
                workload_bits: rng.random_range(1.0..21.0) * MBIT,
                receiver,
                helper,
                deliver: DeliverVia::Receiver,
                offload_rate: 6.0 * MBIT,
                forward_rate: 8.0 * MBIT,
            }
        })
        .collect();
    let floor = tasks
        .iter()
        .map(|t| t.workload_bits / t.offload_rate + t.workload_bits / t.forward_rate)
        .fold(0.0, f64::max);
    let backlog = (0..servers).map(|_| floor + rng.random_range(0.0..4.0)).collect();
    TpsaInstance::new(tasks, backlog, ComputeParams::uniform(servers, 8e9, 4000.0, 1.0)).unwrap()
}

/// Shortest-first order on a single server.
pub fn shortest_first(inst: &TpsaInstance) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..inst.tasks.len()).collect();
    idx.sort_by(|&a, &b| inst.tasks[a].workload_bits.total_cmp(&inst.tasks[b].workload_bits));
    idx
}
