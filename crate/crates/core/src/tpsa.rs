//! Task partition and scheduling (TPSA).
//!
//! [`optimal_partition`] gives the split that equalizes a task's receiver and
//! helper completions given the queues it finds. [`tpsa_schedule`] commits
//! tasks greedily, shortest resulting completion first, re-deriving every
//! split against the current queues at each round. [`brute_force_schedule`]
//! and [`random_schedule`] apply the same split rule along every (or a random)
//! global commitment sequence and serve as oracles.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latency::{self, ComputeParams, Schedule, Task, TaskTiming};

pub const DEFAULT_BRUTE_FORCE_CAP: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TpsaOptions {
    /// Score a fully-local task by its helper's completion (and a fully
    /// forwarded one by its receiver's). Off by default: that scores the
    /// idle server.
    pub score_as_printed: bool,
    pub brute_force_cap: usize,
}

impl Default for TpsaOptions {
    fn default() -> Self {
        Self {
            score_as_printed: false,
            brute_force_cap: DEFAULT_BRUTE_FORCE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TpsaInstance {
    pub tasks: Vec<Task>,
    pub backlog_in: Vec<f64>,
    pub params: ComputeParams,
}

impl TpsaInstance {
    /// Builds an instance; tasks with zero workload are dropped.
    pub fn new(tasks: Vec<Task>, backlog_in: Vec<f64>, params: ComputeParams) -> Result<Self> {
        if backlog_in.len() != params.n_rsus() {
            return Err(Error::Shape {
                expected: params.n_rsus(),
                actual: backlog_in.len(),
                context: "backlog vector",
            });
        }
        if backlog_in.iter().any(|b| !(*b >= 0.0)) {
            return Err(Error::Structure("backlog must be non-negative".into()));
        }
        let tasks = tasks.into_iter().filter(|t| t.workload_bits != 0.0).collect();
        Ok(Self {
            tasks,
            backlog_in,
            params,
        })
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

/// Split of `task` that equalizes receiver and helper completions, clamped to [0, 1].
pub fn optimal_partition(task: &Task, queue_r: f64, queue_h: f64, params: &ComputeParams) -> f64 {
    if !task.is_split() {
        return 1.0;
    }
    let w = task.workload_bits;
    let chi = params.cycles_per_bit;
    let c_r = params.rsu_capacity[task.receiver];
    let c_h = params.rsu_capacity[task.helper];
    let t_off = w / task.offload_rate;
    let start_r = queue_r.max(t_off);
    let proc_r = chi * w / c_r;
    let proc_h = chi * w / c_h;
    let fwd = w / task.forward_rate;

    let lhs = queue_h - start_r;
    let rhs = proc_r - chi * task.forward_rate * (queue_h - t_off) * (1.0 / c_r + 1.0 / c_h);
    let x_hat = if lhs >= rhs {
        // helper queue outlasts the forwarded data
        (queue_h - start_r + proc_h) / (proc_r + proc_h)
    } else {
        (t_off - start_r + proc_h + fwd) / (proc_r + proc_h + fwd)
    };
    x_hat.clamp(0.0, 1.0)
}

struct Committed {
    x: f64,
    timing: TaskTiming,
}

fn commit_candidate(inst: &TpsaInstance, psi: &[f64], i: usize) -> Result<Committed> {
    let t = &inst.tasks[i];
    let x = optimal_partition(t, psi[t.receiver], psi[t.helper], &inst.params);
    let timing = latency::place(t, x, psi[t.receiver], psi[t.helper], &inst.params)?;
    Ok(Committed { x, timing })
}

fn apply(task: &Task, timing: &TaskTiming, psi: &mut [f64]) {
    psi[task.receiver] = timing.receiver_completion_s;
    if task.is_split() {
        psi[task.helper] = timing.helper_completion_s;
    }
}

fn push_order(task: &Task, i: usize, order: &mut [Vec<usize>]) {
    for r in task.servers() {
        order[r].push(i);
    }
}

fn score(task: &Task, c: &Committed, as_printed: bool) -> f64 {
    let tm = &c.timing;
    if !task.is_split() {
        return tm.receiver_completion_s;
    }
    if c.x >= 1.0 {
        if as_printed {
            tm.helper_completion_s
        } else {
            tm.receiver_completion_s
        }
    } else if c.x <= 0.0 {
        if as_printed {
            tm.receiver_completion_s
        } else {
            tm.helper_completion_s
        }
    } else {
        0.5 * (tm.receiver_completion_s + tm.helper_completion_s)
    }
}

/// Greedy partition-and-schedule; returns the schedule and the number of
/// candidate evaluations performed.
pub fn tpsa_schedule_counted(inst: &TpsaInstance, opts: &TpsaOptions) -> Result<(Schedule, usize)> {
    let n = inst.len();
    let mut psi = inst.backlog_in.clone();
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut order = vec![Vec::new(); inst.params.n_rsus()];
    let mut partition = vec![1.0; n];
    let mut iterations = 0;

    while !remaining.is_empty() {
        let mut best: Option<(usize, f64, Committed)> = None;
        for (slot, &i) in remaining.iter().enumerate() {
            iterations += 1;
            let c = commit_candidate(inst, &psi, i)?;
            let q = score(&inst.tasks[i], &c, opts.score_as_printed);
            let better = match &best {
                None => true,
                Some((b, bq, _)) => {
                    q < *bq || (q == *bq && inst.tasks[i].zone < inst.tasks[remaining[*b]].zone)
                }
            };
            if better {
                best = Some((slot, q, c));
            }
        }
        let (slot, _, c) = best.expect("remaining is non-empty");
        let i = remaining.remove(slot);
        let t = &inst.tasks[i];
        apply(t, &c.timing, &mut psi);
        push_order(t, i, &mut order);
        partition[i] = c.x;
    }

    let schedule = latency::completion_times(&inst.tasks, &partition, &order, &inst.backlog_in, &inst.params)?;
    debug_assert!(iterations <= n * (n + 1) / 2);
    Ok((schedule, iterations))
}

pub fn tpsa_schedule(inst: &TpsaInstance, opts: &TpsaOptions) -> Result<Schedule> {
    tpsa_schedule_counted(inst, opts).map(|(s, _)| s)
}

/// Commits tasks in the given global sequence with equalizing splits.
pub fn schedule_in_sequence(inst: &TpsaInstance, sequence: &[usize]) -> Result<Schedule> {
    let n = inst.len();
    let mut seen = vec![false; n];
    if sequence.len() != n || sequence.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
        return Err(Error::Structure("sequence is not a permutation of the tasks".into()));
    }
    let mut psi = inst.backlog_in.clone();
    let mut order = vec![Vec::new(); inst.params.n_rsus()];
    let mut partition = vec![1.0; n];
    for &i in sequence {
        let c = commit_candidate(inst, &psi, i)?;
        let t = &inst.tasks[i];
        apply(t, &c.timing, &mut psi);
        push_order(t, i, &mut order);
        partition[i] = c.x;
    }
    latency::completion_times(&inst.tasks, &partition, &order, &inst.backlog_in, &inst.params)
}

struct Search<'a> {
    inst: &'a TpsaInstance,
    psi: Vec<f64>,
    used: Vec<bool>,
    prefix: Vec<usize>,
    best_total: f64,
    best_seq: Vec<usize>,
    leaves: usize,
}

impl Search<'_> {
    fn descend(&mut self, acc: f64) -> Result<()> {
        let n = self.inst.len();
        if self.prefix.len() == n {
            self.leaves += 1;
            if acc < self.best_total {
                self.best_total = acc;
                self.best_seq.clone_from(&self.prefix);
            }
            return Ok(());
        }
        for i in 0..n {
            if self.used[i] {
                continue;
            }
            let t = &self.inst.tasks[i];
            let saved = (self.psi[t.receiver], self.psi[t.helper]);
            let c = commit_candidate(self.inst, &self.psi, i)?;
            apply(t, &c.timing, &mut self.psi);
            self.used[i] = true;
            self.prefix.push(i);
            self.descend(acc + c.timing.service_s)?;
            self.prefix.pop();
            self.used[i] = false;
            self.psi[t.helper] = saved.1;
            self.psi[t.receiver] = saved.0;
        }
        Ok(())
    }
}

/// Exhaustive search over global commitment sequences; returns the best
/// schedule and the number of complete sequences evaluated.
pub fn brute_force_counted(inst: &TpsaInstance, cap: usize) -> Result<(Schedule, usize)> {
    let n = inst.len();
    if n > cap {
        return Err(Error::TooLarge { tasks: n, cap });
    }
    let mut search = Search {
        inst,
        psi: inst.backlog_in.clone(),
        used: vec![false; n],
        prefix: Vec::with_capacity(n),
        best_total: f64::INFINITY,
        best_seq: Vec::new(),
        leaves: 0,
    };
    search.descend(0.0)?;
    let schedule = schedule_in_sequence(inst, &search.best_seq)?;
    Ok((schedule, search.leaves))
}

pub fn brute_force_schedule(inst: &TpsaInstance, cap: usize) -> Result<Schedule> {
    brute_force_counted(inst, cap).map(|(s, _)| s)
}

/// Uniformly random commitment sequence from a seeded generator.
pub fn random_schedule(inst: &TpsaInstance, seed: u64) -> Result<Schedule> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seq: Vec<usize> = (0..inst.len()).collect();
    seq.shuffle(&mut rng);
    schedule_in_sequence(inst, &seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latency::DeliverVia;

    const MBIT: f64 = 1e6;

    fn params(n: usize) -> ComputeParams {
        ComputeParams::uniform(n, 8e9, 4000.0, 1.0)
    }

    fn task(zone: usize, w_mbit: f64, receiver: usize, helper: usize) -> Task {
        Task {
            zone,
            workload_bits: w_mbit * MBIT,
            receiver,
            helper,
            deliver: DeliverVia::Receiver,
            offload_rate: 6.0 * MBIT,
            forward_rate: if receiver == helper { f64::INFINITY } else { 8.0 * MBIT },
        }
    }

    #[test]
    fn worked_partition() {
        let p = params(2);
        let t = task(0, 8.0, 0, 1);
        let x = optimal_partition(&t, 0.0, 0.0, &p);
        assert!((x - 5.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_limit_is_half() {
        let p = params(2);
        let mut t = task(0, 8.0, 0, 1);
        t.forward_rate = 1e30;
        let x = optimal_partition(&t, 0.0, 0.0, &p);
        assert!((x - 0.5).abs() < 1e-9);
    }

    #[test]
    fn long_helper_queue_clamps_to_one() {
        let p = params(2);
        let t = task(0, 8.0, 0, 1);
        // receiver finishes at 1.333 + 4 = 5.333 s, helper busy until 10 s
        assert_eq!(optimal_partition(&t, 0.0, 10.0, &p), 1.0);
    }

    #[test]
    fn long_receiver_queue_clamps_to_zero() {
        let p = params(2);
        let t = task(0, 8.0, 0, 1);
        // helper alone: 1.333 + 1 + 4 = 6.333 s < receiver queue 20 s
        assert_eq!(optimal_partition(&t, 20.0, 0.0, &p), 0.0);
    }

    #[test]
    fn degenerate_pair_is_unsplit() {
        let p = params(2);
        assert_eq!(optimal_partition(&task(0, 8.0, 1, 1), 3.0, 3.0, &p), 1.0);
    }

    #[test]
    fn single_task_tpsa() {
        let inst = TpsaInstance::new(vec![task(0, 8.0, 0, 1)], vec![0.0; 2], params(2)).unwrap();
        let s = tpsa_schedule(&inst, &TpsaOptions::default()).unwrap();
        assert!((s.partition[0] - 5.0 / 9.0).abs() < 1e-12);
        assert!((s.service_s(0) - 32.0 / 9.0).abs() < 1e-12);
        assert_eq!(s.order, vec![vec![0], vec![0]]);
    }

    #[test]
    fn two_tasks_on_one_server_shortest_first() {
        let inst = TpsaInstance::new(
            vec![task(0, 6.0, 0, 0), task(1, 2.0, 0, 0)],
            vec![0.0],
            params(1),
        )
        .unwrap();
        let s = tpsa_schedule(&inst, &TpsaOptions::default()).unwrap();
        assert_eq!(s.order[0], vec![1, 0]);
        assert!((s.total_service_s() - 17.0 / 3.0).abs() < 1e-12);
        let reverse = schedule_in_sequence(&inst, &[0, 1]).unwrap();
        assert!((reverse.total_service_s() - 9.0).abs() < 1e-12);
        let bf = brute_force_schedule(&inst, 9).unwrap();
        assert_eq!(bf.order[0], vec![1, 0]);
    }

    #[test]
    fn empty_instance() {
        let inst = TpsaInstance::new(vec![task(0, 0.0, 0, 1)], vec![2.5, 0.5], params(2)).unwrap();
        assert!(inst.is_empty());
        let (s, iters) = tpsa_schedule_counted(&inst, &TpsaOptions::default()).unwrap();
        assert!(s.is_empty());
        assert_eq!(iters, 0);
        assert_eq!(s.backlog_out, vec![1.5, 0.0]);
    }

    #[test]
    fn iteration_count_is_triangular() {
        let tasks = (0..6).map(|z| task(z, 1.0 + z as f64, z % 3, (z + 1) % 3)).collect();
        let inst = TpsaInstance::new(tasks, vec![0.0; 3], params(3)).unwrap();
        let (_, iters) = tpsa_schedule_counted(&inst, &TpsaOptions::default()).unwrap();
        assert_eq!(iters, 21);
    }

    #[test]
    fn brute_force_respects_cap() {
        let tasks = (0..4).map(|z| task(z, 1.0, 0, 0)).collect();
        let inst = TpsaInstance::new(tasks, vec![0.0], params(1)).unwrap();
        assert!(matches!(brute_force_schedule(&inst, 3), Err(Error::TooLarge { tasks: 4, cap: 3 })));
        let (_, leaves) = brute_force_counted(&inst, 4).unwrap();
        assert_eq!(leaves, 24);
    }

    #[test]
    fn random_is_seeded() {
        let tasks = (0..5).map(|z| task(z, 1.0 + z as f64, z % 2, (z + 1) % 3)).collect();
        let inst = TpsaInstance::new(tasks, vec![0.0; 3], params(3)).unwrap();
        assert_eq!(random_schedule(&inst, 7).unwrap(), random_schedule(&inst, 7).unwrap());
    }

    #[test]
    fn sequence_must_be_permutation() {
        let tasks = (0..2).map(|z| task(z, 1.0, 0, 0)).collect();
        let inst = TpsaInstance::new(tasks, vec![0.0], params(1)).unwrap();
        assert!(schedule_in_sequence(&inst, &[0, 0]).is_err());
        assert!(schedule_in_sequence(&inst, &[0]).is_err());
    }

    #[test]
    fn printed_scoring_can_differ() {
        // Task 0 is fully local (helper queue long); printed scoring ranks it
        // by the idle helper's queue and postpones it.
        let tasks = vec![task(0, 2.0, 0, 1), task(1, 8.0, 2, 0)];
        let inst = TpsaInstance::new(tasks, vec![0.0, 50.0, 0.0], params(3)).unwrap();
        let fixed = tpsa_schedule(&inst, &TpsaOptions::default()).unwrap();
        let printed = tpsa_schedule(
            &inst,
            &TpsaOptions {
                score_as_printed: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(fixed.order[0], vec![0, 1]);
        assert_eq!(printed.order[0], vec![1, 0]);
        assert!(fixed.total_service_s() <= printed.total_service_s());
    }
}
