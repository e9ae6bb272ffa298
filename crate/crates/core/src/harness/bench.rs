//! Monte-Carlo comparison of TPSA against the exhaustive and random-order
//! schedulers on synthetic multi-server instances.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latency::{ComputeParams, DeliverVia, Task};
use crate::tpsa::{brute_force_counted, random_schedule, tpsa_schedule_counted, TpsaInstance, TpsaOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub task_counts: Vec<usize>,
    pub rounds: usize,
    /// Untimed rounds run before measuring.
    pub warmup_rounds: usize,
    pub servers: usize,
    pub offload_rate_bps: f64,
    pub forward_rate_bps: f64,
    pub capacity_hz: f64,
    pub cycles_per_bit: f64,
    pub task_size_bits: [f64; 2],
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            task_counts: (1..=8).collect(),
            rounds: 200,
            warmup_rounds: 10,
            servers: 5,
            offload_rate_bps: 6e6,
            forward_rate_bps: 8e6,
            capacity_hz: 8e9,
            cycles_per_bit: 4000.0,
            task_size_bits: [1e6, 21e6],
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.servers == 0 || self.rounds == 0 {
            return Err(Error::Config("bench needs at least one server and one round".into()));
        }
        let [lo, hi] = self.task_size_bits;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::Config("bench task sizes must satisfy 0 < min <= max".into()));
        }
        if !(self.offload_rate_bps > 0.0 && self.forward_rate_bps > 0.0) {
            return Err(Error::Config("bench link rates must be positive".into()));
        }
        self.params().validate()
    }

    pub fn params(&self) -> ComputeParams {
        ComputeParams::uniform(self.servers, self.capacity_hz, self.cycles_per_bit, 1.0)
    }

    /// `n` tasks with uniform sizes and uniformly drawn receiver and helper
    /// (which may coincide), empty queues.
    pub fn instance<R: Rng>(&self, n: usize, rng: &mut R) -> TpsaInstance {
        let [lo, hi] = self.task_size_bits;
        let tasks = (0..n)
            .map(|i| Task {
                zone: i,
                workload_bits: if hi > lo { rng.random_range(lo..=hi) } else { lo },
                receiver: rng.random_range(0..self.servers),
                helper: rng.random_range(0..self.servers),
                deliver: DeliverVia::Receiver,
                offload_rate: self.offload_rate_bps,
                forward_rate: self.forward_rate_bps,
            })
            .collect();
        TpsaInstance::new(tasks, vec![0.0; self.servers], self.params()).expect("valid bench instance")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Tpsa,
    BruteForce,
    Random,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Tpsa => "tpsa",
            Scheme::BruteForce => "brute_force",
            Scheme::Random => "random",
        }
    }
}

/// Aggregate for one (task count, scheme) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n_tasks: usize,
    pub scheme: Scheme,
    pub mean_total_service_s: f64,
    /// Most TPSA iterations seen over the rounds (TPSA only).
    pub max_iterations: Option<usize>,
    pub runtime_us: Vec<f64>,
}

impl BenchRow {
    pub fn median_runtime_us(&self) -> f64 {
        median(&self.runtime_us)
    }

    pub fn mean_runtime_us(&self) -> f64 {
        if self.runtime_us.is_empty() {
            return f64::NAN;
        }
        self.runtime_us.iter().sum::<f64>() / self.runtime_us.len() as f64
    }
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

fn instance_seed(seed: u64, n: usize, round: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((n as u64) << 32) | round as u64);
    rng.random()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t0 = Instant::now();
    let out = f();
    (out, t0.elapsed().as_secs_f64() * 1e6)
}

/// Runs every configured task count. Brute force is skipped (with a log
/// notice) above the configured cap.
pub fn run_tpsa_bench(cfg: &BenchConfig, tpsa: &TpsaOptions, seed: u64) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &n in &cfg.task_counts {
        let with_bf = n <= tpsa.brute_force_cap;
        if !with_bf {
            log::warn!("brute force skipped for n={n}: above cap {}", tpsa.brute_force_cap);
        }
        let mut schemes = vec![Scheme::Tpsa];
        if with_bf {
            schemes.push(Scheme::BruteForce);
        }
        schemes.push(Scheme::Random);
        let mut acc: Vec<BenchRow> = schemes
            .iter()
            .map(|&scheme| BenchRow {
                n_tasks: n,
                scheme,
                mean_total_service_s: 0.0,
                max_iterations: (scheme == Scheme::Tpsa).then_some(0),
                runtime_us: Vec::with_capacity(cfg.rounds),
            })
            .collect();
        for round in 0..cfg.warmup_rounds + cfg.rounds {
            let s = instance_seed(seed, n, round);
            let inst = cfg.instance(n, &mut ChaCha8Rng::seed_from_u64(s));
            let measured = round >= cfg.warmup_rounds;
            for row in acc.iter_mut() {
                let (total, us) = match row.scheme {
                    Scheme::Tpsa => {
                        let (out, us) = timed(|| tpsa_schedule_counted(&inst, tpsa));
                        let (sched, iters) = out?;
                        if measured {
                            row.max_iterations = row.max_iterations.max(Some(iters));
                        }
                        (sched.total_service_s(), us)
                    }
                    Scheme::BruteForce => {
                        let (out, us) = timed(|| brute_force_counted(&inst, tpsa.brute_force_cap));
                        (out?.0.total_service_s(), us)
                    }
                    Scheme::Random => {
                        let (out, us) = timed(|| random_schedule(&inst, s ^ 0x5eed));
                        (out?.total_service_s(), us)
                    }
                };
                if measured {
                    row.mean_total_service_s += total / cfg.rounds as f64;
                    row.runtime_us.push(us);
                }
            }
        }
        rows.extend(acc);
    }
    Ok(rows)
}
