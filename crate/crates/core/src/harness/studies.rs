//! The four studies behind the command-line runner. Each writes CSV files
//! into an output directory and returns the paths it wrote.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::bench::run_tpsa_bench;
use super::config::{derive_seeds, streams, ExperimentConfig, PolicyKind};
use crate::agents::{evaluate_episode, Baseline, Ddpg, EpisodeRecord, Policy, Trainer};
use crate::error::{Error, Result};
use crate::nn::checkpoint;
use crate::sim::{Env, Scenario, SlotMetrics};

pub const CSV_FORMAT_VERSION: u32 = 1;
pub const ACTOR_FILE: &str = "actor.ckpt";
pub const CRITIC_FILE: &str = "critic.ckpt";

/// CSV writer preceded by a `# format=.. config_hash=.. seeds=..` line.
pub fn csv_writer(path: &Path, cfg: &ExperimentConfig, seeds: &[u64]) -> Result<csv::Writer<BufWriter<File>>> {
    let mut out = BufWriter::new(File::create(path)?);
    let seeds: Vec<String> = seeds.iter().map(u64::to_string).collect();
    writeln!(
        out,
        "# format={CSV_FORMAT_VERSION} config_hash={} seeds={}",
        cfg.hash(),
        seeds.join(";")
    )?;
    Ok(csv::Writer::from_writer(out))
}

/// Shortest round-trip decimal, with negative zero printed as `0`.
fn num(x: f64) -> String {
    (x + 0.0).to_string()
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn finish(w: csv::Writer<BufWriter<File>>) -> Result<()> {
    let mut inner = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    inner.flush()?;
    Ok(())
}

fn write_rows<I, R>(path: &Path, cfg: &ExperimentConfig, seeds: &[u64], header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv_writer(path, cfg, seeds)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    finish(w)
}

/// Writes `tpsa_bench.csv` (service times and iteration counts; fully
/// reproducible) and `tpsa_bench_runtime.csv` (wall-clock timings).
pub fn tpsa_bench(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let rows = run_tpsa_bench(&cfg.bench, &cfg.tpsa, cfg.seed)?;
    let seeds = [cfg.seed];
    let main = out.join("tpsa_bench.csv");
    write_rows(
        &main,
        cfg,
        &seeds,
        &["n_tasks", "scheme", "mean_total_service_s", "max_iterations", "rounds"],
        rows.iter().map(|r| {
            vec![
                r.n_tasks.to_string(),
                r.scheme.label().to_string(),
                num(r.mean_total_service_s),
                r.max_iterations.map(|i| i.to_string()).unwrap_or_default(),
                cfg.bench.rounds.to_string(),
            ]
        }),
    )?;
    let timing = out.join("tpsa_bench_runtime.csv");
    write_rows(
        &timing,
        cfg,
        &seeds,
        &["n_tasks", "scheme", "median_runtime_us", "mean_runtime_us"],
        rows.iter().map(|r| {
            vec![
                r.n_tasks.to_string(),
                r.scheme.label().to_string(),
                format!("{:.3}", r.median_runtime_us()),
                format!("{:.3}", r.mean_runtime_us()),
            ]
        }),
    )?;
    Ok(vec![main, timing])
}

fn save_agent(agent: &Ddpg, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    checkpoint::save(
        &dir.join(ACTOR_FILE),
        &agent.actor,
        &[&agent.actor_params, &agent.actor_target],
    )?;
    checkpoint::save(
        &dir.join(CRITIC_FILE),
        &agent.critic,
        &[&agent.critic_params, &agent.critic_target],
    )
}

/// Restores the actor (and the critic when present) saved by `train`.
pub fn load_agent(cfg: &ExperimentConfig, dir: &Path) -> Result<Ddpg> {
    let mut agent = Ddpg::new(cfg.agent_config(), &cfg.scenario, 0)?;
    let actor_path = dir.join(ACTOR_FILE);
    let mut sets = checkpoint::load(&actor_path, &agent.actor)?.into_iter();
    agent.actor_params = sets
        .next()
        .ok_or_else(|| Error::Checkpoint(format!("{} holds no parameters", actor_path.display())))?;
    agent.actor_target = sets.next().unwrap_or_else(|| agent.actor_params.clone());
    let critic_path = dir.join(CRITIC_FILE);
    if critic_path.exists() {
        let mut sets = checkpoint::load(&critic_path, &agent.critic)?.into_iter();
        if let Some(p) = sets.next() {
            agent.critic_target = sets.next().unwrap_or_else(|| p.clone());
            agent.critic_params = p;
        }
    }
    Ok(agent)
}

/// Trains for `ddpg.episodes` episodes of `scenario.horizon_slots` slots,
/// writing `train_log.csv` and the final checkpoints.
pub fn train(cfg: &ExperimentConfig, out: &Path) -> Result<(Vec<PathBuf>, Vec<EpisodeRecord>)> {
    std::fs::create_dir_all(out)?;
    let episodes = cfg.ddpg.episodes;
    let seeds = derive_seeds(cfg.seed, streams::TRAIN, episodes);
    let agent_seed = derive_seeds(cfg.seed, streams::AGENT, 1)[0];
    let mut env = Env::new(cfg.scenario.clone())?;
    let mut trainer = Trainer::new(Ddpg::new(cfg.agent_config(), &cfg.scenario, agent_seed)?);
    let mut records = Vec::with_capacity(episodes);
    for (ep, &seed) in seeds.iter().enumerate() {
        let rec = trainer.run_episode(&mut env, seed, cfg.scenario.horizon_slots)?;
        log::info!(
            "episode {ep}: mean cost {:.3}, noise {:.4}",
            rec.mean_cost(),
            rec.noise_scale
        );
        records.push(rec);
        let every = cfg.train.checkpoint_every;
        if every > 0 && (ep + 1) % every == 0 && ep + 1 < episodes {
            save_agent(&trainer.agent, &out.join(format!("checkpoint_{:06}", ep + 1)))?;
        }
    }
    save_agent(&trainer.agent, out)?;
    let log_path = out.join("train_log.csv");
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    write_rows(
        &log_path,
        cfg,
        &[cfg.seed],
        &["episode", "step", "mean_cost", "critic_loss", "actor_objective", "noise_scale"],
        records.iter().map(|r| {
            vec![
                r.episode.to_string(),
                r.env_steps.to_string(),
                num(r.mean_cost()),
                opt(r.train.map(|t| t.critic_loss)),
                opt(r.train.map(|t| t.actor_objective)),
                num(r.noise_scale),
            ]
        }),
    )?;
    Ok((
        vec![log_path, out.join(ACTOR_FILE), out.join(CRITIC_FILE)],
        records,
    ))
}

/// A policy constructor usable from worker threads.
enum PolicySource {
    Baseline(crate::agents::BaselineKind),
    Agent(Box<Ddpg>),
}

impl PolicySource {
    fn new(cfg: &ExperimentConfig, kind: PolicyKind) -> Result<Self> {
        match kind.baseline() {
            Some(b) => Ok(PolicySource::Baseline(b)),
            None => {
                let dir = cfg.checkpoint.as_ref().ok_or_else(|| {
                    Error::Config("the ddpg policy needs `checkpoint` (a directory written by train)".into())
                })?;
                if !dir.join(ACTOR_FILE).exists() {
                    return Err(Error::MissingFile(dir.join(ACTOR_FILE)));
                }
                Ok(PolicySource::Agent(Box::new(load_agent(cfg, dir)?)))
            }
        }
    }

    fn episode(&self, scenario: &Scenario, seed: u64, policy_seed: u64) -> Result<Vec<SlotMetrics>> {
        let mut env = Env::new(scenario.clone())?;
        let mut policy: Box<dyn Policy> = match self {
            PolicySource::Baseline(b) => Box::new(Baseline::new(*b, policy_seed)),
            PolicySource::Agent(a) => Box::new((**a).clone()),
        };
        evaluate_episode(&mut env, policy.as_mut(), seed, scenario.horizon_slots)
    }
}

/// Episodes of one policy over `seeds`, evaluated in parallel and returned
/// in seed order.
fn run_seeds(source: &PolicySource, scenario: &Scenario, seeds: &[u64]) -> Result<Vec<Vec<SlotMetrics>>> {
    seeds
        .par_iter()
        .map(|&s| source.episode(scenario, s, s ^ 0x9e37_79b9_7f4a_7c15))
        .collect()
}

/// Per-slot metrics of the configured policy, `evaluate.csv`.
pub fn evaluate(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let source = PolicySource::new(cfg, cfg.evaluate.policy)?;
    std::fs::create_dir_all(out)?;
    let seeds = derive_seeds(cfg.seed, streams::EVALUATE, cfg.evaluate.seeds);
    let runs = run_seeds(&source, &cfg.scenario, &seeds)?;
    let path = out.join("evaluate.csv");
    let label = cfg.evaluate.policy.label();
    write_rows(
        &path,
        cfg,
        &seeds,
        &[
            "policy",
            "seed",
            "t",
            "total_cost",
            "n_tasks",
            "n_failures",
            "total_bits",
            "mean_service_s",
            "succeeded_bits",
            "failed_bits",
        ],
        seeds.iter().zip(&runs).flat_map(|(seed, slots)| {
            slots.iter().map(move |m| {
                vec![
                    label.to_string(),
                    seed.to_string(),
                    m.t.to_string(),
                    num(m.total_cost),
                    m.n_tasks.to_string(),
                    m.n_failures.to_string(),
                    num(m.total_bits),
                    num(m.mean_service_s),
                    num(m.succeeded_bits),
                    num(m.failed_bits),
                ]
            })
        }),
    )?;
    Ok(vec![path])
}

/// One row of the policy comparison, averaged per episode.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub arrival_rate: f64,
    pub policy: PolicyKind,
    pub weighted_cost: f64,
    pub failure_pct: f64,
    pub computed_mbit: f64,
    pub failed_mbit: f64,
    pub generated_mbit: f64,
    pub delay_per_mbit_s: f64,
}

pub fn summarize(arrival_rate: f64, policy: PolicyKind, runs: &[Vec<SlotMetrics>]) -> CompareRow {
    let n = runs.len().max(1) as f64;
    let all = || runs.iter().flatten();
    let tasks: usize = all().map(|m| m.n_tasks).sum();
    let failures: usize = all().map(|m| m.n_failures).sum();
    let ok_bits: f64 = all().map(|m| m.succeeded_bits).sum();
    let ok_service: f64 = all().map(|m| m.success_service_s).sum();
    CompareRow {
        arrival_rate,
        policy,
        weighted_cost: all().map(|m| m.total_cost).sum::<f64>() / n,
        failure_pct: if tasks == 0 {
            0.0
        } else {
            100.0 * failures as f64 / tasks as f64
        },
        computed_mbit: ok_bits / 1e6 / n,
        failed_mbit: all().map(|m| m.failed_bits).sum::<f64>() / 1e6 / n,
        generated_mbit: all().map(|m| m.total_bits).sum::<f64>() / 1e6 / n,
        delay_per_mbit_s: if ok_bits > 0.0 { ok_service / (ok_bits / 1e6) } else { 0.0 },
    }
}

/// Policies swept over arrival rates, `compare.csv`.
pub fn compare(cfg: &ExperimentConfig, out: &Path) -> Result<(Vec<PathBuf>, Vec<CompareRow>)> {
    let sources = cfg
        .compare
        .policies
        .iter()
        .map(|&p| PolicySource::new(cfg, p).map(|s| (p, s)))
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(out)?;
    let seeds = derive_seeds(cfg.seed, streams::COMPARE, cfg.compare.seeds);
    let mut rows = Vec::new();
    for &rate in &cfg.compare.arrival_rates {
        let mut scenario = cfg.scenario.clone();
        scenario.traffic.arrival_rate = rate;
        for (kind, source) in &sources {
            let runs = run_seeds(source, &scenario, &seeds)?;
            rows.push(summarize(rate, *kind, &runs));
        }
    }
    let path = out.join("compare.csv");
    write_rows(
        &path,
        cfg,
        &seeds,
        &[
            "arrival_rate",
            "policy",
            "weighted_cost",
            "failure_pct",
            "computed_mbit",
            "failed_mbit",
            "generated_mbit",
            "delay_per_mbit_s",
        ],
        rows.iter().map(|r| {
            vec![
                num(r.arrival_rate),
                r.policy.label().to_string(),
                num(r.weighted_cost),
                num(r.failure_pct),
                num(r.computed_mbit),
                num(r.failed_mbit),
                num(r.generated_mbit),
                num(r.delay_per_mbit_s),
            ]
        }),
    )?;
    Ok((vec![path], rows))
}
