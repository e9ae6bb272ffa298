//! Drives the simulator from a recorded mobility trace.
//!
//! `cargo run --example trace_replay`

use std::path::Path;

use edgecollab::agents::{evaluate_episode, Baseline, BaselineKind};
use edgecollab::harness::ExperimentConfig;
use edgecollab::sim::Env;

fn main() -> edgecollab::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/trace.toml");
    let cfg = ExperimentConfig::load(Some(&path), &[])?;
    let mut env = Env::new(cfg.scenario.clone())?;
    env.reset(0);
    for step in 0..45 {
        if step % 5 == 0 {
            let seen = env.fleet().observe(env.world());
            let zones: Vec<String> = seen.iter().map(|v| format!("v{}@z{}", v.id, v.zone)).collect();
            println!("t={:>4.1}s  {}", env.time_s(), zones.join(" "));
        }
        let mut policy = Baseline::new(BaselineKind::Greedy, step);
        env.step(&policy.act(&env.channel()))?;
    }

    let mut policy = Baseline::new(BaselineKind::GreedyTpsa, 1);
    let slots = evaluate_episode(&mut env, &mut policy, 0, cfg.scenario.horizon_slots)?;
    let cost: f64 = slots.iter().map(|m| m.total_cost).sum();
    let tasks: usize = slots.iter().map(|m| m.n_tasks).sum();
    println!("greedy+tpsa over {} slots: {tasks} tasks, cost {cost:.2}", slots.len());
    Ok(())
}
