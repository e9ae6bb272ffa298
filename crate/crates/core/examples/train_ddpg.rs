//! Short DDPG training run on the desk scenario, then a noise-free
//! evaluation against Random+TPSA.
//!
//! `cargo run --release --example train_ddpg -- [episodes]`

use edgecollab::agents::{evaluate_episode, Baseline, BaselineKind, Ddpg, DdpgConfig, Trainer};
use edgecollab::nn::OptimizerKind;
use edgecollab::sim::{Env, Scenario};

fn main() -> edgecollab::Result<()> {
    let episodes: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(300);
    let scenario = Scenario::default();
    let horizon = scenario.horizon_slots;
    let config = DdpgConfig {
        optimizer: OptimizerKind::adam(),
        ..Default::default()
    };
    let mut env = Env::new(scenario.clone())?;
    let mut trainer = Trainer::new(Ddpg::new(config, &scenario, 11)?);
    let mut window = Vec::new();
    for ep in 0..episodes {
        let rec = trainer.run_episode(&mut env, 10_000 + ep as u64, horizon)?;
        window.push(rec.total_cost);
        if window.len() == 50 {
            let avg = window.iter().sum::<f64>() / 50.0;
            println!("episodes {:>5}-{:<5} mean cost {avg:8.1}  noise {:.3}", ep - 49, ep, rec.noise_scale);
            window.clear();
        }
    }

    let (mut learned, mut random) = (0.0, 0.0);
    for seed in 0..10 {
        let mut agent = trainer.agent.clone();
        learned += evaluate_episode(&mut env, &mut agent, seed, horizon)?.iter().map(|m| m.total_cost).sum::<f64>();
        let mut base = Baseline::new(BaselineKind::RandomTpsa, seed);
        random += evaluate_episode(&mut env, &mut base, seed, horizon)?.iter().map(|m| m.total_cost).sum::<f64>();
    }
    println!("evaluation over 10 seeds: learned {:.1}, random+tpsa {:.1}", learned / 10.0, random / 10.0);
    Ok(())
}
