//! Runs the three rule-based policies on the desk scenario.
//!
//! `cargo run --release --example simulate_baselines`

use edgecollab::agents::{evaluate_episode, Baseline, BaselineKind};
use edgecollab::sim::{Env, Scenario};

fn main() -> edgecollab::Result<()> {
    let scenario = Scenario::default();
    let horizon = scenario.horizon_slots;
    let mut env = Env::new(scenario)?;
    println!("policy        cost/episode  failed tasks  computed Mbit");
    for kind in BaselineKind::ALL {
        let (mut cost, mut failed, mut tasks, mut mbit) = (0.0, 0, 0, 0.0);
        let episodes = 20;
        for seed in 0..episodes {
            let mut policy = Baseline::new(kind, seed + 1000);
            for m in evaluate_episode(&mut env, &mut policy, seed, horizon)? {
                cost += m.total_cost;
                failed += m.n_failures;
                tasks += m.n_tasks;
                mbit += m.succeeded_bits / 1e6;
            }
        }
        let e = episodes as f64;
        println!(
            "{:<12}  {:12.1}  {:>5}/{:<6}  {:13.1}",
            kind.label(),
            cost / e,
            failed,
            tasks,
            mbit / e
        );
    }
    Ok(())
}
