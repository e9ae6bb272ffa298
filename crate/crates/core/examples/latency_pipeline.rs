//! One task split between two RSUs: offload, forward, compute, and the
//! split that equalizes both completions.
//!
//! `cargo run --example latency_pipeline`

use edgecollab::latency::{place, ComputeParams, DeliverVia, Task};
use edgecollab::tpsa::optimal_partition;

fn main() -> edgecollab::Result<()> {
    let task = Task {
        zone: 0,
        workload_bits: 8e6,
        receiver: 0,
        helper: 1,
        deliver: DeliverVia::Receiver,
        offload_rate: 6e6,
        forward_rate: 8e6,
    };
    let params = ComputeParams::uniform(2, 8e9, 4000.0, 1.0);

    println!("   x    receiver  helper   service");
    for k in 0..=10 {
        let x = k as f64 / 10.0;
        let t = place(&task, x, 0.0, 0.0, &params)?;
        println!(
            "  {x:.1}   {:7.3}  {:7.3}  {:7.3}",
            t.receiver_completion_s, t.helper_completion_s, t.service_s
        );
    }
    let x = optimal_partition(&task, 0.0, 0.0, &params);
    let t = place(&task, x, 0.0, 0.0, &params)?;
    println!("\nbest split x = {x:.4}: both sides finish at {:.4} s", t.service_s);

    let x = optimal_partition(&task, 0.0, 2.5, &params);
    let t = place(&task, x, 0.0, 2.5, &params)?;
    println!("with 2.5 s already queued at the helper: x = {x:.4}, service {:.4} s", t.service_s);
    Ok(())
}
