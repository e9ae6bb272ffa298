//! Greedy scheduler against exhaustive search and random order.
//!
//! `cargo run --release --example tpsa_vs_bruteforce`

use std::time::Instant;

use edgecollab::harness::BenchConfig;
use edgecollab::tpsa::{brute_force_counted, random_schedule, tpsa_schedule_counted, TpsaOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> edgecollab::Result<()> {
    let bench = BenchConfig::default();
    let opts = TpsaOptions::default();
    let rounds = 50;
    println!(" n   tpsa(s)  brute(s)  random(s)  ratio  tpsa iters  brute us  tpsa us");
    for n in 1..=7 {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let (mut tp, mut bf, mut rnd, mut it) = (0.0, 0.0, 0.0, 0);
        let (mut t_bf, mut t_tp) = (0.0, 0.0);
        for k in 0..rounds {
            let inst = bench.instance(n, &mut rng);
            let t0 = Instant::now();
            let (s, i) = tpsa_schedule_counted(&inst, &opts)?;
            t_tp += t0.elapsed().as_secs_f64();
            tp += s.total_service_s();
            it = it.max(i);
            let t0 = Instant::now();
            bf += brute_force_counted(&inst, opts.brute_force_cap)?.0.total_service_s();
            t_bf += t0.elapsed().as_secs_f64();
            rnd += random_schedule(&inst, k)?.total_service_s();
        }
        let m = rounds as f64;
        println!(
            "{n:>2}  {:8.2}  {:8.2}  {:9.2}  {:.3}  {it:>10}  {:8.1}  {:7.1}",
            tp / m,
            bf / m,
            rnd / m,
            tp / bf,
            t_bf / m * 1e6,
            t_tp / m * 1e6
        );
    }
    Ok(())
}
