//! Path loss, SNR and link rates on the desk geometry.
//!
//! `cargo run --example radio_links`

use edgecollab::channel::{path_loss_db, Channel};
use edgecollab::sim::{Scenario, World};

fn main() -> edgecollab::Result<()> {
    let scenario = Scenario::default();
    let radio = &scenario.radio;
    println!("path loss vs distance:");
    for d_m in [10.0, 50.0, 100.0, 200.0, 400.0, 800.0] {
        println!("  {d_m:>5} m  {:6.1} dB", path_loss_db(d_m / 1000.0, radio)?);
    }

    let world = World::build(&scenario);
    let ch = Channel::new(&world.geometry, radio);
    println!("\nzone -> RSU uplink SNR (dB) and rate (Mbit/s); * marks the best RSU:");
    for z in 0..world.n_zones() {
        let best = ch.best_rsu(z);
        let cells: Vec<String> = (0..world.geometry.n_rsus())
            .map(|r| {
                let mark = if r == best { '*' } else { ' ' };
                format!("{:6.1}/{:5.2}{mark}", ch.v2i_snr_db(z, r), ch.rate_v2i(z, r) / 1e6)
            })
            .collect();
        println!("  zone {z}: {}", cells.join("  "));
    }
    println!("\nRSU -> RSU forward rate (Mbit/s):");
    for r in 0..world.geometry.n_rsus() {
        let row: Vec<String> = (0..world.geometry.n_rsus())
            .map(|q| format!("{:8.2}", ch.rate_r2r(r, q) / 1e6))
            .collect();
        println!("  {r}: {}", row.join(" "));
    }
    Ok(())
}
