//! Back-propagation against central finite differences on the desk critic.
//!
//! `cargo run --release --example gradient_check`

use edgecollab::nn::{critic_spec, Network, WidthPreset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> edgecollab::Result<()> {
    let net = Network::new(critic_spec(3, 3, 3, 27, WidthPreset::Desk)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let params = net.init(&mut rng);
    let image: Vec<f64> = (0..net.image_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let aux: Vec<f64> = (0..net.aux_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let trace = net.forward_traced(&params, &image, &aux)?;
    let grads = net.backward(&params, &trace, &[1.0])?;
    println!("{} weights, Q = {:.6}", net.n_weights(), trace.output()[0]);

    let h = 1e-5;
    println!("  index    analytic      numeric     rel err");
    for _ in 0..10 {
        let i = rng.random_range(0..net.n_weights());
        let mut p = params.clone();
        p.weights[i] += h;
        let up = net.forward(&p, &image, &aux)?[0];
        p.weights[i] -= 2.0 * h;
        let down = net.forward(&p, &image, &aux)?[0];
        let numeric = (up - down) / (2.0 * h);
        let a = grads.weights[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12);
        println!("  {i:>6}  {a:>11.3e}  {numeric:>11.3e}  {rel:>9.1e}");
    }
    Ok(())
}
