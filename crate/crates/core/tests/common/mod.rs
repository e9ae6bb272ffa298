#![allow(dead_code)]

use edgecollab::nn::{actor_spec, critic_spec, Activation, LayerSpec, Network, NetworkSpec, ParameterSet, WidthPreset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;
/// Absolute floor for entries whose true gradient is essentially zero.
pub const FD_ABS_FLOOR: f64 = 1e-8;

#[derive(Debug, Default, Clone, Copy)]
pub struct ProbeReport {
    pub checked: usize,
    pub skipped_kinks: usize,
    pub mismatches: usize,
    pub worst_rel: f64,
}

pub fn close(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= FD_REL_TOL * analytic.abs().max(numeric.abs()) + FD_ABS_FLOOR
}

/// Relative error, ignoring entries too small to measure.
fn rel_err(a: f64, n: f64) -> f64 {
    let m = a.abs().max(n.abs());
    if m < 1e-6 {
        0.0
    } else {
        (a - n).abs() / m
    }
}

/// Random network inputs and a random linear read-out of the output.
pub struct Probe {
    pub image: Vec<f64>,
    pub aux: Vec<f64>,
    pub readout: Vec<f64>,
}

impl Probe {
    pub fn random(net: &Network, rng: &mut impl Rng) -> Self {
        let u = |rng: &mut dyn rand::RngCore, n| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        Self {
            image: u(rng, net.image_len()),
            aux: u(rng, net.aux_len()),
            readout: u(rng, net.output_len()),
        }
    }

    pub fn objective(&self, net: &Network, p: &ParameterSet, image: &[f64], aux: &[f64]) -> (f64, Vec<u64>) {
        let t = net.forward_traced(p, image, aux).unwrap();
        let v = t.output().iter().zip(&self.readout).map(|(a, b)| a * b).sum();
        (v, t.kink_signature(net))
    }
}

#[derive(Clone, Copy)]
enum Slot {
    Weight(usize),
    Image(usize),
    Aux(usize),
}

/// Compares backprop against central differences at `probes` random
/// coordinates (weights, image and auxiliary input). Coordinates whose
/// perturbation crosses a relu or pooling boundary are skipped.
pub fn check_gradients(net: &Network, params: &ParameterSet, probes: usize, seed: u64) -> ProbeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ProbeReport::default();
    for _ in 0..probes {
        let probe = Probe::random(net, &mut rng);
        let trace = net.forward_traced(params, &probe.image, &probe.aux).unwrap();
        let sig = trace.kink_signature(net);
        let g = net.backward(params, &trace, &probe.readout).unwrap();
        let total = net.n_weights() + net.image_len() + net.aux_len();
        let k = rng.random_range(0..total);
        let slot = if k < net.n_weights() {
            Slot::Weight(k)
        } else if k < net.n_weights() + net.image_len() {
            Slot::Image(k - net.n_weights())
        } else {
            Slot::Aux(k - net.n_weights() - net.image_len())
        };
        let eval = |delta: f64| {
            let (mut p, mut img, mut aux) = (params.clone(), probe.image.clone(), probe.aux.clone());
            match slot {
                Slot::Weight(i) => p.weights[i] += delta,
                Slot::Image(i) => img[i] += delta,
                Slot::Aux(i) => aux[i] += delta,
            }
            probe.objective(net, &p, &img, &aux)
        };
        let (plus, sp) = eval(FD_STEP);
        let (minus, sm) = eval(-FD_STEP);
        if sp != sig || sm != sig {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let analytic = match slot {
            Slot::Weight(i) => g.weights[i],
            Slot::Image(i) => g.image[i],
            Slot::Aux(i) => g.aux[i],
        };
        report.checked += 1;
        report.worst_rel = report.worst_rel.max(rel_err(analytic, numeric));
        if !close(analytic, numeric) {
            report.mismatches += 1;
        }
    }
    report
}

pub fn conv(kernel: [usize; 2], cin: usize, cout: usize, stride: usize, padding: [usize; 2]) -> LayerSpec {
    LayerSpec::Conv {
        kernel,
        in_channels: cin,
        out_channels: cout,
        stride,
        padding,
    }
}

pub fn act(a: Activation) -> LayerSpec {
    LayerSpec::Act { activation: a }
}

pub fn dense(i: usize, o: usize) -> LayerSpec {
    LayerSpec::Dense { fan_in: i, fan_out: o }
}

pub fn net(input: [usize; 3], aux_len: usize, layers: Vec<LayerSpec>) -> Network {
    Network::new(NetworkSpec { input, aux_len, layers }).unwrap()
}

/// Small networks that together exercise every layer type, then the two
/// desk-width agent networks.
pub fn gradient_zoo() -> Vec<(&'static str, Network)> {
    vec![
        (
            "dense+tanh",
            net([1, 2, 2], 3, vec![LayerSpec::Concat, dense(7, 5), act(Activation::Tanh), dense(5, 2)]),
        ),
        (
            "strided conv",
            net(
                [2, 5, 4],
                1,
                vec![
                    conv([3, 3], 2, 3, 2, [1, 1]),
                    act(Activation::Tanh),
                    LayerSpec::Concat,
                    dense(3 * 3 * 2 + 1, 2),
                ],
            ),
        ),
        (
            "conv+relu+pool",
            net(
                [2, 5, 3],
                0,
                vec![
                    conv([3, 1], 2, 4, 1, [1, 0]),
                    act(Activation::Relu),
                    LayerSpec::Pool { window: [2, 2] },
                    LayerSpec::Concat,
                    dense(4 * 3 * 2, 3),
                ],
            ),
        ),
        (
            "norm",
            net(
                [1, 3, 1],
                2,
                vec![LayerSpec::Concat, LayerSpec::Norm, dense(5, 4), act(Activation::Relu), dense(4, 1)],
            ),
        ),
        ("actor", Network::new(actor_spec(3, 3, 3, 3, WidthPreset::Desk).unwrap()).unwrap()),
        ("critic", Network::new(critic_spec(3, 3, 3, 27, WidthPreset::Desk).unwrap()).unwrap()),
    ]
}

/// Initialized parameters with the norm statistics moved off their defaults.
pub fn params_with_stats(net: &Network, seed: u64) -> ParameterSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = net.init(&mut rng);
    let batch: Vec<(Vec<f64>, Vec<f64>)> = (0..16)
        .map(|_| {
            let pr = Probe::random(net, &mut rng);
            (pr.image, pr.aux)
        })
        .collect();
    let pairs: Vec<(&[f64], &[f64])> = batch.iter().map(|(a, b)| (a.as_slice(), b.as_slice())).collect();
    net.update_norm_stats(&mut p, &pairs, 0.7).unwrap();
    p
}

pub mod oracles;
