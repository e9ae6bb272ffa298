use rand::Rng;

use super::spec::{Activation, LayerSpec, NetworkSpec, Shape};
use crate::error::{Error, Result};

pub const NORM_EPS: f64 = 1e-5;

/// Learnable weights plus the running statistics of normalization layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    pub weights: Vec<f64>,
    /// Running mean then running variance for each norm layer, in layer order.
    pub stats: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Op {
    Conv {
        in_c: usize,
        out_c: usize,
        kh: usize,
        kw: usize,
        stride: usize,
        ph: usize,
        pw: usize,
        in_h: usize,
        in_w: usize,
        out_h: usize,
        out_w: usize,
        w: usize,
        b: usize,
    },
    Pool {
        c: usize,
        in_h: usize,
        in_w: usize,
        wh: usize,
        ww: usize,
        out_h: usize,
        out_w: usize,
    },
    Dense {
        fan_in: usize,
        fan_out: usize,
        w: usize,
        b: usize,
    },
    Act(Activation),
    Concat,
    Norm {
        dim: usize,
        gamma: usize,
        beta: usize,
        mean: usize,
        var: usize,
    },
}

/// Stored activations of one forward pass, needed by `backward`.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Input of every layer, followed by the network output.
    pub acts: Vec<Vec<f64>>,
    argmax: Vec<Vec<usize>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Sign pattern of every relu input and every pooling winner; two
    /// traces with equal signatures lie on the same smooth piece.
    pub fn kink_signature(&self, net: &Network) -> Vec<u64> {
        let mut sig = Vec::new();
        for (i, op) in net.ops.iter().enumerate() {
            match op {
                Op::Act(Activation::Relu) => sig.extend(self.acts[i].iter().map(|&v| (v > 0.0) as u64)),
                Op::Pool { .. } => sig.extend(self.argmax[i].iter().map(|&k| k as u64)),
                _ => {}
            }
        }
        sig
    }
}

/// Gradients of a scalar objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<f64>,
    pub image: Vec<f64>,
    pub aux: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    ops: Vec<Op>,
    shapes: Vec<Shape>,
    n_weights: usize,
    n_stats: usize,
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        let shapes = spec.shapes()?;
        let mut ops = Vec::with_capacity(spec.layers.len());
        let mut nw = 0;
        let mut ns = 0;
        for (i, layer) in spec.layers.iter().enumerate() {
            let (input, output) = (shapes[i], shapes[i + 1]);
            let op = match (layer, input, output) {
                (
                    LayerSpec::Conv {
                        kernel: [kh, kw],
                        in_channels,
                        out_channels,
                        stride,
                        padding: [ph, pw],
                    },
                    Shape::Image { h: in_h, w: in_w, .. },
                    Shape::Image { h: out_h, w: out_w, .. },
                ) => {
                    let w = nw;
                    let b = w + out_channels * in_channels * kh * kw;
                    nw = b + out_channels;
                    Op::Conv {
                        in_c: *in_channels,
                        out_c: *out_channels,
                        kh: *kh,
                        kw: *kw,
                        stride: *stride,
                        ph: *ph,
                        pw: *pw,
                        in_h,
                        in_w,
                        out_h,
                        out_w,
                        w,
                        b,
                    }
                }
                (
                    LayerSpec::Pool { window: [wh, ww] },
                    Shape::Image { c, h: in_h, w: in_w },
                    Shape::Image { h: out_h, w: out_w, .. },
                ) => Op::Pool {
                    c,
                    in_h,
                    in_w,
                    wh: *wh,
                    ww: *ww,
                    out_h,
                    out_w,
                },
                (LayerSpec::Dense { fan_in, fan_out }, _, _) => {
                    let w = nw;
                    let b = w + fan_in * fan_out;
                    nw = b + fan_out;
                    Op::Dense {
                        fan_in: *fan_in,
                        fan_out: *fan_out,
                        w,
                        b,
                    }
                }
                (LayerSpec::Act { activation }, _, _) => Op::Act(*activation),
                (LayerSpec::Concat, _, _) => Op::Concat,
                (LayerSpec::Norm, s, _) => {
                    let dim = s.len();
                    let op = Op::Norm {
                        dim,
                        gamma: nw,
                        beta: nw + dim,
                        mean: ns,
                        var: ns + dim,
                    };
                    nw += 2 * dim;
                    ns += 2 * dim;
                    op
                }
                _ => return Err(Error::Structure(format!("layer {i} does not fit its input"))),
            };
            ops.push(op);
        }
        Ok(Self {
            spec,
            ops,
            shapes,
            n_weights: nw,
            n_stats: ns,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn n_weights(&self) -> usize {
        self.n_weights
    }

    pub fn n_stats(&self) -> usize {
        self.n_stats
    }

    pub fn image_len(&self) -> usize {
        self.shapes[0].len()
    }

    pub fn aux_len(&self) -> usize {
        self.spec.aux_len
    }

    pub fn output_len(&self) -> usize {
        self.shapes.last().map(Shape::len).unwrap_or(0)
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, norm scale 1 and shift 0,
    /// running mean 0 and variance 1.
    pub fn init<R: Rng>(&self, rng: &mut R) -> ParameterSet {
        let mut weights = vec![0.0; self.n_weights];
        let mut stats = vec![0.0; self.n_stats];
        for op in &self.ops {
            match *op {
                Op::Conv {
                    in_c, out_c, kh, kw, w, b, ..
                } => {
                    let bound = 1.0 / ((in_c * kh * kw) as f64).sqrt();
                    for v in &mut weights[w..b + out_c] {
                        *v = rng.random_range(-bound..bound);
                    }
                }
                Op::Dense { fan_in, fan_out, w, b } => {
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    for v in &mut weights[w..b + fan_out] {
                        *v = rng.random_range(-bound..bound);
                    }
                }
                Op::Norm {
                    dim, gamma, var, ..
                } => {
                    weights[gamma..gamma + dim].fill(1.0);
                    stats[var..var + dim].fill(1.0);
                }
                _ => {}
            }
        }
        ParameterSet { weights, stats }
    }

    fn check(&self, params: &ParameterSet, image: &[f64], aux: &[f64]) -> Result<()> {
        let pairs = [
            (self.n_weights, params.weights.len(), "weights"),
            (self.n_stats, params.stats.len(), "norm statistics"),
            (self.image_len(), image.len(), "image input"),
            (self.spec.aux_len, aux.len(), "auxiliary input"),
        ];
        for (expected, actual, context) in pairs {
            if expected != actual {
                return Err(Error::Shape {
                    expected,
                    actual,
                    context,
                });
            }
        }
        Ok(())
    }

    pub fn forward(&self, params: &ParameterSet, image: &[f64], aux: &[f64]) -> Result<Vec<f64>> {
        let mut trace = self.forward_traced(params, image, aux)?;
        Ok(trace.acts.pop().unwrap_or_default())
    }

    pub fn forward_traced(&self, params: &ParameterSet, image: &[f64], aux: &[f64]) -> Result<Trace> {
        self.forward_prefix(params, image, aux, self.ops.len())
    }

    /// Runs only the first `upto` layers.
    fn forward_prefix(&self, params: &ParameterSet, image: &[f64], aux: &[f64], upto: usize) -> Result<Trace> {
        self.check(params, image, aux)?;
        let pw = &params.weights;
        let mut acts = Vec::with_capacity(self.ops.len() + 1);
        let mut argmax = Vec::with_capacity(self.ops.len());
        acts.push(image.to_vec());
        for op in &self.ops[..upto] {
            let x = acts.last().expect("input pushed");
            let mut idx = Vec::new();
            let y = match *op {
                Op::Conv {
                    in_c,
                    out_c,
                    kh,
                    kw,
                    stride,
                    ph,
                    pw: pad_w,
                    in_h,
                    in_w,
                    out_h,
                    out_w,
                    w,
                    b,
                } => {
                    let g = ConvGeom {
                        in_c,
                        kh,
                        kw,
                        stride,
                        ph,
                        pw: pad_w,
                        in_h,
                        in_w,
                        out_h,
                        out_w,
                    };
                    let k = g.patch_len();
                    let cols = g.im2col(x);
                    let npos = out_h * out_w;
                    let mut y = vec![0.0; out_c * npos];
                    for o in 0..out_c {
                        let row = &pw[w + o * k..w + (o + 1) * k];
                        for p in 0..npos {
                            y[o * npos + p] = pw[b + o] + dot(row, &cols[p * k..(p + 1) * k]);
                        }
                    }
                    y
                }
                Op::Pool {
                    c,
                    in_h,
                    in_w,
                    wh,
                    ww,
                    out_h,
                    out_w,
                } => {
                    let mut y = vec![0.0; c * out_h * out_w];
                    idx = vec![0; y.len()];
                    for ch in 0..c {
                        for i in 0..out_h {
                            for j in 0..out_w {
                                let mut best = usize::MAX;
                                for r in i * wh..((i + 1) * wh).min(in_h) {
                                    for q in j * ww..((j + 1) * ww).min(in_w) {
                                        let k = (ch * in_h + r) * in_w + q;
                                        if best == usize::MAX || x[k] > x[best] {
                                            best = k;
                                        }
                                    }
                                }
                                let o = (ch * out_h + i) * out_w + j;
                                y[o] = x[best];
                                idx[o] = best;
                            }
                        }
                    }
                    y
                }
                Op::Dense { fan_in, fan_out, w, b } => (0..fan_out)
                    .map(|o| {
                        let row = &pw[w + o * fan_in..w + (o + 1) * fan_in];
                        pw[b + o] + dot(row, x)
                    })
                    .collect(),
                Op::Act(a) => x.iter().map(|&v| activate(a, v)).collect(),
                Op::Concat => x.iter().chain(aux).copied().collect(),
                Op::Norm {
                    dim,
                    gamma,
                    beta,
                    mean,
                    var,
                } => (0..dim)
                    .map(|k| {
                        let sd = (params.stats[var + k] + NORM_EPS).sqrt();
                        pw[gamma + k] * (x[k] - params.stats[mean + k]) / sd + pw[beta + k]
                    })
                    .collect(),
            };
            argmax.push(idx);
            acts.push(y);
        }
        Ok(Trace { acts, argmax })
    }

    /// Back-propagates `out_grad` (d objective / d output) through `trace`.
    /// Norm statistics are treated as constants.
    pub fn backward(&self, params: &ParameterSet, trace: &Trace, out_grad: &[f64]) -> Result<Gradients> {
        let mut weights = vec![0.0; self.n_weights];
        let (image, aux) = self.backward_into(params, trace, out_grad, &mut weights)?;
        Ok(Gradients { weights, image, aux })
    }

    /// Like `backward` but accumulates the weight gradient into `acc`.
    pub fn backward_into(
        &self,
        params: &ParameterSet,
        trace: &Trace,
        out_grad: &[f64],
        acc: &mut [f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        self.backprop(params, trace, out_grad, Some(acc), false)
    }

    /// Gradient with respect to the auxiliary input only.
    pub fn aux_gradient(&self, params: &ParameterSet, trace: &Trace, out_grad: &[f64]) -> Result<Vec<f64>> {
        Ok(self.backprop(params, trace, out_grad, None, true)?.1)
    }

    fn backprop(
        &self,
        params: &ParameterSet,
        trace: &Trace,
        out_grad: &[f64],
        mut acc: Option<&mut [f64]>,
        stop_at_concat: bool,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        if out_grad.len() != self.output_len() {
            return Err(Error::Shape {
                expected: self.output_len(),
                actual: out_grad.len(),
                context: "output gradient",
            });
        }
        if let Some(n) = acc.as_ref().map(|a| a.len()).filter(|&n| n != self.n_weights) {
            return Err(Error::Shape {
                expected: self.n_weights,
                actual: n,
                context: "gradient accumulator",
            });
        }
        let pw = &params.weights;
        let mut dy = out_grad.to_vec();
        let mut aux_grad = vec![0.0; self.spec.aux_len];
        for (li, op) in self.ops.iter().enumerate().rev() {
            let x = &trace.acts[li];
            let y = &trace.acts[li + 1];
            dy = match *op {
                Op::Conv {
                    in_c,
                    out_c,
                    kh,
                    kw,
                    stride,
                    ph,
                    pw: pad_w,
                    in_h,
                    in_w,
                    out_h,
                    out_w,
                    w,
                    b,
                } => {
                    let geom = ConvGeom {
                        in_c,
                        kh,
                        kw,
                        stride,
                        ph,
                        pw: pad_w,
                        in_h,
                        in_w,
                        out_h,
                        out_w,
                    };
                    let k = geom.patch_len();
                    let cols = geom.im2col(x);
                    let npos = out_h * out_w;
                    let mut dcols = vec![0.0; cols.len()];
                    for o in 0..out_c {
                        let wrow = w + o * k..w + (o + 1) * k;
                        for p in 0..npos {
                            let g = dy[o * npos + p];
                            if g == 0.0 {
                                continue;
                            }
                            let patch = p * k..(p + 1) * k;
                            if let Some(acc) = acc.as_deref_mut() {
                                acc[b + o] += g;
                                for (a, &v) in acc[wrow.clone()].iter_mut().zip(&cols[patch.clone()]) {
                                    *a += g * v;
                                }
                            }
                            for (d, &wv) in dcols[patch].iter_mut().zip(&pw[wrow.clone()]) {
                                *d += g * wv;
                            }
                        }
                    }
                    geom.col2im(&dcols, x.len())
                }
                Op::Pool { .. } => {
                    let mut dx = vec![0.0; x.len()];
                    for (o, &k) in trace.argmax[li].iter().enumerate() {
                        dx[k] += dy[o];
                    }
                    dx
                }
                Op::Dense { fan_in, fan_out, w, b } => {
                    let mut dx = vec![0.0; fan_in];
                    for o in 0..fan_out {
                        let g = dy[o];
                        if g == 0.0 {
                            continue;
                        }
                        let row = w + o * fan_in..w + (o + 1) * fan_in;
                        if let Some(acc) = acc.as_deref_mut() {
                            acc[b + o] += g;
                            for (a, &xk) in acc[row.clone()].iter_mut().zip(x) {
                                *a += g * xk;
                            }
                        }
                        for (d, &wk) in dx.iter_mut().zip(&pw[row]) {
                            *d += g * wk;
                        }
                    }
                    dx
                }
                Op::Act(a) => dy
                    .iter()
                    .zip(x.iter().zip(y))
                    .map(|(g, (&xv, &yv))| g * derivative(a, xv, yv))
                    .collect(),
                Op::Concat => {
                    let n = x.len();
                    aux_grad.copy_from_slice(&dy[n..]);
                    if stop_at_concat {
                        return Ok((Vec::new(), aux_grad));
                    }
                    dy.truncate(n);
                    dy
                }
                Op::Norm {
                    dim,
                    gamma,
                    beta,
                    mean,
                    var,
                } => (0..dim)
                    .map(|k| {
                        let sd = (params.stats[var + k] + NORM_EPS).sqrt();
                        let xhat = (x[k] - params.stats[mean + k]) / sd;
                        if let Some(acc) = acc.as_deref_mut() {
                            acc[gamma + k] += dy[k] * xhat;
                            acc[beta + k] += dy[k];
                        }
                        dy[k] * pw[gamma + k] / sd
                    })
                    .collect(),
            };
        }
        Ok((dy, aux_grad))
    }

    /// Moves every norm layer's running statistics toward the batch
    /// statistics of its input: `stat = (1 - momentum) * stat + momentum * batch`.
    pub fn update_norm_stats(
        &self,
        params: &mut ParameterSet,
        batch: &[(&[f64], &[f64])],
        momentum: f64,
    ) -> Result<()> {
        if batch.is_empty() || self.n_stats == 0 {
            return Ok(());
        }
        let upto = self
            .ops
            .iter()
            .rposition(|op| matches!(op, Op::Norm { .. }))
            .map_or(0, |i| i + 1);
        let traces = batch
            .iter()
            .map(|(img, aux)| self.forward_prefix(params, img, aux, upto))
            .collect::<Result<Vec<_>>>()?;
        let n = traces.len() as f64;
        for (li, op) in self.ops.iter().enumerate() {
            if let Op::Norm { dim, mean, var, .. } = *op {
                for k in 0..dim {
                    let m = traces.iter().map(|t| t.acts[li][k]).sum::<f64>() / n;
                    let v = traces.iter().map(|t| (t.acts[li][k] - m).powi(2)).sum::<f64>() / n;
                    params.stats[mean + k] = (1.0 - momentum) * params.stats[mean + k] + momentum * m;
                    params.stats[var + k] = (1.0 - momentum) * params.stats[var + k] + momentum * v;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct ConvGeom {
    in_c: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    ph: usize,
    pw: usize,
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
}

impl ConvGeom {
    fn patch_len(&self) -> usize {
        self.in_c * self.kh * self.kw
    }

    /// Input index feeding output `(i, j)` through tap `(c, ki, kj)`, if
    /// it is not padding.
    fn source(&self, i: usize, j: usize, c: usize, ki: usize, kj: usize) -> Option<usize> {
        let r = (i * self.stride + ki).checked_sub(self.ph).filter(|&r| r < self.in_h)?;
        let q = (j * self.stride + kj).checked_sub(self.pw).filter(|&q| q < self.in_w)?;
        Some((c * self.in_h + r) * self.in_w + q)
    }

    /// One row per output position, laid out like a kernel `[c][ki][kj]`.
    fn im2col(&self, x: &[f64]) -> Vec<f64> {
        let mut cols = Vec::with_capacity(self.out_h * self.out_w * self.patch_len());
        for i in 0..self.out_h {
            for j in 0..self.out_w {
                for c in 0..self.in_c {
                    for ki in 0..self.kh {
                        for kj in 0..self.kw {
                            cols.push(self.source(i, j, c, ki, kj).map_or(0.0, |s| x[s]));
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, dcols: &[f64], len: usize) -> Vec<f64> {
        let mut dx = vec![0.0; len];
        let mut it = dcols.iter();
        for i in 0..self.out_h {
            for j in 0..self.out_w {
                for c in 0..self.in_c {
                    for ki in 0..self.kh {
                        for kj in 0..self.kw {
                            let g = it.next().copied().unwrap_or(0.0);
                            if let Some(s) = self.source(i, j, c, ki, kj) {
                                dx[s] += g;
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}

/// Dot product with eight independent partial sums.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

fn activate(a: Activation, v: f64) -> f64 {
    match a {
        Activation::Relu => v.max(0.0),
        Activation::Tanh => v.tanh(),
        Activation::None => v,
    }
}

fn derivative(a: Activation, x: f64, y: f64) -> f64 {
    match a {
        Activation::Relu => {
            if x > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Activation::Tanh => 1.0 - y * y,
        Activation::None => 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn conv_net() -> Network {
        Network::new(NetworkSpec {
            input: [1, 3, 3],
            aux_len: 0,
            layers: vec![LayerSpec::Conv {
                kernel: [2, 2],
                in_channels: 1,
                out_channels: 1,
                stride: 1,
                padding: [0, 0],
            }],
        })
        .unwrap()
    }

    #[test]
    fn hand_computed_conv() {
        let net = conv_net();
        let params = ParameterSet {
            weights: vec![1.0, 0.0, 0.0, -1.0, 0.5],
            stats: vec![],
        };
        let x: Vec<f64> = (1..=9).map(f64::from).collect();
        let y = net.forward(&params, &x, &[]).unwrap();
        assert_eq!(y, vec![-3.5, -3.5, -3.5, -3.5]);
    }

    #[test]
    fn padded_conv_and_pool() {
        let net = Network::new(NetworkSpec {
            input: [1, 3, 1],
            aux_len: 0,
            layers: vec![
                LayerSpec::Conv {
                    kernel: [3, 1],
                    in_channels: 1,
                    out_channels: 1,
                    stride: 1,
                    padding: [1, 0],
                },
                LayerSpec::Pool { window: [2, 1] },
            ],
        })
        .unwrap();
        let params = ParameterSet {
            weights: vec![1.0, 1.0, 1.0, 0.0],
            stats: vec![],
        };
        let y = net.forward(&params, &[1.0, 2.0, 4.0], &[]).unwrap();
        assert_eq!(y, vec![7.0, 6.0]);
    }

    #[test]
    fn dense_and_concat() {
        let net = Network::new(NetworkSpec {
            input: [1, 1, 2],
            aux_len: 1,
            layers: vec![
                LayerSpec::Concat,
                LayerSpec::Dense { fan_in: 3, fan_out: 1 },
                LayerSpec::Act {
                    activation: Activation::Relu,
                },
            ],
        })
        .unwrap();
        let params = ParameterSet {
            weights: vec![1.0, 2.0, 3.0, -1.0],
            stats: vec![],
        };
        assert_eq!(net.forward(&params, &[1.0, 1.0], &[1.0]).unwrap(), vec![5.0]);
        assert_eq!(net.forward(&params, &[0.0, 0.0], &[0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn wrong_input_lengths_are_shape_errors() {
        let net = conv_net();
        let params = net.init(&mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(net.forward(&params, &[0.0; 8], &[]), Err(Error::Shape { .. })));
        assert!(matches!(net.forward(&params, &[0.0; 9], &[1.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let net = Network::new(NetworkSpec {
            input: [1, 1, 16],
            aux_len: 0,
            layers: vec![LayerSpec::Concat, LayerSpec::Dense { fan_in: 16, fan_out: 8 }],
        })
        .unwrap();
        let p = net.init(&mut ChaCha8Rng::seed_from_u64(4));
        assert!(p.weights.iter().all(|w| w.abs() <= 0.25));
    }

    #[test]
    fn norm_stats_move_toward_batch() {
        let net = Network::new(NetworkSpec {
            input: [1, 1, 1],
            aux_len: 0,
            layers: vec![LayerSpec::Concat, LayerSpec::Norm],
        })
        .unwrap();
        let mut p = net.init(&mut ChaCha8Rng::seed_from_u64(0));
        let a = [2.0];
        let b = [4.0];
        net.update_norm_stats(&mut p, &[(&a, &[]), (&b, &[])], 1.0).unwrap();
        assert_eq!(p.stats, vec![3.0, 1.0]);
        let y = net.forward(&p, &[4.0], &[]).unwrap();
        assert!((y[0] - 1.0 / (1.0 + NORM_EPS).sqrt()).abs() < 1e-12);
    }
}
