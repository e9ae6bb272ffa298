use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum LayerSpec {
    /// 2-D convolution with zero padding.
    Conv {
        kernel: [usize; 2],
        in_channels: usize,
        out_channels: usize,
        stride: usize,
        padding: [usize; 2],
    },
    /// Max pooling; a partial window at the border is kept.
    Pool { window: [usize; 2] },
    Dense { fan_in: usize, fan_out: usize },
    Act { activation: Activation },
    /// Flattens the feature map and appends the auxiliary input.
    Concat,
    /// Per-feature standardization with frozen running statistics and a
    /// learned scale and shift.
    Norm,
}

/// Layer stack over a `[channels, height, width]` image plus an optional
/// auxiliary vector joined at the `Concat` layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input: [usize; 3],
    pub aux_len: usize,
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Image { c: usize, h: usize, w: usize },
    Flat(usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Image { c, h, w } => c * h * w,
            Shape::Flat(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl NetworkSpec {
    /// Walks the layers and returns every intermediate shape (input first).
    pub fn shapes(&self) -> Result<Vec<Shape>> {
        let [c, h, w] = self.input;
        let mut shape = Shape::Image { c, h, w };
        let mut out = vec![shape];
        let mut concatenated = false;
        for (i, layer) in self.layers.iter().enumerate() {
            let bad = |msg: String| Error::Structure(format!("layer {i}: {msg}"));
            shape = match (layer, shape) {
                (
                    LayerSpec::Conv {
                        kernel: [kh, kw],
                        in_channels,
                        out_channels,
                        stride,
                        padding: [ph, pw],
                    },
                    Shape::Image { c, h, w },
                ) => {
                    if *in_channels != c {
                        return Err(bad(format!("conv expects {in_channels} channels, input has {c}")));
                    }
                    if *stride == 0 || *kh == 0 || *kw == 0 || *out_channels == 0 {
                        return Err(bad("conv sizes must be positive".into()));
                    }
                    if h + 2 * ph < *kh || w + 2 * pw < *kw {
                        return Err(bad(format!("kernel {kh}x{kw} larger than padded input {h}x{w}")));
                    }
                    Shape::Image {
                        c: *out_channels,
                        h: (h + 2 * ph - kh) / stride + 1,
                        w: (w + 2 * pw - kw) / stride + 1,
                    }
                }
                (LayerSpec::Pool { window: [ph, pw] }, Shape::Image { c, h, w }) => {
                    if *ph == 0 || *pw == 0 {
                        return Err(bad("pool window must be positive".into()));
                    }
                    Shape::Image {
                        c,
                        h: h.div_ceil(*ph),
                        w: w.div_ceil(*pw),
                    }
                }
                (LayerSpec::Concat, Shape::Image { .. }) => {
                    concatenated = true;
                    Shape::Flat(shape.len() + self.aux_len)
                }
                (LayerSpec::Dense { fan_in, fan_out }, Shape::Flat(n)) => {
                    if *fan_in != n {
                        return Err(bad(format!("dense fan-in {fan_in} but input has {n} features")));
                    }
                    Shape::Flat(*fan_out)
                }
                (LayerSpec::Act { .. } | LayerSpec::Norm, s) => s,
                (l, s) => return Err(bad(format!("{l:?} cannot follow shape {s:?}"))),
            };
            out.push(shape);
        }
        if self.aux_len > 0 && !concatenated {
            return Err(Error::Structure("auxiliary input is never concatenated".into()));
        }
        Ok(out)
    }
}

/// Width preset for the actor and critic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthPreset {
    /// Full widths (1400/1400 actor, 640/512/128 critic).
    Full,
    /// Shrunk hidden layers for desk-scale runs.
    Desk,
}

fn same_conv(kh: usize, in_channels: usize, out_channels: usize) -> LayerSpec {
    LayerSpec::Conv {
        kernel: [kh, 1],
        in_channels,
        out_channels,
        stride: 1,
        padding: [(kh - 1) / 2, 0],
    }
}

fn act(activation: Activation) -> LayerSpec {
    LayerSpec::Act { activation }
}

/// State image: 2 channels (workload, speed), height = segments, width = roads.
pub fn state_image_shape(roads: usize, segments: usize) -> [usize; 3] {
    [2, segments, roads]
}

fn pooled_len(spec_prefix: &NetworkSpec) -> Result<usize> {
    Ok(spec_prefix.shapes()?.last().map(Shape::len).unwrap_or(0))
}

fn dense_stack(mut layers: Vec<LayerSpec>, mut fan_in: usize, widths: &[(usize, Activation)]) -> Vec<LayerSpec> {
    for &(fan_out, a) in widths {
        layers.push(LayerSpec::Dense { fan_in, fan_out });
        if a != Activation::None {
            layers.push(act(a));
        }
        fan_in = fan_out;
    }
    layers
}

/// Actor: conv 5x1 (2->10) relu, pool 2x1, concat backlog, norm, two tanh
/// hidden layers and a tanh output of `channels_per_zone * zones`.
pub fn actor_spec(
    roads: usize,
    segments: usize,
    n_rsus: usize,
    channels_per_zone: usize,
    preset: WidthPreset,
) -> Result<NetworkSpec> {
    let input = state_image_shape(roads, segments);
    let trunk = vec![
        same_conv(5, 2, 10),
        act(Activation::Relu),
        LayerSpec::Pool { window: [2, 1] },
    ];
    let conv_out = pooled_len(&NetworkSpec {
        input,
        aux_len: 0,
        layers: trunk.clone(),
    })?;
    let hidden = match preset {
        WidthPreset::Full => 1400,
        WidthPreset::Desk => 128,
    };
    let mut layers = trunk;
    layers.push(LayerSpec::Concat);
    layers.push(LayerSpec::Norm);
    let layers = dense_stack(
        layers,
        conv_out + n_rsus,
        &[
            (hidden, Activation::Tanh),
            (hidden, Activation::Tanh),
            (channels_per_zone * roads * segments, Activation::Tanh),
        ],
    );
    let spec = NetworkSpec {
        input,
        aux_len: n_rsus,
        layers,
    };
    spec.shapes()?;
    Ok(spec)
}

/// Critic: conv 5x1 (2->40) relu, pool, conv 3x1 (40->10) relu, pool,
/// concat backlog and action, norm, then the dense head.
pub fn critic_spec(
    roads: usize,
    segments: usize,
    n_rsus: usize,
    action_len: usize,
    preset: WidthPreset,
) -> Result<NetworkSpec> {
    let input = state_image_shape(roads, segments);
    let trunk = vec![
        same_conv(5, 2, 40),
        act(Activation::Relu),
        LayerSpec::Pool { window: [2, 1] },
        same_conv(3, 40, 10),
        act(Activation::Relu),
        LayerSpec::Pool { window: [2, 1] },
    ];
    let conv_out = pooled_len(&NetworkSpec {
        input,
        aux_len: 0,
        layers: trunk.clone(),
    })?;
    let head: &[(usize, Activation)] = match preset {
        WidthPreset::Full => &[
            (640, Activation::Relu),
            (512, Activation::Relu),
            (128, Activation::None),
            (1, Activation::Relu),
        ],
        WidthPreset::Desk => &[
            (128, Activation::Relu),
            (64, Activation::Relu),
            (32, Activation::None),
            (1, Activation::None),
        ],
    };
    let mut layers = trunk;
    layers.push(LayerSpec::Concat);
    layers.push(LayerSpec::Norm);
    let layers = dense_stack(layers, conv_out + n_rsus + action_len, head);
    let spec = NetworkSpec {
        input,
        aux_len: n_rsus + action_len,
        layers,
    };
    spec.shapes()?;
    Ok(spec)
}
