//! Small dense/convolutional network with hand-written back-propagation.

pub mod checkpoint;
mod network;
mod optim;
mod spec;

pub use network::{Gradients, Network, ParameterSet, Trace, NORM_EPS};
pub use optim::{apply_update, soft_update, LrSchedule, Optimizer, OptimizerKind};
pub use spec::{actor_spec, critic_spec, state_image_shape, Activation, LayerSpec, NetworkSpec, Shape, WidthPreset};
