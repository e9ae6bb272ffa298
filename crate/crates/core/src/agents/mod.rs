//! The learning agent and the rule-based comparison policies.

mod action;
mod baselines;
mod ddpg;
mod episode;
mod replay;

pub use action::{channel_to_index, decode_action, encode_assignment, encode_backlog, encode_image, StateScale};
pub use baselines::{greedy, greedy_tpsa, random_tpsa, Baseline, BaselineKind};
pub use ddpg::{td_target, Ddpg, DdpgConfig, NoiseConfig, TrainStats};
pub use episode::{evaluate_episode, EpisodeRecord, Policy, Trainer};
pub use replay::{Experience, ReplayBuffer};
