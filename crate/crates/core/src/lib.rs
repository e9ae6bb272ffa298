//! Collaborative edge computing for vehicular networks.
//!
//! Vehicles in road zones offload tasks to roadside units (RSUs). Each zone
//! picks a receiver RSU, a helper RSU that takes part of the work, and the
//! RSU that delivers results back. This crate models that pipeline:
//!
//! - [`channel`]: deterministic path loss, SNR and link rates.
//! - [`latency`]: offload, forward, queue and compute delays of one slot.
//! - [`tpsa`]: split ratios and greedy task ordering across RSUs, with
//!   exhaustive and random-order references.
//! - [`sim`]: the slotted environment with mobility, traffic, costs and
//!   backlogs carried between slots.
//! - [`nn`]: a small conv/dense network with hand-written backprop.
//! - [`agents`]: DDPG and rule-based server-selection policies.
//! - [`harness`]: configuration, seeded studies, CSV output and checkpoints.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod channel;
pub mod error;
pub mod harness;
pub mod latency;
pub mod nn;
pub mod sim;
pub mod tpsa;

pub use error::{Error, Result};
