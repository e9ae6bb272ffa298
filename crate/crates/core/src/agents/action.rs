//! Mapping between simulator states/assignments and network tensors.

use crate::latency::DeliverVia;
use crate::sim::{Assignment, SlotState, ZoneAction};

/// Input scaling applied before the networks see a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateScale {
    pub workload_bits: f64,
    pub speed_mps: f64,
    pub backlog_s: f64,
}

impl Default for StateScale {
    fn default() -> Self {
        Self {
            workload_bits: 1e7,
            speed_mps: 20.0,
            backlog_s: 1.0,
        }
    }
}

/// Image `[2, segments, roads]`: workload then speed. Zone `a * segments + b`
/// sits at row `b`, column `a`.
pub fn encode_image(state: &SlotState, scale: &StateScale) -> Vec<f64> {
    let (h, w) = (state.segments, state.roads);
    let mut img = vec![0.0; 2 * h * w];
    for a in 0..w {
        for b in 0..h {
            let z = a * h + b;
            img[b * w + a] = state.workload_bits[z] / scale.workload_bits;
            img[(h + b) * w + a] = state.speed_mps[z] / scale.speed_mps;
        }
    }
    img
}

pub fn encode_backlog(state: &SlotState, scale: &StateScale) -> Vec<f64> {
    state.backlog_s.iter().map(|q| q / scale.backlog_s).collect()
}

/// `round((v + 1) / 2 * (n - 1))`, with `v` clamped to `[-1, 1]`.
pub fn channel_to_index(v: f64, n: usize) -> usize {
    let v = if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
    (((v + 1.0) / 2.0 * (n - 1) as f64).round() as usize).min(n - 1)
}

/// Raw actor output is zone-major with `channels` values per zone:
/// receiver, helper, deliver selector, then any unused extras.
pub fn decode_action(raw: &[f64], n_zones: usize, n_rsus: usize, channels: usize) -> Assignment {
    assert!(channels >= 3 && raw.len() == n_zones * channels, "raw action shape");
    let zones = (0..n_zones)
        .map(|z| {
            let c = &raw[z * channels..];
            ZoneAction {
                receiver: channel_to_index(c[0], n_rsus),
                helper: channel_to_index(c[1], n_rsus),
                deliver: if c[2] < 0.0 {
                    DeliverVia::Receiver
                } else {
                    DeliverVia::Helper
                },
            }
        })
        .collect();
    Assignment { zones }
}

/// A raw action that decodes to `assignment` (channel centers).
pub fn encode_assignment(assignment: &Assignment, n_rsus: usize, channels: usize) -> Vec<f64> {
    let center = |i: usize| {
        if n_rsus == 1 {
            0.0
        } else {
            2.0 * i as f64 / (n_rsus - 1) as f64 - 1.0
        }
    };
    let mut raw = vec![0.0; assignment.zones.len() * channels];
    for (z, a) in assignment.zones.iter().enumerate() {
        raw[z * channels] = center(a.receiver);
        raw[z * channels + 1] = center(a.helper);
        raw[z * channels + 2] = match a.deliver {
            DeliverVia::Receiver => -0.5,
            DeliverVia::Helper => 0.5,
        };
    }
    raw
}
