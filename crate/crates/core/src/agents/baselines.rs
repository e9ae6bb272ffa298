//! Fixed rule policies used as comparison points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::Channel;
use crate::latency::DeliverVia;
use crate::sim::{Assignment, ZoneAction};

/// Every zone offloads to its highest-SNR RSU, which also computes and
/// delivers everything.
pub fn greedy(channel: &Channel<'_>) -> Assignment {
    Assignment {
        zones: (0..channel.geometry.n_zones())
            .map(|z| ZoneAction::solo(channel.best_rsu(z)))
            .collect(),
    }
}

/// Highest-SNR receiver plus a random other RSU as helper; the receiver
/// delivers.
pub fn greedy_tpsa<R: Rng>(channel: &Channel<'_>, rng: &mut R) -> Assignment {
    let n = channel.geometry.n_rsus();
    Assignment {
        zones: (0..channel.geometry.n_zones())
            .map(|z| {
                let receiver = channel.best_rsu(z);
                let helper = if n > 1 {
                    let k = rng.random_range(0..n - 1);
                    if k >= receiver {
                        k + 1
                    } else {
                        k
                    }
                } else {
                    receiver
                };
                ZoneAction {
                    receiver,
                    helper,
                    deliver: DeliverVia::Receiver,
                }
            })
            .collect(),
    }
}

/// Receiver, helper and delivering side all drawn uniformly.
pub fn random_tpsa<R: Rng>(n_zones: usize, n_rsus: usize, rng: &mut R) -> Assignment {
    Assignment {
        zones: (0..n_zones)
            .map(|_| ZoneAction {
                receiver: rng.random_range(0..n_rsus),
                helper: rng.random_range(0..n_rsus),
                deliver: if rng.random_bool(0.5) {
                    DeliverVia::Receiver
                } else {
                    DeliverVia::Helper
                },
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Greedy,
    GreedyTpsa,
    RandomTpsa,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [BaselineKind::Greedy, BaselineKind::GreedyTpsa, BaselineKind::RandomTpsa];

    pub fn label(self) -> &'static str {
        match self {
            BaselineKind::Greedy => "greedy",
            BaselineKind::GreedyTpsa => "greedy_tpsa",
            BaselineKind::RandomTpsa => "random_tpsa",
        }
    }
}

/// A baseline with its own seeded generator.
#[derive(Debug, Clone)]
pub struct Baseline {
    pub kind: BaselineKind,
    rng: ChaCha8Rng,
}

impl Baseline {
    pub fn new(kind: BaselineKind, seed: u64) -> Self {
        Self {
            kind,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn act(&mut self, channel: &Channel<'_>) -> Assignment {
        match self.kind {
            BaselineKind::Greedy => greedy(channel),
            BaselineKind::GreedyTpsa => greedy_tpsa(channel, &mut self.rng),
            BaselineKind::RandomTpsa => random_tpsa(
                channel.geometry.n_zones(),
                channel.geometry.n_rsus(),
                &mut self.rng,
            ),
        }
    }
}
