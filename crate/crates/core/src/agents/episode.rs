//! Episode loops for the learning agent and for fixed policies.

use super::baselines::Baseline;
use super::ddpg::{Ddpg, TrainStats};
use super::replay::{Experience, ReplayBuffer};
use crate::error::Result;
use crate::sim::{Assignment, Env, SlotMetrics, SlotState};

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Environment steps taken before this episode ended.
    pub env_steps: u64,
    pub total_cost: f64,
    pub slots: Vec<SlotMetrics>,
    /// Means over the training steps run during the episode.
    pub train: Option<TrainStats>,
    pub noise_scale: f64,
}

impl EpisodeRecord {
    pub fn mean_cost(&self) -> f64 {
        if self.slots.is_empty() {
            0.0
        } else {
            self.total_cost / self.slots.len() as f64
        }
    }
}

/// Learning loop state: the agent, its replay memory and the step counter.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub agent: Ddpg,
    pub buffer: ReplayBuffer,
    pub env_steps: u64,
    pub episodes_done: usize,
}

impl Trainer {
    pub fn new(agent: Ddpg) -> Self {
        let buffer = ReplayBuffer::new(agent.config.buffer_capacity);
        Self {
            agent,
            buffer,
            env_steps: 0,
            episodes_done: 0,
        }
    }

    /// One episode of `horizon` slots from `env.reset(seed)`: act with
    /// exploration noise, store the transition, and every `train_every`
    /// steps run `train_steps` minibatch updates.
    pub fn run_episode(&mut self, env: &mut Env, seed: u64, horizon: usize) -> Result<EpisodeRecord> {
        let mut state = env.reset(seed);
        let mut slots = Vec::with_capacity(horizon);
        let mut total_cost = 0.0;
        let (mut loss, mut objective, mut trained) = (0.0, 0.0, 0usize);
        for _ in 0..horizon {
            let (raw, assignment) = self.agent.explore(&state)?;
            let outcome = env.step(&assignment)?;
            total_cost += outcome.cost;
            slots.push(outcome.metrics());
            let next_state = outcome.next_state;
            self.buffer.push(Experience {
                state: std::mem::replace(&mut state, next_state.clone()),
                action: raw,
                cost: outcome.cost,
                next_state,
            });
            self.env_steps += 1;
            if self.env_steps.is_multiple_of(self.agent.config.train_every) {
                for _ in 0..self.agent.config.train_steps {
                    if let Some(stats) = self.agent.train_step(&self.buffer)? {
                        loss += stats.critic_loss;
                        objective += stats.actor_objective;
                        trained += 1;
                    }
                }
            }
        }
        let record = EpisodeRecord {
            episode: self.episodes_done,
            env_steps: self.env_steps,
            total_cost,
            slots,
            train: (trained > 0).then(|| TrainStats {
                critic_loss: loss / trained as f64,
                actor_objective: objective / trained as f64,
            }),
            noise_scale: self.agent.noise_scale,
        };
        self.episodes_done += 1;
        Ok(record)
    }
}

/// Any rule that maps the current slot to an assignment.
pub trait Policy {
    fn assign(&mut self, env: &Env, state: &SlotState) -> Result<Assignment>;
}

impl Policy for Baseline {
    fn assign(&mut self, env: &Env, _state: &SlotState) -> Result<Assignment> {
        Ok(self.act(&env.channel()))
    }
}

/// Noise-free actor.
impl Policy for Ddpg {
    fn assign(&mut self, _env: &Env, state: &SlotState) -> Result<Assignment> {
        let raw = self.policy(&self.actor_params, state)?;
        Ok(self.decode(&raw))
    }
}

impl<F: FnMut(&Env, &SlotState) -> Result<Assignment>> Policy for F {
    fn assign(&mut self, env: &Env, state: &SlotState) -> Result<Assignment> {
        self(env, state)
    }
}

/// Runs `policy` for `horizon` slots from `env.reset(seed)` without learning.
pub fn evaluate_episode<P: Policy + ?Sized>(
    env: &mut Env,
    policy: &mut P,
    seed: u64,
    horizon: usize,
) -> Result<Vec<SlotMetrics>> {
    let mut state = env.reset(seed);
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let a = policy.assign(env, &state)?;
        let outcome = env.step(&a)?;
        out.push(outcome.metrics());
        state = outcome.next_state;
    }
    Ok(out)
}
