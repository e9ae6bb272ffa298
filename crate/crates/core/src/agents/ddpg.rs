use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::action::{decode_action, encode_backlog, encode_image, StateScale};
use super::replay::{Experience, ReplayBuffer};
use crate::error::{Error, Result};
use crate::nn::{
    actor_spec, critic_spec, soft_update, LrSchedule, Network, Optimizer, OptimizerKind, ParameterSet, WidthPreset,
};
use crate::sim::{Assignment, Scenario, SlotState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Standard deviation of the Gaussian added to each raw channel.
    pub initial: f64,
    /// Multiplicative decay per environment step.
    pub decay: f64,
    pub floor: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            initial: 0.5,
            decay: 0.999,
            floor: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdpgConfig {
    pub gamma: f64,
    pub actor_lr: LrSchedule,
    pub critic_lr: LrSchedule,
    pub tau: f64,
    pub noise: NoiseConfig,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    /// Environment steps between training bursts.
    pub train_every: u64,
    /// Training steps per burst.
    pub train_steps: u64,
    pub episodes: usize,
    /// Raw actor channels per zone (3, or 5 with two ignored).
    pub channels_per_zone: usize,
    /// Divisor applied to slot costs before they reach the critic;
    /// defaults to the penalty of one mean-sized failed task.
    pub cost_scale: Option<f64>,
    pub optimizer: OptimizerKind,
    /// Weight of the batch statistics in each norm-statistics refresh.
    pub norm_momentum: f64,
    /// Set from the experiment's width toggle.
    #[serde(skip)]
    pub paper_shapes: bool,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            actor_lr: LrSchedule {
                initial: 1e-5,
                decay: 0.991,
                every: 500,
            },
            critic_lr: LrSchedule {
                initial: 1e-4,
                decay: 0.991,
                every: 500,
            },
            tau: 0.01,
            noise: NoiseConfig::default(),
            buffer_capacity: 8000,
            batch_size: 128,
            train_every: 80,
            train_steps: 25,
            episodes: 3000,
            channels_per_zone: 3,
            cost_scale: None,
            optimizer: OptimizerKind::Sgd,
            norm_momentum: 0.01,
            paper_shapes: false,
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if self.train_every <= self.train_steps {
            return bad("train_every must exceed train_steps");
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return bad("batch size must be positive and at most the buffer capacity");
        }
        if self.channels_per_zone < 3 {
            return bad("at least 3 channels per zone are needed");
        }
        if !(self.actor_lr.initial >= 0.0 && self.critic_lr.initial >= 0.0) {
            return bad("learning rates must be non-negative");
        }
        if !(self.noise.initial >= 0.0 && self.noise.floor >= 0.0 && self.noise.decay > 0.0) {
            return bad("noise settings must be non-negative");
        }
        if self.cost_scale.is_some_and(|c| !(c > 0.0)) {
            return bad("cost scale must be positive");
        }
        if !(0.0..=1.0).contains(&self.norm_momentum) {
            return bad("norm momentum must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn width_preset(&self) -> WidthPreset {
        if self.paper_shapes {
            WidthPreset::Full
        } else {
            WidthPreset::Desk
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStats {
    pub critic_loss: f64,
    /// Batch mean of the critic's value at the actor's action (scaled cost).
    pub actor_objective: f64,
}

/// Target `y = c + gamma * q_next`.
pub fn td_target(cost: f64, gamma: f64, q_next: f64) -> f64 {
    cost + gamma * q_next
}

/// Actor, critic, their target copies and optimizer state.
#[derive(Debug, Clone)]
pub struct Ddpg {
    pub config: DdpgConfig,
    pub actor: Network,
    pub critic: Network,
    pub actor_params: ParameterSet,
    pub critic_params: ParameterSet,
    pub actor_target: ParameterSet,
    pub critic_target: ParameterSet,
    actor_opt: Optimizer,
    critic_opt: Optimizer,
    pub scale: StateScale,
    pub cost_scale: f64,
    pub noise_scale: f64,
    train_count: u64,
    n_zones: usize,
    n_rsus: usize,
    rng: ChaCha8Rng,
}

impl Ddpg {
    pub fn new(config: DdpgConfig, scenario: &Scenario, seed: u64) -> Result<Self> {
        config.validate()?;
        let (roads, segments, n_rsus) = (scenario.grid.roads, scenario.grid.segments, scenario.n_rsus());
        let n_zones = roads * segments;
        let preset = config.width_preset();
        let actor = Network::new(actor_spec(roads, segments, n_rsus, config.channels_per_zone, preset)?)?;
        let critic = Network::new(critic_spec(
            roads,
            segments,
            n_rsus,
            config.channels_per_zone * n_zones,
            preset,
        )?)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor_params = actor.init(&mut rng);
        let critic_params = critic.init(&mut rng);
        let cost_scale = config
            .cost_scale
            .unwrap_or(scenario.penalty_per_bit() * scenario.mean_task_bits())
            .max(f64::MIN_POSITIVE);
        let max_speed = scenario.traffic.speed_limits_mps.iter().copied().fold(0.0, f64::max);
        let scale = StateScale {
            workload_bits: scenario.mean_task_bits().max(1.0) * 2.0,
            speed_mps: if max_speed > 0.0 { max_speed } else { 1.0 },
            backlog_s: scenario.compute.slot_length_s,
        };
        Ok(Self {
            actor_opt: Optimizer::new(config.optimizer, actor.n_weights()),
            critic_opt: Optimizer::new(config.optimizer, critic.n_weights()),
            actor_target: actor_params.clone(),
            critic_target: critic_params.clone(),
            noise_scale: config.noise.initial,
            config,
            actor,
            critic,
            actor_params,
            critic_params,
            scale,
            cost_scale,
            train_count: 0,
            n_zones,
            n_rsus,
            rng,
        })
    }

    pub fn n_zones(&self) -> usize {
        self.n_zones
    }

    pub fn n_rsus(&self) -> usize {
        self.n_rsus
    }

    pub fn action_len(&self) -> usize {
        self.config.channels_per_zone * self.n_zones
    }

    pub fn train_count(&self) -> u64 {
        self.train_count
    }

    fn actor_inputs(&self, s: &SlotState) -> (Vec<f64>, Vec<f64>) {
        (encode_image(s, &self.scale), encode_backlog(s, &self.scale))
    }

    fn critic_aux(&self, s: &SlotState, action: &[f64]) -> Vec<f64> {
        let mut aux = encode_backlog(s, &self.scale);
        aux.extend_from_slice(action);
        aux
    }

    /// Policy output for `s` under `params`.
    pub fn policy(&self, params: &ParameterSet, s: &SlotState) -> Result<Vec<f64>> {
        let (img, aux) = self.actor_inputs(s);
        self.actor.forward(params, &img, &aux)
    }

    /// Critic value (scaled cost) of `action` in `s` under `params`.
    pub fn value(&self, params: &ParameterSet, s: &SlotState, action: &[f64]) -> Result<f64> {
        let img = encode_image(s, &self.scale);
        Ok(self.critic.forward(params, &img, &self.critic_aux(s, action))?[0])
    }

    pub fn decode(&self, raw: &[f64]) -> Assignment {
        decode_action(raw, self.n_zones, self.n_rsus, self.config.channels_per_zone)
    }

    /// Actor output plus Gaussian noise of the given scale, clamped to
    /// `[-1, 1]`, and its decoded assignment.
    pub fn select_action<R: Rng>(
        &self,
        s: &SlotState,
        noise_scale: f64,
        rng: &mut R,
    ) -> Result<(Vec<f64>, Assignment)> {
        let mut raw = self.policy(&self.actor_params, s)?;
        if noise_scale > 0.0 {
            let normal = Normal::new(0.0, noise_scale).map_err(|e| Error::Domain(e.to_string()))?;
            for v in &mut raw {
                *v = (*v + normal.sample(rng)).clamp(-1.0, 1.0);
            }
        }
        let assignment = self.decode(&raw);
        Ok((raw, assignment))
    }

    /// Exploratory action using the agent's own generator; decays the noise.
    pub fn explore(&mut self, s: &SlotState) -> Result<(Vec<f64>, Assignment)> {
        let mut rng = self.rng.clone();
        let out = self.select_action(s, self.noise_scale, &mut rng)?;
        self.rng = rng;
        self.noise_scale = (self.noise_scale * self.config.noise.decay).max(self.config.noise.floor);
        Ok(out)
    }

    /// One sampled minibatch update; `None` while the buffer is underfull.
    pub fn train_step(&mut self, buffer: &ReplayBuffer) -> Result<Option<TrainStats>> {
        let mut rng = self.rng.clone();
        let Some(batch) = buffer.sample(self.config.batch_size, &mut rng) else {
            return Ok(None);
        };
        self.rng = rng;
        self.train_on(&batch).map(Some)
    }

    /// Critic regression toward the target values, actor descent along the
    /// critic's action gradient, then soft target updates.
    pub fn train_on(&mut self, batch: &[&Experience]) -> Result<TrainStats> {
        if batch.is_empty() {
            return Err(Error::Domain("empty training batch".into()));
        }
        let n = batch.len() as f64;
        let step = self.train_count;

        let targets = batch
            .iter()
            .map(|e| {
                let a_next = self.policy(&self.actor_target, &e.next_state)?;
                let q_next = self.value(&self.critic_target, &e.next_state, &a_next)?;
                Ok(td_target(e.cost / self.cost_scale, self.config.gamma, q_next))
            })
            .collect::<Result<Vec<f64>>>()?;

        let critic_inputs: Vec<(Vec<f64>, Vec<f64>)> = batch
            .iter()
            .map(|e| (encode_image(&e.state, &self.scale), self.critic_aux(&e.state, &e.action)))
            .collect();
        self.refresh_critic_stats(&critic_inputs)?;
        let mut grad = vec![0.0; self.critic.n_weights()];
        let mut loss = 0.0;
        for ((img, aux), y) in critic_inputs.iter().zip(&targets) {
            let trace = self.critic.forward_traced(&self.critic_params, img, aux)?;
            let err = trace.output()[0] - y;
            loss += err * err / n;
            self.critic
                .backward_into(&self.critic_params, &trace, &[2.0 * err / n], &mut grad)?;
        }
        let lr = self.config.critic_lr.at(step);
        self.critic_opt.apply(&mut self.critic_params, &grad, lr)?;

        let states: Vec<&SlotState> = batch.iter().map(|e| &e.state).collect();
        let objective = self.update_actor_with(&states, |this, s, a| this.critic_action_grad(s, a))?;

        soft_update(&mut self.critic_target, &self.critic_params, self.config.tau)?;
        soft_update(&mut self.actor_target, &self.actor_params, self.config.tau)?;
        self.train_count += 1;
        Ok(TrainStats {
            critic_loss: loss,
            actor_objective: objective,
        })
    }

    fn refresh_critic_stats(&mut self, inputs: &[(Vec<f64>, Vec<f64>)]) -> Result<()> {
        let pairs: Vec<(&[f64], &[f64])> = inputs.iter().map(|(i, a)| (i.as_slice(), a.as_slice())).collect();
        self.critic
            .update_norm_stats(&mut self.critic_params, &pairs, self.config.norm_momentum)
    }

    /// `(Q(s, a), dQ/da)` under the online critic.
    pub fn critic_action_grad(&self, s: &SlotState, action: &[f64]) -> Result<(f64, Vec<f64>)> {
        let img = encode_image(s, &self.scale);
        let trace = self
            .critic
            .forward_traced(&self.critic_params, &img, &self.critic_aux(s, action))?;
        let g = self.critic.aux_gradient(&self.critic_params, &trace, &[1.0])?;
        Ok((trace.output()[0], g[self.n_rsus..].to_vec()))
    }

    /// Moves the actor to lower `objective(s, mu(s))` averaged over
    /// `states`, where `grad_fn` returns the objective and its gradient with
    /// respect to the action. Returns the mean objective before the step.
    pub fn update_actor_with<F>(&mut self, states: &[&SlotState], grad_fn: F) -> Result<f64>
    where
        F: Fn(&Self, &SlotState, &[f64]) -> Result<(f64, Vec<f64>)>,
    {
        let inputs: Vec<(Vec<f64>, Vec<f64>)> = states.iter().map(|s| self.actor_inputs(s)).collect();
        let pairs: Vec<(&[f64], &[f64])> = inputs.iter().map(|(i, a)| (i.as_slice(), a.as_slice())).collect();
        self.actor
            .update_norm_stats(&mut self.actor_params, &pairs, self.config.norm_momentum)?;
        let n = states.len() as f64;
        let mut grad = vec![0.0; self.actor.n_weights()];
        let mut objective = 0.0;
        for (s, (img, aux)) in states.iter().zip(&inputs) {
            let trace = self.actor.forward_traced(&self.actor_params, img, aux)?;
            let (value, da) = grad_fn(self, s, trace.output())?;
            objective += value / n;
            let da: Vec<f64> = da.iter().map(|g| g / n).collect();
            self.actor.backward_into(&self.actor_params, &trace, &da, &mut grad)?;
        }
        let lr = self.config.actor_lr.at(self.train_count);
        self.actor_opt.apply(&mut self.actor_params, &grad, lr)?;
        Ok(objective)
    }
}
