use serde::{Deserialize, Serialize};

use super::network::ParameterSet;
use crate::error::{Error, Result};

/// `lr(step) = initial * decay^(step / every)` with integer division.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrSchedule {
    pub initial: f64,
    pub decay: f64,
    pub every: u64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            initial: 1e-4,
            decay: 0.991,
            every: 500,
        }
    }
}

impl LrSchedule {
    pub fn constant(lr: f64) -> Self {
        Self {
            initial: lr,
            decay: 1.0,
            every: 1,
        }
    }

    pub fn at(&self, step: u64) -> f64 {
        let k = step / self.every.max(1);
        self.initial * self.decay.powi(k.min(i32::MAX as u64) as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OptimizerKind {
    /// `w -= lr * g`.
    #[default]
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, n_weights: usize) -> Self {
        let n = if matches!(kind, OptimizerKind::Sgd) { 0 } else { n_weights };
        Self {
            kind,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Descends along `grads` with step size `lr`.
    pub fn apply(&mut self, params: &mut ParameterSet, grads: &[f64], lr: f64) -> Result<()> {
        apply_check(params, grads)?;
        match self.kind {
            OptimizerKind::Sgd => apply_update(params, grads, lr)?,
            OptimizerKind::Adam { beta1, beta2, eps } => {
                self.t += 1;
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                for (i, (w, &g)) in params.weights.iter_mut().zip(grads).enumerate() {
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
                    *w -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}

fn apply_check(params: &ParameterSet, grads: &[f64]) -> Result<()> {
    if params.weights.len() != grads.len() {
        return Err(Error::Shape {
            expected: params.weights.len(),
            actual: grads.len(),
            context: "gradient",
        });
    }
    Ok(())
}

/// Plain gradient descent step.
pub fn apply_update(params: &mut ParameterSet, grads: &[f64], lr: f64) -> Result<()> {
    apply_check(params, grads)?;
    for (w, g) in params.weights.iter_mut().zip(grads) {
        *w -= lr * g;
    }
    Ok(())
}

/// `target = tau * online + (1 - tau) * target` for weights and statistics.
pub fn soft_update(target: &mut ParameterSet, online: &ParameterSet, tau: f64) -> Result<()> {
    if target.weights.len() != online.weights.len() || target.stats.len() != online.stats.len() {
        return Err(Error::Shape {
            expected: target.weights.len() + target.stats.len(),
            actual: online.weights.len() + online.stats.len(),
            context: "soft update",
        });
    }
    let blend = |t: &mut Vec<f64>, o: &[f64]| {
        for (a, b) in t.iter_mut().zip(o) {
            *a = tau * b + (1.0 - tau) * *a;
        }
    };
    blend(&mut target.weights, &online.weights);
    blend(&mut target.stats, &online.stats);
    Ok(())
}
