//! Rollout storage and generalized advantage estimation.

use crate::env::{Action, Observation};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub observations: Vec<Observation>,
    pub actions: Vec<Action>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    /// `dones[t]` is true when the transition at `t` ended its episode.
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            observations: Vec::with_capacity(n),
            actions: Vec::with_capacity(n),
            log_probs: Vec::with_capacity(n),
            rewards: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            dones: Vec::with_capacity(n),
            advantages: Vec::with_capacity(n),
            returns: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn clear(&mut self) {
        self.observations.clear();
        self.actions.clear();
        self.log_probs.clear();
        self.rewards.clear();
        self.values.clear();
        self.dones.clear();
        self.advantages.clear();
        self.returns.clear();
    }

    pub fn push(&mut self, obs: Observation, action: Action, log_prob: f64, reward: f64, value: f64, done: bool) {
        self.observations.push(obs);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.dones.push(done);
    }

    /// Fills `advantages` and `returns` by backward GAE recursion, using
    /// `bootstrap_value` as the value after the final transition.
    pub fn compute_gae(&mut self, bootstrap_value: f64, discount: f64, gae_lambda: f64) {
        let n = self.len();
        self.advantages.clear();
        self.advantages.resize(n, 0.0);
        let mut next_adv = 0.0;
        for t in (0..n).rev() {
            let next_value = if t + 1 < n { self.values[t + 1] } else { bootstrap_value };
            let live = if self.dones[t] { 0.0 } else { 1.0 };
            let delta = self.rewards[t] + discount * next_value * live - self.values[t];
            next_adv = delta + discount * gae_lambda * live * next_adv;
            self.advantages[t] = next_adv;
        }
        self.returns = self.advantages.iter().zip(&self.values).map(|(a, v)| a + v).collect();
    }
}

/// Standardizes in place with the unbiased standard deviation; leaves
/// single-element batches untouched.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.len() < 2 {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let denom = var.sqrt() + 1e-8;
    adv.iter_mut().for_each(|a| *a = (*a - mean) / denom);
}
