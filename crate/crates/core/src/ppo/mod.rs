//! Proximal policy optimization over a small shared-trunk MLP.
//!
//! ```text
//! until total_timesteps consumed:
//!     collect rollout_steps transitions with the current policy
//!     compute GAE advantages and returns
//!     for each epoch:
//!         shuffle, split into minibatches, normalize advantages
//!         step Adam on the clipped-surrogate loss (grad-norm clipped)
//! ```
//!
//! Everything runs on one thread; a run is a pure function of its configs
//! and seed.

pub mod adam;
pub mod buffer;
pub mod categorical;
pub mod loss;
pub mod mlp;
mod train;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::env::{Action, Observation};
use crate::error::{Error, Result};
use crate::rng::RngStream;

pub use adam::{clip_grad_norm, Adam};
pub use buffer::{normalize_advantages, RolloutBuffer};
pub use categorical::{greedy_action, log_softmax, sample_action, softmax};
pub use loss::{clipped_surrogate, ppo_loss, Batch, LossCoefs, LossStats, LossWorkspace};
pub use mlp::{Architecture, MlpParams};
pub use train::{train, train_with_progress, FixedPolicy, PolicyCheckpoint, UpdateReport, CHECKPOINT_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub learning_rate: f64,
    pub rollout_steps: usize,
    pub minibatch: usize,
    pub epochs_per_update: usize,
    pub discount: f64,
    pub gae_lambda: f64,
    pub clip_range: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub total_timesteps: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            rollout_steps: 2048,
            minibatch: 64,
            epochs_per_update: 10,
            discount: 0.99,
            gae_lambda: 0.95,
            clip_range: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.0,
            max_grad_norm: 0.5,
            total_timesteps: 200_000,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("ppo: {m}")));
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return bad("learning_rate must be positive");
        }
        if self.rollout_steps == 0 || self.minibatch == 0 || self.epochs_per_update == 0 {
            return bad("rollout_steps, minibatch and epochs_per_update must be positive");
        }
        if !(0.0..=1.0).contains(&self.discount) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("discount and gae_lambda must lie in [0, 1]");
        }
        if !(self.clip_range > 0.0 && self.clip_range < 1.0) {
            return bad("clip_range must lie in (0, 1)");
        }
        if self.value_coef < 0.0 || self.entropy_coef < 0.0 || self.max_grad_norm.is_nan() || self.max_grad_norm <= 0.0
        {
            return bad("coefficients must be non-negative and max_grad_norm positive");
        }
        if self.total_timesteps == 0 {
            return bad("total_timesteps must be positive");
        }
        Ok(())
    }

    pub fn loss_coefs(&self) -> LossCoefs {
        LossCoefs {
            clip_range: self.clip_range,
            value_coef: self.value_coef,
            entropy_coef: self.entropy_coef,
        }
    }
}

/// Anything that maps an observation to action logits.
pub trait Policy {
    fn logits(&self, obs: &Observation) -> Vec<f64>;
}

impl Policy for MlpParams {
    fn logits(&self, obs: &Observation) -> Vec<f64> {
        self.forward(obs.as_slice()).0
    }
}

/// Mean diagnostics over every minibatch of one update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub loss: LossStats,
    pub grad_norm: f64,
    pub minibatches: usize,
}

/// Runs `epochs_per_update` passes of shuffled minibatch Adam steps over a
/// buffer whose advantages and returns are already computed.
pub fn ppo_update(
    params: &mut MlpParams,
    optimizer: &mut Adam,
    buffer: &RolloutBuffer,
    config: &PpoConfig,
    rng: &mut RngStream,
) -> Result<UpdateStats> {
    let n = buffer.len();
    let coefs = config.loss_coefs();
    let mut indices: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; params.weights.len()];
    let mut ws = LossWorkspace::default();
    let mut stats = UpdateStats::default();

    let mut obs: Vec<Observation> = Vec::with_capacity(config.minibatch);
    let mut actions: Vec<Action> = Vec::with_capacity(config.minibatch);
    let mut old: Vec<f64> = Vec::with_capacity(config.minibatch);
    let mut adv: Vec<f64> = Vec::with_capacity(config.minibatch);
    let mut ret: Vec<f64> = Vec::with_capacity(config.minibatch);

    for _ in 0..config.epochs_per_update {
        indices.shuffle(rng);
        for chunk in indices.chunks(config.minibatch) {
            obs.clear();
            actions.clear();
            old.clear();
            adv.clear();
            ret.clear();
            for &k in chunk {
                obs.push(buffer.observations[k]);
                actions.push(buffer.actions[k]);
                old.push(buffer.log_probs[k]);
                adv.push(buffer.advantages[k]);
                ret.push(buffer.returns[k]);
            }
            normalize_advantages(&mut adv);
            let batch = Batch {
                observations: &obs,
                actions: &actions,
                old_log_probs: &old,
                advantages: &adv,
                returns: &ret,
            };
            grad.iter_mut().for_each(|g| *g = 0.0);
            let loss = ppo_loss(params, &batch, &coefs, Some(&mut grad), &mut ws);
            if !loss.total.is_finite() {
                return Err(Error::NonFiniteLoss {
                    update: stats.minibatches,
                    detail: format!("{loss:?}"),
                });
            }
            let norm = clip_grad_norm(&mut grad, config.max_grad_norm);
            optimizer.step(&mut params.weights, &grad);

            stats.minibatches += 1;
            let w = 1.0 / stats.minibatches as f64;
            let blend = |acc: &mut f64, x: f64| *acc += (x - *acc) * w;
            blend(&mut stats.loss.total, loss.total);
            blend(&mut stats.loss.policy, loss.policy);
            blend(&mut stats.loss.value, loss.value);
            blend(&mut stats.loss.entropy, loss.entropy);
            blend(&mut stats.loss.approx_kl, loss.approx_kl);
            blend(&mut stats.loss.clip_fraction, loss.clip_fraction);
            blend(&mut stats.grad_norm, norm);
        }
    }
    Ok(stats)
}
