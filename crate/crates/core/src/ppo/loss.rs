//! Clipped-surrogate PPO loss with its analytic gradient.

use crate::env::{Action, Observation};

use super::categorical::{entropy, log_softmax};
use super::mlp::{Activations, MlpParams};

/// `min(ρ·A, clip(ρ, 1-ε, 1+ε)·A)` for one sample.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip_range: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_range, 1.0 + clip_range);
    (ratio * advantage).min(clipped * advantage)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefs {
    pub clip_range: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

/// Borrowed view of one minibatch.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub observations: &'a [Observation],
    pub actions: &'a [Action],
    pub old_log_probs: &'a [f64],
    pub advantages: &'a [f64],
    pub returns: &'a [f64],
}

impl Batch<'_> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossStats {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Reusable buffers for [`ppo_loss`].
#[derive(Debug, Default)]
pub struct LossWorkspace {
    act: Activations,
    scratch: (Vec<f64>, Vec<f64>),
    dlogits: Vec<f64>,
}

/// Evaluates
/// `-mean(surrogate) + value_coef·mean((V - R)²) - entropy_coef·mean(H)`
/// and, when `grad` is given, adds its gradient with respect to the weights.
pub fn ppo_loss(
    params: &MlpParams,
    batch: &Batch<'_>,
    coefs: &LossCoefs,
    grad: Option<&mut [f64]>,
    ws: &mut LossWorkspace,
) -> LossStats {
    let n = batch.len() as f64;
    let mut stats = LossStats::default();
    let mut grad = grad;
    for k in 0..batch.len() {
        params.forward_cached(batch.observations[k].as_slice(), &mut ws.act);
        let lp = log_softmax(&ws.act.logits);
        let a = batch.actions[k].index();
        let log_ratio = lp[a] - batch.old_log_probs[k];
        let ratio = log_ratio.exp();
        let adv = batch.advantages[k];
        let unclipped = ratio * adv;
        let surrogate = clipped_surrogate(ratio, adv, coefs.clip_range);
        let h = entropy(&lp);
        let v_err = ws.act.value - batch.returns[k];

        stats.policy -= surrogate / n;
        stats.value += v_err * v_err / n;
        stats.entropy += h / n;
        stats.approx_kl += ((ratio - 1.0) - log_ratio) / n;
        if (ratio - 1.0).abs() > coefs.clip_range {
            stats.clip_fraction += 1.0 / n;
        }

        if let Some(g) = grad.as_deref_mut() {
            // The min() picks the unclipped branch (gradient A) unless the
            // clipped branch is strictly smaller, which is constant in ρ.
            let dratio = if unclipped <= surrogate { -adv / n } else { 0.0 };
            ws.dlogits.clear();
            ws.dlogits.extend(lp.iter().enumerate().map(|(j, lpj)| {
                let p = lpj.exp();
                let onehot = if j == a { 1.0 } else { 0.0 };
                let d_policy = dratio * ratio * (onehot - p);
                // d(-c·H)/dz_j = c·p_j·(log p_j + H)
                let d_entropy = coefs.entropy_coef / n * p * (lpj + h);
                d_policy + d_entropy
            }));
            let dvalue = coefs.value_coef * 2.0 * v_err / n;
            params.backward(&ws.act, &ws.dlogits, dvalue, g, &mut ws.scratch);
        }
    }
    stats.total = stats.policy + coefs.value_coef * stats.value - coefs.entropy_coef * stats.entropy;
    stats
}
