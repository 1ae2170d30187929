//! Categorical action distribution over logits.

use rand::Rng;

use crate::env::Action;
use crate::rng::RngStream;

/// Max-subtracted log-softmax.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

pub fn entropy(log_probs: &[f64]) -> f64 {
    -log_probs.iter().map(|lp| lp.exp() * lp).sum::<f64>()
}

/// Index drawn from `probs` by inversion of one uniform variate.
pub(crate) fn sample_index(probs: &[f64], rng: &mut RngStream) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // u landed in the rounding gap above the final cumulative sum.
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}

/// Samples an action from `softmax(logits)` and returns its log-probability.
pub fn sample_action(logits: &[f64], rng: &mut RngStream) -> (Action, f64) {
    let lp = log_softmax(logits);
    let probs: Vec<f64> = lp.iter().map(|x| x.exp()).collect();
    let k = sample_index(&probs, rng);
    (Action::from_index(k).expect("three logits"), lp[k])
}

/// Highest-probability action; ties go to the lower index.
pub fn greedy_action(logits: &[f64]) -> Action {
    let mut best = 0;
    for (k, l) in logits.iter().enumerate() {
        if *l > logits[best] {
            best = k;
        }
    }
    Action::from_index(best).expect("three logits")
}
