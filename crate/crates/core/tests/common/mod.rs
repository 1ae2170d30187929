//! Helpers shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use rand::Rng;
use sirl_core::abm::{abm_step, abm_step_naive};
use sirl_core::env::{Action, Observation};
use sirl_core::ppo::{log_softmax, ppo_loss, Architecture, Batch, LossCoefs, LossWorkspace, MlpParams};
use sirl_core::{AbmState, AgentRoster, EpidemicParams, RngStream};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};

/// New-infection counts after one day from `s` susceptibles and `i`
/// infected (a single fresh cohort) in a population of `s + i`.
pub fn new_infection_samples(s: u32, i: u32, beta: f64, samples: usize, naive: bool, seed: u64) -> Vec<u32> {
    let params = EpidemicParams {
        beta,
        gamma: 0.1,
        population: s + i,
        initial_infected: i,
    };
    let state = AbmState::initial(&params);
    let mut rng = RngStream::new(seed, 0);
    if naive {
        let roster = AgentRoster::from_state(&state);
        (0..samples)
            .map(|_| {
                let next = abm_step_naive(&roster, &params, &mut rng).unwrap();
                next.to_state(params.infectious_days()).cohorts[0]
            })
            .collect()
    } else {
        (0..samples)
            .map(|_| abm_step(&state, &params, &mut rng).unwrap().cohorts[0])
            .collect()
    }
}

fn histogram(xs: &[u32], bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    for &x in xs {
        h[x as usize] += 1.0;
    }
    h
}

/// Groups adjacent bins left to right until each group's weight reaches
/// `min_weight`; a light tail is folded into the last group.
fn pool(weights: &[f64], min_weight: f64) -> Vec<(usize, usize)> {
    let mut groups = Vec::new();
    let (mut start, mut acc) = (0, 0.0);
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if acc >= min_weight {
            groups.push((start, k + 1));
            start = k + 1;
            acc = 0.0;
        }
    }
    if start < weights.len() {
        match groups.last_mut() {
            Some(last) => last.1 = weights.len(),
            None => groups.push((0, weights.len())),
        }
    }
    groups
}

fn sum(v: &[f64], g: (usize, usize)) -> f64 {
    v[g.0..g.1].iter().sum()
}

/// Chi-square test of homogeneity for two equal-length samples over `0..=max`.
pub fn two_sample_chi_square_p(a: &[u32], b: &[u32], max: u32) -> f64 {
    let (ha, hb) = (histogram(a, max as usize + 1), histogram(b, max as usize + 1));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled: Vec<f64> = ha.iter().zip(&hb).map(|(x, y)| x + y).collect();
    let groups = pool(&pooled, 10.0);
    let mut stat = 0.0;
    for &g in &groups {
        let (oa, ob) = (sum(&ha, g), sum(&hb, g));
        let total = oa + ob;
        let (ea, eb) = (total * na / (na + nb), total * nb / (na + nb));
        stat += (oa - ea).powi(2) / ea + (ob - eb).powi(2) / eb;
    }
    let df = (groups.len() - 1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

/// Goodness-of-fit p-value of `xs` against Binomial(n, p).
pub fn binomial_gof_p(xs: &[u32], n: u32, p: f64) -> f64 {
    let dist = Binomial::new(p, u64::from(n)).unwrap();
    let total = xs.len() as f64;
    let expected: Vec<f64> = (0..=u64::from(n)).map(|k| total * dist.pmf(k)).collect();
    let observed = histogram(xs, n as usize + 1);
    let groups = pool(&expected, 5.0);
    let stat: f64 = groups
        .iter()
        .map(|&g| {
            let (o, e) = (sum(&observed, g), sum(&expected, g));
            (o - e).powi(2) / e
        })
        .sum();
    let df = (groups.len() - 1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

pub struct GradCheck {
    pub max_rel_error: f64,
    pub weights: usize,
}

/// Compares the analytic PPO loss gradient with central differences on a
/// random network and batch drawn from `seed`.
pub fn gradient_check(seed: u64, h: f64) -> GradCheck {
    let mut rng = RngStream::new(seed, 0);
    let depth = rng.random_range(1..=2);
    let mut layers = vec![4];
    for _ in 0..depth {
        layers.push(rng.random_range(2..=6));
    }
    let arch = Architecture { layers, actions: 3 };
    let mut params = MlpParams::init(arch, &mut rng);
    // Move away from the near-zero policy head so every term contributes.
    for w in &mut params.weights {
        *w += rng.random_range(-0.5..0.5);
    }
    let coefs = LossCoefs {
        clip_range: 0.2,
        value_coef: rng.random_range(0.1..1.0),
        entropy_coef: rng.random_range(0.0..0.1),
    };

    let n = rng.random_range(3..=8);
    let mut observations = Vec::new();
    let mut actions = Vec::new();
    let mut old_log_probs = Vec::new();
    let mut advantages = Vec::new();
    let mut returns = Vec::new();
    while observations.len() < n {
        let obs = Observation([rng.random(), rng.random(), rng.random(), rng.random()]);
        let action = Action::from_index(rng.random_range(0..3)).unwrap();
        let (logits, _) = params.forward(obs.as_slice());
        let lp = log_softmax(&logits)[action.index()];
        let old = lp + rng.random_range(-0.6..0.6);
        // Keep ratios clear of the clip kinks, where the loss is not smooth.
        let ratio = (lp - old).exp();
        if (ratio - 0.8).abs() < 1e-3 || (ratio - 1.2).abs() < 1e-3 {
            continue;
        }
        observations.push(obs);
        actions.push(action);
        old_log_probs.push(old);
        advantages.push(rng.random_range(-2.0..2.0));
        returns.push(rng.random_range(-1.0..1.0));
    }
    let batch = Batch {
        observations: &observations,
        actions: &actions,
        old_log_probs: &old_log_probs,
        advantages: &advantages,
        returns: &returns,
    };

    let mut ws = LossWorkspace::default();
    let mut grad = vec![0.0; params.weights.len()];
    ppo_loss(&params, &batch, &coefs, Some(&mut grad), &mut ws);

    let mut max_rel: f64 = 0.0;
    for (k, &g) in grad.iter().enumerate() {
        let w0 = params.weights[k];
        params.weights[k] = w0 + h;
        let up = ppo_loss(&params, &batch, &coefs, None, &mut ws).total;
        params.weights[k] = w0 - h;
        let down = ppo_loss(&params, &batch, &coefs, None, &mut ws).total;
        params.weights[k] = w0;
        let fd = (up - down) / (2.0 * h);
        let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-6);
        max_rel = max_rel.max(rel);
    }
    GradCheck {
        max_rel_error: max_rel,
        weights: params.weights.len(),
    }
}
