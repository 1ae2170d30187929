use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::ppo::Policy;
use crate::rng::{mix_seed, RngStream};

use super::evaluate::{evaluate_policy, EvalOptions, PolicyProvenance};
use super::{csv_text, mean_std, parse_csv};

pub const SWEEP_HEADER: &str = "sample,beta,mean_return";

/// Row id used for the train-regime baseline in the sweep CSV.
pub const BASELINE_ROW: i64 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    pub sample: i64,
    pub beta: f64,
    pub mean_return: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptions {
    pub beta_range: [f64; 2],
    pub samples: usize,
    pub episodes_per_sample: usize,
    /// Recovery rate held fixed across the sweep.
    pub gamma: f64,
    pub eval: EvalOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            beta_range: [0.2, 0.8],
            samples: 20,
            episodes_per_sample: 20,
            gamma: 0.1,
            eval: EvalOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub samples: Vec<SweepSample>,
    pub mean: f64,
    pub std: f64,
    pub baseline_beta: f64,
    pub baseline_mean: f64,
    /// `(baseline - mean) / |baseline|`.
    pub relative_drop: f64,
}

impl SweepReport {
    pub fn from_samples(samples: Vec<SweepSample>, baseline_beta: f64, baseline_mean: f64) -> Self {
        let returns: Vec<f64> = samples.iter().map(|s| s.mean_return).collect();
        let (mean, std) = mean_std(&returns);
        Self {
            samples,
            mean,
            std,
            baseline_beta,
            baseline_mean,
            relative_drop: (baseline_mean - mean) / baseline_mean.abs(),
        }
    }

    pub fn standard_error(&self) -> f64 {
        self.std / (self.samples.len().max(1) as f64).sqrt()
    }

    /// Baseline first (`sample = -1`), then one row per sampled β.
    pub fn to_csv(&self) -> Result<String> {
        let baseline = SweepSample {
            sample: BASELINE_ROW,
            beta: self.baseline_beta,
            mean_return: self.baseline_mean,
        };
        csv_text(std::iter::once(&baseline).chain(&self.samples), SWEEP_HEADER)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows: Vec<SweepSample> = parse_csv(text, SWEEP_HEADER)?;
        let (base, samples): (Vec<_>, Vec<_>) = rows.into_iter().partition(|r| r.sample == BASELINE_ROW);
        let base = base
            .first()
            .ok_or_else(|| Error::MalformedReport("sweep CSV has no baseline row".into()))?;
        Ok(Self::from_samples(samples, base.beta, base.mean_return))
    }
}

/// Evaluates `policy` on `samples` contact rates drawn uniformly from
/// `beta_range`, each for `episodes_per_sample` episodes, and compares the
/// result with the policy's return on `train_config` itself.
///
/// `baseline_mean` skips the baseline evaluation when the caller already has
/// it; otherwise it is measured with `samples × episodes_per_sample` episodes.
pub fn generalization_sweep(
    policy: &impl Policy,
    train_config: &EnvConfig,
    options: &SweepOptions,
    seed: u64,
    baseline_mean: Option<f64>,
) -> Result<SweepReport> {
    let [lo, hi] = options.beta_range;
    if options.samples == 0 || options.episodes_per_sample == 0 {
        return Err(Error::InvalidConfig(
            "sweep needs at least one sample and one episode".into(),
        ));
    }
    if !(lo >= 0.0 && lo <= hi) {
        return Err(Error::InvalidConfig(format!("invalid beta range [{lo}, {hi}]")));
    }
    let mut base = train_config.clone();
    base.beta_sample_range = None;
    base.params.gamma = options.gamma;

    let baseline_mean = match baseline_mean {
        Some(m) => m,
        None => {
            let episodes = options.samples * options.episodes_per_sample;
            evaluate_policy(
                policy,
                &base,
                episodes,
                mix_seed(seed, u64::MAX),
                options.eval,
                PolicyProvenance::default(),
            )?
            .mean_return
        }
    };

    let mut beta_rng = RngStream::new(seed, 0);
    let mut samples = Vec::with_capacity(options.samples);
    for k in 0..options.samples {
        let beta = if hi > lo { beta_rng.random_range(lo..=hi) } else { lo };
        let mut cfg = base.clone();
        cfg.params.beta = beta;
        let report = evaluate_policy(
            policy,
            &cfg,
            options.episodes_per_sample,
            mix_seed(seed, k as u64 + 1),
            options.eval,
            PolicyProvenance::default(),
        )?;
        samples.push(SweepSample {
            sample: k as i64,
            beta,
            mean_return: report.mean_return,
        });
    }
    Ok(SweepReport::from_samples(
        samples,
        train_config.params.beta,
        baseline_mean,
    ))
}
