use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};

use crate::env::{Action, EnvConfig, Observation, SirEnv, N_ACTIONS, OBS_DIM};
use crate::error::{Error, Result};
use crate::rng::RngStream;

use super::{ppo_update, sample_action, Adam, Architecture, MlpParams, Policy, PpoConfig, RolloutBuffer, UpdateStats};

pub const CHECKPOINT_VERSION: u32 = 1;

const STREAM_INIT: u64 = 0;
const STREAM_ENV: u64 = 1;
const STREAM_ACTIONS: u64 = 2;
const STREAM_SHUFFLE: u64 = 3;

/// Trained weights plus everything needed to reproduce them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyCheckpoint {
    pub version: u32,
    pub architecture: Architecture,
    #[serde(serialize_with = "serialize_weights")]
    pub weights: Vec<f64>,
    pub env_config: EnvConfig,
    pub ppo_config: PpoConfig,
    pub seed: u64,
    pub timesteps_trained: u64,
}

/// Writes every weight with 17 significant digits.
fn serialize_weights<S: Serializer>(weights: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut text = String::with_capacity(weights.len() * 25 + 2);
    text.push('[');
    for (k, w) in weights.iter().enumerate() {
        if k > 0 {
            text.push(',');
        }
        text.push_str(&format!("{w:.16e}"));
    }
    text.push(']');
    let raw = serde_json::value::RawValue::from_string(text).map_err(serde::ser::Error::custom)?;
    raw.serialize(s)
}

impl PolicyCheckpoint {
    pub fn params(&self) -> MlpParams {
        MlpParams {
            architecture: self.architecture.clone(),
            weights: self.weights.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::ChecksumMismatch(format!(
                "unsupported checkpoint version {}",
                self.version
            )));
        }
        if self.architecture.input_dim() != OBS_DIM || self.architecture.actions != N_ACTIONS {
            return Err(Error::ChecksumMismatch(format!(
                "policy expects {} inputs and {} actions, environment has {OBS_DIM} and {N_ACTIONS}",
                self.architecture.input_dim(),
                self.architecture.actions
            )));
        }
        self.params().validate()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: PolicyCheckpoint =
            serde_json::from_str(text).map_err(|e| Error::ChecksumMismatch(format!("unreadable checkpoint: {e}")))?;
        ckpt.validate()?;
        Ok(ckpt)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path, self.to_json()?.as_bytes())
    }
}

impl Policy for PolicyCheckpoint {
    fn logits(&self, obs: &Observation) -> Vec<f64> {
        self.params().forward(obs.as_slice()).0
    }
}

/// Always plays the same action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedPolicy(pub Action);

impl Policy for FixedPolicy {
    fn logits(&self, _obs: &Observation) -> Vec<f64> {
        let mut l = vec![f64::NEG_INFINITY; N_ACTIONS];
        l[self.0.index()] = 0.0;
        l
    }
}

/// Progress record emitted after every update.
#[derive(Debug, Clone, Copy)]
pub struct UpdateReport {
    pub update: usize,
    pub timesteps: u64,
    pub episodes_finished: usize,
    /// Mean undiscounted episode return over episodes that ended during the
    /// rollout, if any did.
    pub mean_episode_return: Option<f64>,
    pub stats: UpdateStats,
}

pub fn train(env_config: &EnvConfig, ppo_config: &PpoConfig, seed: u64) -> Result<PolicyCheckpoint> {
    train_with_progress(env_config, ppo_config, seed, |_| {})
}

pub fn train_with_progress(
    env_config: &EnvConfig,
    ppo_config: &PpoConfig,
    seed: u64,
    mut on_update: impl FnMut(&UpdateReport),
) -> Result<PolicyCheckpoint> {
    ppo_config.validate()?;
    let mut env = SirEnv::new(env_config.clone(), RngStream::new(seed, STREAM_ENV))?;
    let mut action_rng = RngStream::new(seed, STREAM_ACTIONS);
    let mut shuffle_rng = RngStream::new(seed, STREAM_SHUFFLE);
    let mut params = MlpParams::init(Architecture::default(), &mut RngStream::new(seed, STREAM_INIT));
    let mut optimizer = Adam::new(params.weights.len(), ppo_config.learning_rate);
    let mut buffer = RolloutBuffer::with_capacity(ppo_config.rollout_steps);

    let mut obs = env.reset();
    let mut timesteps = 0u64;
    let mut update = 0usize;
    let mut episode_return = 0.0;
    while timesteps < ppo_config.total_timesteps {
        buffer.clear();
        let mut finished = Vec::new();
        for _ in 0..ppo_config.rollout_steps {
            let (logits, value) = params.forward(obs.as_slice());
            let (action, log_prob) = sample_action(&logits, &mut action_rng);
            let out = env.step(action)?;
            buffer.push(obs, action, log_prob, out.reward, value, out.done);
            episode_return += out.reward;
            obs = if out.done {
                finished.push(episode_return);
                episode_return = 0.0;
                env.reset()
            } else {
                out.observation
            };
            timesteps += 1;
        }
        let bootstrap = params.forward(obs.as_slice()).1;
        buffer.compute_gae(bootstrap, ppo_config.discount, ppo_config.gae_lambda);
        let stats =
            ppo_update(&mut params, &mut optimizer, &buffer, ppo_config, &mut shuffle_rng).map_err(|e| match e {
                Error::NonFiniteLoss { detail, .. } => Error::NonFiniteLoss { update, detail },
                other => other,
            })?;
        update += 1;
        on_update(&UpdateReport {
            update,
            timesteps,
            episodes_finished: finished.len(),
            mean_episode_return: (!finished.is_empty()).then(|| finished.iter().sum::<f64>() / finished.len() as f64),
            stats,
        });
    }

    Ok(PolicyCheckpoint {
        version: CHECKPOINT_VERSION,
        architecture: params.architecture,
        weights: params.weights,
        env_config: env_config.clone(),
        ppo_config: ppo_config.clone(),
        seed,
        timesteps_trained: timesteps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::EpidemicParams;

    fn tiny_ppo() -> PpoConfig {
        PpoConfig {
            rollout_steps: 128,
            minibatch: 32,
            epochs_per_update: 2,
            total_timesteps: 256,
            ..PpoConfig::default()
        }
    }

    #[test]
    fn training_is_deterministic() {
        let env = EnvConfig::new(crate::env::Variant::Abm, EpidemicParams::default());
        let a = train(&env, &tiny_ppo(), 7).unwrap();
        let b = train(&env, &tiny_ppo(), 7).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.timesteps_trained, 256);
        let c = train(&env, &tiny_ppo(), 8).unwrap();
        assert_ne!(a.weights, c.weights);
    }

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let env = EnvConfig::default();
        let ckpt = train(&env, &tiny_ppo(), 1).unwrap();
        let text = ckpt.to_json().unwrap();
        let back = PolicyCheckpoint::from_json(&text).unwrap();
        assert_eq!(back, ckpt);
        for (a, b) in back.weights.iter().zip(&ckpt.weights) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in [
            "version",
            "architecture",
            "weights",
            "env_config",
            "ppo_config",
            "seed",
            "timesteps_trained",
        ] {
            assert!(value.get(key).is_some(), "missing {key}");
        }
        // 17 significant digits: d.dddddddddddddddde±x
        let first = text.split("\"weights\": [").nth(1).unwrap().split(',').next().unwrap();
        let mantissa = first.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{first}");
    }

    #[test]
    fn malformed_checkpoints_are_rejected() {
        let ckpt = train(&EnvConfig::default(), &tiny_ppo(), 1).unwrap();
        let mut short = ckpt.clone();
        short.weights.truncate(10);
        let err = PolicyCheckpoint::from_json(&short.to_json().unwrap()).unwrap_err();
        assert!(matches!(err, Error::ChecksumMismatch(_)));
        let mut wrong = ckpt.clone();
        wrong.version = 2;
        assert!(PolicyCheckpoint::from_json(&wrong.to_json().unwrap()).is_err());
        assert!(matches!(
            PolicyCheckpoint::from_json("{not json"),
            Err(Error::ChecksumMismatch(_))
        ));
    }

    #[test]
    fn fixed_policy_probabilities() {
        let p = FixedPolicy(Action::Open).logits(&Observation([0.0; 4]));
        assert_eq!(super::super::softmax(&p), vec![0.0, 0.0, 1.0]);
    }
}
