//! Fixtures shared by the criterion benches under `benches/`.

use sirl_core::ppo::{sample_action, Architecture, RolloutBuffer};
use sirl_core::{EnvConfig, MlpParams, RngStream, SirEnv, Variant};

/// A freshly initialised default network.
pub fn network(seed: u64) -> MlpParams {
    MlpParams::init(Architecture::default(), &mut RngStream::new(seed, 0))
}

/// A rollout of `steps` transitions on the ODE environment under `params`,
/// with advantages already computed.
pub fn rollout(params: &MlpParams, steps: usize, seed: u64) -> RolloutBuffer {
    let cfg = EnvConfig::new(Variant::Ode, Default::default());
    let mut env = SirEnv::new(cfg, RngStream::new(seed, 1)).expect("default config is valid");
    let mut rng = RngStream::new(seed, 2);
    let mut buffer = RolloutBuffer::with_capacity(steps);
    let mut obs = env.reset();
    for _ in 0..steps {
        let (logits, value) = params.forward(obs.as_slice());
        let (action, log_prob) = sample_action(&logits, &mut rng);
        let out = env.step(action).expect("episode is live");
        buffer.push(obs, action, log_prob, out.reward, value, out.done);
        obs = if out.done { env.reset() } else { out.observation };
    }
    let bootstrap = params.forward(obs.as_slice()).1;
    buffer.compute_gae(bootstrap, 0.99, 0.95);
    buffer
}
