//! SIR epidemic dynamics (ODE and agent-based), reinforcement-learning
//! environments built on them, and a small self-contained PPO learner.

pub mod abm;
pub mod env;
pub mod error;
pub mod experiments;
pub mod io;
pub mod ode;
pub mod params;
pub mod ppo;
pub mod rng;

pub use abm::{AbmState, AgentRoster, AgentState, Ensemble};
pub use env::{Action, EnvConfig, Observation, SirEnv, StepResult, Variant};
pub use error::{Error, Result};
pub use ode::OdeState;
pub use params::EpidemicParams;
pub use ppo::{MlpParams, PolicyCheckpoint, PpoConfig};
pub use rng::RngStream;
