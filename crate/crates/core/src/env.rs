//! Episodic control environments over the SIR backends.
//!
//! Each day the agent picks an [`Action`], which scales the contact rate.
//! The reward trades openness against the infected fraction:
//! `r = openness(a) - κ · I(t+1) / N`. Episodes end at the horizon, or
//! earlier when `terminate_on_extinction` is set and no infected remain.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::abm::{abm_step, AbmState};
use crate::error::{Error, Result};
use crate::ode::{ode_step, OdeState};
use crate::params::EpidemicParams;
use crate::rng::RngStream;

pub const OBS_DIM: usize = 4;
pub const N_ACTIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Lockdown = 0,
    Distancing = 1,
    Open = 2,
}

impl Action {
    pub const ALL: [Action; N_ACTIONS] = [Action::Lockdown, Action::Distancing, Action::Open];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }
}

/// One value per action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerAction {
    pub lockdown: f64,
    pub distancing: f64,
    pub open: f64,
}

impl PerAction {
    pub fn get(&self, a: Action) -> f64 {
        match a {
            Action::Lockdown => self.lockdown,
            Action::Distancing => self.distancing,
            Action::Open => self.open,
        }
    }

    fn values(&self) -> [f64; 3] {
        [self.lockdown, self.distancing, self.open]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Ode,
    RandomizedOde,
    Abm,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Ode, Variant::RandomizedOde, Variant::Abm];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Ode => "ode",
            Variant::RandomizedOde => "randomized_ode",
            Variant::Abm => "abm",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "ode" => Ok(Variant::Ode),
            "randomized_ode" | "rode" => Ok(Variant::RandomizedOde),
            "abm" => Ok(Variant::Abm),
            other => Err(format!(
                "unknown environment '{other}' (expected ode, randomized-ode or abm)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub variant: Variant,
    pub params: EpidemicParams,
    /// Episode length in days.
    pub horizon: u32,
    pub action_multipliers: PerAction,
    pub openness: PerAction,
    /// Weight κ of the infected fraction in the reward.
    pub infection_penalty: f64,
    /// Magnitude range of the per-compartment state noise (randomized ODE).
    pub noise_lo: u32,
    pub noise_hi: u32,
    /// When set, β is redrawn uniformly from this range at every reset.
    pub beta_sample_range: Option<[f64; 2]>,
    /// Draw the noise sign uniformly from {-1, +1}; when false every
    /// perturbation adds individuals.
    pub noise_signed: bool,
    /// End the episode as soon as no infected remain.
    pub terminate_on_extinction: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Ode,
            params: EpidemicParams::default(),
            horizon: 100,
            action_multipliers: PerAction {
                lockdown: 0.1,
                distancing: 0.5,
                open: 1.0,
            },
            openness: PerAction {
                lockdown: 0.0,
                distancing: 0.5,
                open: 1.0,
            },
            infection_penalty: 5.0,
            noise_lo: 1,
            noise_hi: 10,
            beta_sample_range: None,
            noise_signed: false,
            terminate_on_extinction: false,
        }
    }
}

impl EnvConfig {
    pub fn new(variant: Variant, params: EpidemicParams) -> Self {
        Self {
            variant,
            params,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params
            .validate()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self
            .action_multipliers
            .values()
            .iter()
            .any(|m| !(*m > 0.0 && *m <= 1.0))
        {
            return bad(format!(
                "action multipliers must lie in (0, 1]: {:?}",
                self.action_multipliers
            ));
        }
        if self.openness.values().iter().any(|o| !(0.0..=1.0).contains(o)) {
            return bad(format!("openness values must lie in [0, 1]: {:?}", self.openness));
        }
        if !(self.infection_penalty >= 0.0 && self.infection_penalty.is_finite()) {
            return bad(format!(
                "infection_penalty must be >= 0, got {}",
                self.infection_penalty
            ));
        }
        if self.noise_lo > self.noise_hi {
            return bad(format!("noise_lo {} exceeds noise_hi {}", self.noise_lo, self.noise_hi));
        }
        if let Some([lo, hi]) = self.beta_sample_range {
            if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
                return bad(format!("beta_sample_range [{lo}, {hi}] is not a valid range"));
            }
        }
        Ok(())
    }
}

/// `(S/N, I/N, R/N, t/horizon)`, each clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    fn encode(s: f64, i: f64, r: f64, t: u32, n: f64, horizon: u32) -> Self {
        let c = |x: f64| x.clamp(0.0, 1.0);
        Observation([c(s / n), c(i / n), c(r / n), c(f64::from(t) / f64::from(horizon))])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub s: f64,
    pub i: f64,
    pub r: f64,
    pub effective_beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Contact rate after applying the action's multiplier.
pub fn apply_action(beta: f64, action: Action, config: &EnvConfig) -> f64 {
    beta * config.action_multipliers.get(action)
}

/// Perturbs each compartment by an integer magnitude drawn uniformly from
/// `noise_lo..=noise_hi` (with a uniform random sign when `noise_signed`),
/// clamps to `[0, N]` and rescales so the compartments sum to N.
pub fn randomize_state(state: &OdeState, rng: &mut RngStream, config: &EnvConfig) -> OdeState {
    if config.noise_hi == 0 {
        return *state;
    }
    let mut deltas = [0i64; 3];
    for d in &mut deltas {
        let sign = if !config.noise_signed || rng.random_bool(0.5) {
            1
        } else {
            -1
        };
        let magnitude = rng.random_range(config.noise_lo..=config.noise_hi);
        *d = sign * i64::from(magnitude);
    }
    apply_perturbation(state, deltas, config.params.n())
}

pub(crate) fn apply_perturbation(state: &OdeState, deltas: [i64; 3], n: f64) -> OdeState {
    let bump = |x: f64, d: i64| (x + d as f64).clamp(0.0, n);
    let (s, i, r) = (
        bump(state.s, deltas[0]),
        bump(state.i, deltas[1]),
        bump(state.r, deltas[2]),
    );
    let total = s + i + r;
    if total <= 0.0 {
        return *state;
    }
    let scale = n / total;
    OdeState {
        s: s * scale,
        i: i * scale,
        r: r * scale,
        t: state.t,
    }
}

#[derive(Debug, Clone)]
enum Backend {
    Ode(OdeState),
    Abm(AbmState),
}

impl Backend {
    fn counts(&self) -> (f64, f64, f64) {
        match self {
            Backend::Ode(x) => (x.s, x.i, x.r),
            Backend::Abm(x) => (f64::from(x.s), f64::from(x.infected()), f64::from(x.r)),
        }
    }

    fn extinct(&self) -> bool {
        match self {
            Backend::Ode(x) => x.i < 0.5,
            Backend::Abm(x) => x.infected() == 0,
        }
    }
}

/// A single environment instance. Not shareable across threads; create one
/// per worker, each with its own stream.
#[derive(Debug, Clone)]
pub struct SirEnv {
    config: EnvConfig,
    rng: RngStream,
    beta: f64,
    state: Backend,
    t: u32,
    done: bool,
}

impl SirEnv {
    pub fn new(config: EnvConfig, rng: RngStream) -> Result<Self> {
        config.validate()?;
        let params = config.params;
        Ok(Self {
            beta: params.beta,
            state: Backend::Ode(OdeState::initial(&params)),
            config,
            rng,
            t: 0,
            done: true,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    /// Contact rate of the current episode, before any action multiplier.
    pub fn episode_beta(&self) -> f64 {
        self.beta
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn reset(&mut self) -> Observation {
        self.beta = match self.config.beta_sample_range {
            Some([lo, hi]) if hi > lo => self.rng.random_range(lo..=hi),
            Some([lo, _]) => lo,
            None => self.config.params.beta,
        };
        let params = self.config.params.with_beta(self.beta);
        self.state = match self.config.variant {
            Variant::Ode | Variant::RandomizedOde => Backend::Ode(OdeState::initial(&params)),
            Variant::Abm => Backend::Abm(AbmState::initial(&params)),
        };
        self.t = 0;
        self.done = false;
        self.observation()
    }

    pub fn observation(&self) -> Observation {
        let (s, i, r) = self.state.counts();
        Observation::encode(s, i, r, self.t, self.config.params.n(), self.config.horizon)
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        let effective_beta = apply_action(self.beta, action, &self.config);
        let params = self.config.params.with_beta(effective_beta);
        self.state = match (&self.state, self.config.variant) {
            (Backend::Ode(x), Variant::Ode) => Backend::Ode(ode_step(x, &params, 1.0)),
            (Backend::Ode(x), Variant::RandomizedOde) => {
                let next = ode_step(x, &params, 1.0);
                Backend::Ode(randomize_state(&next, &mut self.rng, &self.config))
            }
            (Backend::Abm(x), Variant::Abm) => Backend::Abm(abm_step(x, &params, &mut self.rng)?),
            _ => unreachable!("backend always matches the configured variant"),
        };
        self.t += 1;

        let (s, i, r) = self.state.counts();
        let n = self.config.params.n();
        let reward = self.config.openness.get(action) - self.config.infection_penalty * i / n;
        self.done = self.t >= self.config.horizon || (self.config.terminate_on_extinction && self.state.extinct());
        Ok(StepResult {
            observation: self.observation(),
            reward,
            done: self.done,
            info: StepInfo {
                s,
                i,
                r,
                effective_beta,
            },
        })
    }
}
