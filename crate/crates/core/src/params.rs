use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Epidemic parameters shared by the ODE and agent-based backends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpidemicParams {
    /// Effective contact rate per day.
    pub beta: f64,
    /// Mean recovery rate per day.
    pub gamma: f64,
    /// Total population N.
    pub population: u32,
    /// Infected count at t = 0.
    pub initial_infected: u32,
}

impl Default for EpidemicParams {
    fn default() -> Self {
        Self {
            beta: 0.2,
            gamma: 0.1,
            population: 500,
            initial_infected: 5,
        }
    }
}

impl EpidemicParams {
    pub fn new(beta: f64, gamma: f64, population: u32, initial_infected: u32) -> Result<Self> {
        let p = Self {
            beta,
            gamma,
            population,
            initial_infected,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::InvalidParams(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        if self.population == 0 {
            return Err(Error::InvalidParams("population must be positive".into()));
        }
        if self.initial_infected == 0 || self.initial_infected > self.population {
            return Err(Error::InvalidParams(format!(
                "initial_infected must lie in [1, {}], got {}",
                self.population, self.initial_infected
            )));
        }
        Ok(())
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn n(&self) -> f64 {
        f64::from(self.population)
    }

    /// Basic reproduction number β/γ.
    pub fn r0(&self) -> f64 {
        self.beta / self.gamma
    }

    /// Fixed infectious period in days used by the agent-based backend.
    pub fn infectious_days(&self) -> usize {
        ((1.0 / self.gamma).round() as usize).max(1)
    }
}
