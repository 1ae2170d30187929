//! Stochastic agent-based SIR on a complete graph.
//!
//! Two backends share one transition rule. [`abm_step`] exploits agent
//! homogeneity: on a complete graph every susceptible faces the same
//! infection probability, so new infections are a single binomial draw and
//! infected agents only need to be tracked as day-of-infection cohorts.
//! [`abm_step_naive`] simulates every (infected, susceptible) pair literally
//! and is kept as a reference for the fast path.
//!
//! Within a step, infections are drawn from the pre-step infected count and
//! recoveries are applied afterwards, so an agent infected today neither
//! transmits nor recovers until the next step.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::EpidemicParams;
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbmState {
    pub s: u32,
    /// `cohorts[k]` holds agents infected exactly `k + 1` days ago.
    pub cohorts: Vec<u32>,
    pub r: u32,
    pub t: u32,
}

impl AbmState {
    /// All `I(0)` seed infections start in the youngest cohort.
    pub fn initial(params: &EpidemicParams) -> Self {
        let mut cohorts = vec![0; params.infectious_days()];
        cohorts[0] = params.initial_infected;
        Self {
            s: params.population - params.initial_infected,
            cohorts,
            r: 0,
            t: 0,
        }
    }

    pub fn infected(&self) -> u32 {
        self.cohorts.iter().sum()
    }

    pub fn total(&self) -> u32 {
        self.s + self.infected() + self.r
    }
}

/// Per-susceptible probability of at least one transmission from `i`
/// infected agents, each transmitting independently with probability β/N.
pub fn infection_probability(i: u32, params: &EpidemicParams) -> Result<f64> {
    let per_pair = params.beta / params.n();
    if !(0.0..=1.0).contains(&per_pair) {
        return Err(Error::InvalidParams(format!(
            "per-contact transmission probability beta/N = {per_pair} exceeds 1"
        )));
    }
    if i == 0 {
        return Ok(0.0);
    }
    // 1 - (1 - q)^i, computed without cancellation for small q.
    Ok(-(f64::from(i) * (-per_pair).ln_1p()).exp_m1())
}

fn binomial(n: u32, p: f64, rng: &mut RngStream) -> u32 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    let dist = Binomial::new(u64::from(n), p).expect("p checked to lie in (0, 1)");
    dist.sample(rng) as u32
}

/// Advances the cohort state by one day.
pub fn abm_step(state: &AbmState, params: &EpidemicParams, rng: &mut RngStream) -> Result<AbmState> {
    let p = infection_probability(state.infected(), params)?;
    let new_infections = binomial(state.s, p, rng);

    let mut cohorts = state.cohorts.clone();
    let recovered = cohorts.pop().unwrap_or(0);
    cohorts.insert(0, new_infections);
    Ok(AbmState {
        s: state.s - new_infections,
        cohorts,
        r: state.r + recovered,
        t: state.t + 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentState {
    Susceptible,
    /// Days since infection, starting at 1.
    Infected(u32),
    Recovered,
}

/// Explicit per-agent population for the reference backend.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentRoster {
    pub agents: Vec<AgentState>,
    pub t: u32,
}

impl AgentRoster {
    /// Expands a cohort state into individual agents, in S, I (youngest
    /// first), R order.
    pub fn from_state(state: &AbmState) -> Self {
        let mut agents = Vec::with_capacity(state.total() as usize);
        agents.extend(std::iter::repeat_n(AgentState::Susceptible, state.s as usize));
        for (k, &c) in state.cohorts.iter().enumerate() {
            agents.extend(std::iter::repeat_n(AgentState::Infected(k as u32 + 1), c as usize));
        }
        agents.extend(std::iter::repeat_n(AgentState::Recovered, state.r as usize));
        Self { agents, t: state.t }
    }

    /// Aggregates back into a cohort state with `days` cohorts.
    pub fn to_state(&self, days: usize) -> AbmState {
        let mut out = AbmState {
            s: 0,
            cohorts: vec![0; days],
            r: 0,
            t: self.t,
        };
        for a in &self.agents {
            match *a {
                AgentState::Susceptible => out.s += 1,
                AgentState::Infected(d) => out.cohorts[d as usize - 1] += 1,
                AgentState::Recovered => out.r += 1,
            }
        }
        out
    }

    pub fn infected(&self) -> usize {
        self.agents
            .iter()
            .filter(|a| matches!(a, AgentState::Infected(_)))
            .count()
    }
}

/// Literal per-pair simulation of one day. Costs O(S·I).
pub fn abm_step_naive(roster: &AgentRoster, params: &EpidemicParams, rng: &mut RngStream) -> Result<AgentRoster> {
    let per_pair = params.beta / params.n();
    if !(0.0..=1.0).contains(&per_pair) {
        return Err(Error::InvalidParams(format!(
            "per-contact transmission probability beta/N = {per_pair} exceeds 1"
        )));
    }
    let days = params.infectious_days() as u32;
    let infected = roster.infected();

    let agents = roster
        .agents
        .iter()
        .map(|a| match *a {
            AgentState::Susceptible => {
                let mut hit = false;
                for _ in 0..infected {
                    // Every attempt is drawn, even after a success.
                    hit |= rng.random::<f64>() < per_pair;
                }
                if hit {
                    AgentState::Infected(1)
                } else {
                    AgentState::Susceptible
                }
            }
            AgentState::Infected(d) if d >= days => AgentState::Recovered,
            AgentState::Infected(d) => AgentState::Infected(d + 1),
            AgentState::Recovered => AgentState::Recovered,
        })
        .collect();
    Ok(AgentRoster {
        agents,
        t: roster.t + 1,
    })
}

/// Daily aggregate counts for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SirCounts {
    pub t: u32,
    pub s: u32,
    pub i: u32,
    pub r: u32,
}

impl From<&AbmState> for SirCounts {
    fn from(st: &AbmState) -> Self {
        SirCounts {
            t: st.t,
            s: st.s,
            i: st.infected(),
            r: st.r,
        }
    }
}

/// Per-day ensemble statistic for one compartment triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyMoments {
    pub t: u32,
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub params: EpidemicParams,
    /// `runs[k][t]`; every run has `days + 1` entries.
    pub runs: Vec<Vec<SirCounts>>,
    pub moments: Vec<DailyMoments>,
}

impl Ensemble {
    pub fn mean_final_recovered_fraction(&self) -> f64 {
        self.moments.last().map(|m| m.mean[2]).unwrap_or(0.0) / self.params.n()
    }
}

/// Simulates one run of `days` steps from the initial state.
pub fn run_single(params: &EpidemicParams, days: usize, rng: &mut RngStream) -> Result<Vec<SirCounts>> {
    let mut state = AbmState::initial(params);
    let mut out = Vec::with_capacity(days + 1);
    out.push(SirCounts::from(&state));
    for _ in 0..days {
        state = abm_step(&state, params, rng)?;
        out.push(SirCounts::from(&state));
    }
    Ok(out)
}

/// Runs `runs` independent realizations; run `k` uses `RngStream(master_seed, k)`.
/// Runs execute in parallel but results are ordered by run index.
pub fn run_ensemble(params: &EpidemicParams, days: usize, runs: usize, master_seed: u64) -> Result<Ensemble> {
    params.validate()?;
    if runs == 0 || days == 0 {
        return Err(Error::InvalidConfig("runs and days must both be at least 1".into()));
    }
    let runs: Vec<Vec<SirCounts>> = (0..runs as u64)
        .into_par_iter()
        .map(|k| run_single(params, days, &mut RngStream::new(master_seed, k)))
        .collect::<Result<_>>()?;

    let n_runs = runs.len() as f64;
    let moments = (0..=days)
        .map(|t| {
            let mut mean = [0.0; 3];
            for run in &runs {
                let c = run[t];
                mean[0] += f64::from(c.s);
                mean[1] += f64::from(c.i);
                mean[2] += f64::from(c.r);
            }
            mean.iter_mut().for_each(|m| *m /= n_runs);
            let mut var = [0.0; 3];
            for run in &runs {
                let c = run[t];
                let x = [f64::from(c.s), f64::from(c.i), f64::from(c.r)];
                for j in 0..3 {
                    var[j] += (x[j] - mean[j]).powi(2);
                }
            }
            let std = var.map(|v| (v / n_runs).sqrt());
            DailyMoments { t: t as u32, mean, std }
        })
        .collect();
    Ok(Ensemble {
        params: *params,
        runs,
        moments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(beta: f64, gamma: f64, n: u32, i0: u32) -> EpidemicParams {
        EpidemicParams {
            beta,
            gamma,
            population: n,
            initial_infected: i0,
        }
    }

    #[test]
    fn infection_probability_examples() {
        let p = params(0.2, 0.1, 500, 1);
        assert_eq!(infection_probability(0, &p).unwrap(), 0.0);
        assert!((infection_probability(1, &p).unwrap() - 0.0004).abs() < 1e-15);
        let p = params(1.0, 0.1, 10, 1);
        assert!((infection_probability(5, &p).unwrap() - 0.40951).abs() < 1e-12);
        let p = params(20.0, 0.1, 10, 1);
        assert!(matches!(infection_probability(1, &p), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn deterministic_recovery_without_susceptibles() {
        let p = params(0.5, 0.1, 50, 1);
        let mut cohorts = vec![0; 10];
        cohorts[9] = 7;
        let st = AbmState {
            s: 0,
            cohorts,
            r: 43,
            t: 3,
        };
        let next = abm_step(&st, &p, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(next.r, 50);
        assert!(next.cohorts.iter().all(|&c| c == 0));
        assert_eq!(next.t, 4);
    }

    #[test]
    fn zero_beta_never_infects() {
        let p = params(0.0, 0.1, 500, 50);
        let mut st = AbmState::initial(&p);
        let mut rng = RngStream::new(3, 0);
        for _ in 0..30 {
            let next = abm_step(&st, &p, &mut rng).unwrap();
            assert_eq!(next.s, st.s);
            st = next;
        }
        assert_eq!(st.r, 50);
    }

    #[test]
    fn infectious_period_is_exact() {
        // One seed infection, no transmission: recovered exactly D steps later.
        let p = params(0.0, 0.25, 20, 1);
        let mut st = AbmState::initial(&p);
        let mut roster = AgentRoster::from_state(&st);
        let mut rng = RngStream::new(0, 0);
        for day in 1..=4 {
            st = abm_step(&st, &p, &mut rng).unwrap();
            roster = abm_step_naive(&roster, &p, &mut rng).unwrap();
            let expect_r = u32::from(day == 4);
            assert_eq!(st.r, expect_r, "day {day}");
            assert_eq!(roster.to_state(4), st);
        }
    }

    #[test]
    fn naive_absorbing_and_trivial_cases() {
        let p = params(0.5, 0.1, 10, 1);
        let roster = AgentRoster {
            agents: vec![AgentState::Recovered; 10],
            t: 0,
        };
        let next = abm_step_naive(&roster, &p, &mut RngStream::new(1, 1)).unwrap();
        assert_eq!(next.agents, roster.agents);

        let p = params(0.0, 0.1, 10, 1);
        let mut agents = vec![AgentState::Susceptible; 10];
        agents[3] = AgentState::Infected(10);
        let next = abm_step_naive(&AgentRoster { agents, t: 0 }, &p, &mut RngStream::new(1, 1)).unwrap();
        assert_eq!(next.agents[3], AgentState::Recovered);
        assert_eq!(next.agents.iter().filter(|a| **a == AgentState::Susceptible).count(), 9);
    }

    #[test]
    fn roster_round_trip() {
        let st = AbmState {
            s: 3,
            cohorts: vec![1, 0, 2],
            r: 4,
            t: 9,
        };
        assert_eq!(AgentRoster::from_state(&st).to_state(3), st);
    }

    #[test]
    fn ensemble_single_run_matches_direct_simulation() {
        let p = EpidemicParams::default();
        let ens = run_ensemble(&p, 60, 1, 11).unwrap();
        let direct = run_single(&p, 60, &mut RngStream::new(11, 0)).unwrap();
        assert_eq!(ens.runs[0], direct);
        for (m, c) in ens.moments.iter().zip(&direct) {
            assert_eq!(m.mean, [f64::from(c.s), f64::from(c.i), f64::from(c.r)]);
            assert_eq!(m.std, [0.0; 3]);
        }
    }

    #[test]
    fn ensemble_is_deterministic() {
        let p = EpidemicParams::default().with_beta(0.5);
        let a = run_ensemble(&p, 80, 8, 5).unwrap();
        let b = run_ensemble(&p, 80, 8, 5).unwrap();
        assert_eq!(a, b);
        assert!(run_ensemble(&p, 80, 0, 5).is_err());
    }

    #[test]
    fn ensemble_final_size_near_analytic() {
        let p = EpidemicParams::default();
        let ens = run_ensemble(&p, 500, 100, 2024).unwrap();
        let z = crate::ode::final_size(&p);
        assert!((ens.mean_final_recovered_fraction() - z).abs() < 0.05);
    }

    proptest! {
        #[test]
        fn exact_conservation_and_absorption(
            beta in 0.0f64..5.0,
            gamma in 0.05f64..1.0,
            n in 1u32..400,
            i0_frac in 0.0f64..1.0,
            seed in any::<u64>(),
        ) {
            let i0 = ((f64::from(n) * i0_frac) as u32).clamp(1, n);
            let p = params(beta.min(f64::from(n)), gamma, n, i0);
            let mut rng = RngStream::new(seed, 0);
            let mut st = AbmState::initial(&p);
            for _ in 0..60 {
                let next = abm_step(&st, &p, &mut rng).unwrap();
                prop_assert_eq!(next.total(), n);
                prop_assert!(next.s <= st.s);
                prop_assert!(next.r >= st.r);
                if st.infected() == 0 {
                    prop_assert_eq!(&next.cohorts, &st.cohorts);
                    prop_assert_eq!((next.s, next.r), (st.s, st.r));
                }
                st = next;
            }
        }
    }
}
