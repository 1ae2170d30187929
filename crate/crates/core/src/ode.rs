//! Deterministic SIR dynamics integrated with fixed-step RK4.

use serde::{Deserialize, Serialize};

use crate::params::EpidemicParams;

/// RK4 sub-step used inside every environment day.
pub const DEFAULT_SUBSTEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeState {
    pub s: f64,
    pub i: f64,
    pub r: f64,
    /// Elapsed days.
    pub t: f64,
}

impl OdeState {
    /// `S = N - I(0)`, `I = I(0)`, `R = 0` at day zero.
    pub fn initial(params: &EpidemicParams) -> Self {
        let i0 = f64::from(params.initial_infected);
        Self {
            s: params.n() - i0,
            i: i0,
            r: 0.0,
            t: 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.s + self.i + self.r
    }
}

/// Right-hand side `(dS, dI, dR)` of the SIR system.
pub fn ode_derivative(state: &OdeState, params: &EpidemicParams) -> (f64, f64, f64) {
    let flow = params.beta * state.s * state.i / params.n();
    let recovery = params.gamma * state.i;
    (-flow, flow - recovery, recovery)
}

/// Integrates `dt` days with RK4 at sub-step `h` (rounded so the sub-steps
/// tile `dt` exactly). No clamping is applied.
pub fn rk4_integrate(state: &OdeState, params: &EpidemicParams, dt: f64, h: f64) -> OdeState {
    let steps = ((dt / h).round() as usize).max(1);
    let h = dt / steps as f64;
    let (mut s, mut i, mut r) = (state.s, state.i, state.r);
    let f = |s: f64, i: f64| {
        let st = OdeState { s, i, r: 0.0, t: 0.0 };
        ode_derivative(&st, params)
    };
    for _ in 0..steps {
        let k1 = f(s, i);
        let k2 = f(s + 0.5 * h * k1.0, i + 0.5 * h * k1.1);
        let k3 = f(s + 0.5 * h * k2.0, i + 0.5 * h * k2.1);
        let k4 = f(s + h * k3.0, i + h * k3.1);
        s += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        i += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        r += h / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2);
    }
    OdeState {
        s,
        i,
        r,
        t: state.t + dt,
    }
}

/// Advances the state by `dt` days using RK4 at [`DEFAULT_SUBSTEP`].
///
/// Negative drift is clamped to zero and `r` absorbs the difference so that
/// `s + i + r` stays equal to N.
pub fn ode_step(state: &OdeState, params: &EpidemicParams, dt: f64) -> OdeState {
    let mut next = rk4_integrate(state, params, dt, DEFAULT_SUBSTEP);
    let n = params.n();
    next.s = next.s.clamp(0.0, n);
    next.i = next.i.clamp(0.0, n - next.s);
    next.r = (n - next.s - next.i).max(0.0);
    next
}

/// Integrates `days` whole days and returns every daily state, starting with
/// the initial one.
pub fn ode_trajectory(params: &EpidemicParams, days: usize) -> Vec<OdeState> {
    let mut out = Vec::with_capacity(days + 1);
    let mut state = OdeState::initial(params);
    out.push(state);
    for _ in 0..days {
        state = ode_step(&state, params, 1.0);
        out.push(state);
    }
    out
}

/// Asymptotic attack rate: the largest root of `z = 1 - s0·exp(-R0·z)`,
/// where `s0 = (N - I(0)) / N`, found by fixed-point iteration from `z = 1`.
pub fn final_size(params: &EpidemicParams) -> f64 {
    let r0 = params.r0();
    let s0 = (params.n() - f64::from(params.initial_infected)) / params.n();
    final_size_from(r0, s0)
}

pub(crate) fn final_size_from(r0: f64, s0: f64) -> f64 {
    // The map is a monotone contraction on the way down from 1; near R0 = 1
    // convergence is slow, hence the generous cap.
    let mut z = 1.0_f64;
    for _ in 0..10_000_000 {
        let next = 1.0 - s0 * (-r0 * z).exp();
        if (next - z).abs() < 1e-10 {
            return next.clamp(0.0, 1.0);
        }
        z = next;
    }
    z.clamp(0.0, 1.0)
}
