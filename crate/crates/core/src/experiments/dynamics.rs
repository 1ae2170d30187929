use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::abm::{run_ensemble, Ensemble};
use crate::error::Result;
use crate::io::write_atomic;
use crate::ode::{final_size, ode_trajectory, OdeState};
use crate::params::EpidemicParams;

use super::svg::{line_chart, Series};
use super::{csv_text, parse_csv};

pub const TRAJECTORY_HEADER: &str = "run_id,t,s,i,r";
pub const ENSEMBLE_HEADER: &str = "t,ode_s,ode_i,ode_r,abm_mean_s,abm_mean_i,abm_mean_r,abm_std_s,abm_std_i,abm_std_r";

/// One row of the trajectory CSV; the ODE solution uses `run_id = -1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub run_id: i64,
    pub t: u32,
    pub s: f64,
    pub i: f64,
    pub r: f64,
}

pub fn trajectory_csv(rows: &[TrajectoryRow]) -> Result<String> {
    csv_text(rows, TRAJECTORY_HEADER)
}

pub fn parse_trajectory_csv(text: &str) -> Result<Vec<TrajectoryRow>> {
    parse_csv(text, TRAJECTORY_HEADER)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct EnsembleRow {
    t: u32,
    ode_s: f64,
    ode_i: f64,
    ode_r: f64,
    abm_mean_s: f64,
    abm_mean_i: f64,
    abm_mean_r: f64,
    abm_std_s: f64,
    abm_std_i: f64,
    abm_std_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSummary {
    pub params: EpidemicParams,
    pub days: usize,
    pub runs: usize,
    pub seed: u64,
    pub ode_final_recovered_fraction: f64,
    pub abm_mean_final_recovered_fraction: f64,
    pub final_size: f64,
    /// `|ODE R(T) - mean ABM R(T)| / N`.
    pub discrepancy: f64,
    /// Largest `|ODE I(t) - mean ABM I(t)| / N` over the horizon.
    pub max_infected_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsComparison {
    pub ode: Vec<OdeState>,
    pub ensemble: Ensemble,
    pub summary: DynamicsSummary,
}

/// Integrates the ODE and runs an ABM ensemble under the same parameters.
pub fn compare_dynamics(params: &EpidemicParams, days: usize, runs: usize, seed: u64) -> Result<DynamicsComparison> {
    let ensemble = run_ensemble(params, days, runs, seed)?;
    let ode = ode_trajectory(params, days);
    let n = params.n();
    let ode_r = ode.last().map(|x| x.r).unwrap_or(0.0);
    let abm_r = ensemble.moments.last().map(|m| m.mean[2]).unwrap_or(0.0);
    let max_infected_gap = ode
        .iter()
        .zip(&ensemble.moments)
        .map(|(o, m)| (o.i - m.mean[1]).abs() / n)
        .fold(0.0, f64::max);
    let summary = DynamicsSummary {
        params: *params,
        days,
        runs,
        seed,
        ode_final_recovered_fraction: ode_r / n,
        abm_mean_final_recovered_fraction: abm_r / n,
        final_size: final_size(params),
        discrepancy: (ode_r - abm_r).abs() / n,
        max_infected_gap,
    };
    Ok(DynamicsComparison { ode, ensemble, summary })
}

impl DynamicsComparison {
    /// ODE rows (`run_id = -1`) followed by every ABM run.
    pub fn trajectory_rows(&self) -> Vec<TrajectoryRow> {
        let ode = self.ode.iter().enumerate().map(|(t, x)| TrajectoryRow {
            run_id: -1,
            t: t as u32,
            s: x.s,
            i: x.i,
            r: x.r,
        });
        let abm = self.ensemble.runs.iter().enumerate().flat_map(|(k, run)| {
            run.iter().map(move |c| TrajectoryRow {
                run_id: k as i64,
                t: c.t,
                s: f64::from(c.s),
                i: f64::from(c.i),
                r: f64::from(c.r),
            })
        });
        ode.chain(abm).collect()
    }

    pub fn ensemble_csv(&self) -> Result<String> {
        let rows = self.ode.iter().zip(&self.ensemble.moments).map(|(o, m)| EnsembleRow {
            t: m.t,
            ode_s: o.s,
            ode_i: o.i,
            ode_r: o.r,
            abm_mean_s: m.mean[0],
            abm_mean_i: m.mean[1],
            abm_mean_r: m.mean[2],
            abm_std_s: m.std[0],
            abm_std_i: m.std[1],
            abm_std_r: m.std[2],
        });
        csv_text(rows, ENSEMBLE_HEADER)
    }

    pub fn svg(&self) -> String {
        let mut series = Vec::new();
        for (k, name) in ["S", "I", "R"].iter().enumerate() {
            let ode = self
                .ode
                .iter()
                .enumerate()
                .map(|(t, x)| (t as f64, [x.s, x.i, x.r][k]))
                .collect();
            series.push(Series::new(format!("{name} ode"), ode));
            let abm = self
                .ensemble
                .moments
                .iter()
                .map(|m| (f64::from(m.t), m.mean[k]))
                .collect();
            series.push(Series::new(format!("{name} abm mean"), abm).dashed());
        }
        let p = &self.summary.params;
        line_chart(
            &format!(
                "SIR, N={} beta={} gamma={} ({} ABM runs)",
                p.population, p.beta, p.gamma, self.summary.runs
            ),
            "day",
            "individuals",
            &series,
        )
    }

    /// Writes `trajectories.csv`, `ensemble.csv`, `summary.json` and
    /// `dynamics.svg` into `dir`; returns the paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let files = [
            ("trajectories.csv", trajectory_csv(&self.trajectory_rows())?),
            ("ensemble.csv", self.ensemble_csv()?),
            ("summary.json", serde_json::to_string_pretty(&self.summary)? + "\n"),
            ("dynamics.svg", self.svg()),
        ];
        let mut out = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            write_atomic(&path, body.as_bytes())?;
            out.push(path);
        }
        Ok(out)
    }
}
