//! Re-renders any CSV emitted by this crate as an SVG figure.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::dynamics::{parse_trajectory_csv, ENSEMBLE_HEADER, TRAJECTORY_HEADER};
use super::evaluate::{EvalReport, EVAL_HEADER};
use super::suite::{parse_summary_csv, SUMMARY_HEADER};
use super::svg::{bar_chart, line_chart, Series};
use super::sweep::{SweepReport, BASELINE_ROW, SWEEP_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvKind {
    Trajectory,
    Ensemble,
    Eval,
    Sweep,
    Summary,
}

impl CsvKind {
    pub fn detect(text: &str) -> Result<Self> {
        let header = text.lines().next().unwrap_or_default().trim_end();
        Ok(match header {
            TRAJECTORY_HEADER => Self::Trajectory,
            ENSEMBLE_HEADER => Self::Ensemble,
            EVAL_HEADER => Self::Eval,
            SWEEP_HEADER => Self::Sweep,
            SUMMARY_HEADER => Self::Summary,
            other => return Err(Error::MalformedReport(format!("unrecognised CSV header `{other}`"))),
        })
    }
}

/// Picks a chart for the CSV based on its header.
pub fn plot_csv(text: &str) -> Result<String> {
    match CsvKind::detect(text)? {
        CsvKind::Trajectory => plot_trajectories(text),
        CsvKind::Ensemble => plot_ensemble(text),
        CsvKind::Eval => plot_eval(text),
        CsvKind::Sweep => plot_sweep(text),
        CsvKind::Summary => plot_summary(text),
    }
}

fn plot_trajectories(text: &str) -> Result<String> {
    let mut runs: BTreeMap<i64, Vec<(f64, f64)>> = BTreeMap::new();
    for row in parse_trajectory_csv(text)? {
        runs.entry(row.run_id).or_default().push((f64::from(row.t), row.i));
    }
    let series: Vec<Series> = runs
        .into_iter()
        .map(|(id, pts)| {
            if id < 0 {
                Series::new("ode", pts)
            } else {
                Series::new(format!("run {id}"), pts).dashed()
            }
        })
        .collect();
    Ok(line_chart("Infected per run", "day", "infected", &series))
}

fn plot_ensemble(text: &str) -> Result<String> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut cols: Vec<Vec<(f64, f64)>> = vec![Vec::new(); 6];
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::MalformedReport(e.to_string()))?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| Error::MalformedReport(format!("`{f}`: {e}")))
            })
            .collect::<Result<_>>()?;
        if vals.len() < 7 {
            return Err(Error::MalformedReport("short ensemble row".into()));
        }
        for (k, col) in cols.iter_mut().enumerate() {
            col.push((vals[0], vals[k + 1]));
        }
    }
    let names = ["S ode", "I ode", "R ode", "S abm mean", "I abm mean", "R abm mean"];
    let series: Vec<Series> = cols
        .into_iter()
        .zip(names)
        .enumerate()
        .map(|(k, (pts, name))| {
            let s = Series::new(name, pts);
            if k >= 3 {
                s.dashed()
            } else {
                s
            }
        })
        .collect();
    Ok(line_chart("ODE vs ABM ensemble mean", "day", "individuals", &series))
}

fn plot_eval(text: &str) -> Result<String> {
    let records = EvalReport::parse_csv(text)?;
    let total: u64 = records
        .iter()
        .map(|r| u64::from(r.n_lockdown + r.n_distancing + r.n_open))
        .sum();
    let pct = |f: fn(&super::EpisodeRecord) -> u32| {
        if total == 0 {
            0.0
        } else {
            100.0 * records.iter().map(|r| u64::from(f(r))).sum::<u64>() as f64 / total as f64
        }
    };
    let values = vec![pct(|r| r.n_lockdown), pct(|r| r.n_distancing), pct(|r| r.n_open)];
    let cats = ["lockdown", "distancing", "open"].map(String::from);
    Ok(bar_chart(
        &format!("Action share over {} episodes", records.len()),
        "% of steps",
        &cats,
        &[("policy".to_string(), values)],
    ))
}

fn plot_sweep(text: &str) -> Result<String> {
    let report = SweepReport::from_csv(text)?;
    let mut pts: Vec<(f64, f64)> = report
        .samples
        .iter()
        .filter(|s| s.sample != BASELINE_ROW)
        .map(|s| (s.beta, s.mean_return))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (lo, hi) = pts
        .iter()
        .fold((report.baseline_beta, report.baseline_beta), |(lo, hi), p| {
            (lo.min(p.0), hi.max(p.0))
        });
    let series = [
        Series::new("sweep", pts),
        Series::new(
            "train regime",
            vec![(lo, report.baseline_mean), (hi, report.baseline_mean)],
        )
        .dashed(),
    ];
    Ok(line_chart(
        &format!("Generalization sweep, drop {:.1}%", 100.0 * report.relative_drop),
        "beta",
        "mean return",
        &series,
    ))
}

fn plot_summary(text: &str) -> Result<String> {
    let rows = parse_summary_csv(text)?;
    let cats: Vec<String> = rows.iter().map(|r| r.name.clone()).collect();
    let series = [
        ("train regime".to_string(), rows.iter().map(|r| r.mean_return).collect()),
        ("sweep".to_string(), rows.iter().map(|r| r.sweep_mean).collect()),
    ];
    Ok(bar_chart(
        "Mean return per agent",
        "mean per-step reward",
        &cats,
        &series,
    ))
}
