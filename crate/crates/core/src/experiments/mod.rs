//! Experiment harness: dynamics comparison, policy evaluation, β sweeps and
//! the full train/evaluate suite, with CSV and SVG outputs.

mod dynamics;
mod evaluate;
pub mod plot;
mod suite;
pub mod svg;
mod sweep;

pub use dynamics::{
    compare_dynamics, parse_trajectory_csv, trajectory_csv, DynamicsComparison, DynamicsSummary, TrajectoryRow,
};
pub use evaluate::{evaluate, evaluate_policy, EpisodeRecord, EvalOptions, EvalReport, PolicyProvenance};
pub use suite::{
    parse_summary_csv, run_suite, summary_csv, Artifact, CellRecord, DynamicsSettings, Manifest, SuiteConfig,
    SuiteOutcome, SummaryRow, SweepSettings,
};
pub use sweep::{generalization_sweep, SweepOptions, SweepReport, SweepSample};

pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Serializes rows with `header` as the first line, even when there are none.
pub(crate) fn csv_text<T: serde::Serialize>(rows: impl IntoIterator<Item = T>, header: &str) -> crate::Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header.split(','))
        .map_err(|e| crate::Error::MalformedReport(e.to_string()))?;
    for row in rows {
        w.serialize(row)
            .map_err(|e| crate::Error::MalformedReport(e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| crate::Error::MalformedReport(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| crate::Error::MalformedReport(e.to_string()))
}

pub(crate) fn parse_csv<T: serde::de::DeserializeOwned>(text: &str, header: &str) -> crate::Result<Vec<T>> {
    let first = text.lines().next().unwrap_or_default();
    if first.trim_end() != header {
        return Err(crate::Error::MalformedReport(format!(
            "expected header `{header}`, found `{first}`"
        )));
    }
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| crate::Error::MalformedReport(e.to_string()))
}
