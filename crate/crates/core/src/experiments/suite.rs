//! The full experiment grid: one PPO agent per (variant, β regime), each
//! evaluated on its training environment and swept over β, plus the
//! ODE-vs-ABM dynamics comparison.
//!
//! Agent cells run on the rayon pool. Each cell derives its seed from the
//! master seed and its grid index and writes only under its own directory;
//! the manifest is assembled afterwards in grid order, so outputs do not
//! depend on scheduling.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, Variant};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::params::EpidemicParams;
use crate::ppo::{train, PpoConfig};
use crate::rng::mix_seed;

use super::dynamics::compare_dynamics;
use super::evaluate::{evaluate, EvalOptions};
use super::svg::{bar_chart, line_chart, Series};
use super::sweep::{generalization_sweep, SweepOptions};
use super::{csv_text, parse_csv};

pub const MANIFEST_VERSION: u32 = 1;
pub const SUMMARY_HEADER: &str = "name,variant,beta,seed,timesteps,mean_return,std_return,pct_lockdown,pct_distancing,pct_open,sweep_mean,sweep_std,sweep_drop";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsSettings {
    pub params: EpidemicParams,
    pub days: usize,
    pub runs: usize,
}

impl Default for DynamicsSettings {
    fn default() -> Self {
        Self {
            params: EpidemicParams::default(),
            days: 500,
            runs: 100,
        }
    }
}

pub type SweepSettings = SweepOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    /// Training regimes.
    pub betas: Vec<f64>,
    pub variants: Vec<Variant>,
    /// Base environment; each cell overrides `variant` and `params.beta`.
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    pub eval_episodes: usize,
    pub eval: EvalOptions,
    pub sweep: SweepSettings,
    pub dynamics: DynamicsSettings,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            betas: vec![0.2, 0.8],
            variants: Variant::ALL.to_vec(),
            env: EnvConfig::default(),
            ppo: PpoConfig::default(),
            eval_episodes: 200,
            eval: EvalOptions::default(),
            sweep: SweepSettings::default(),
            dynamics: DynamicsSettings::default(),
        }
    }
}

impl SuiteConfig {
    /// Large evaluation budget: 5000 episodes and 50 × 100 sweep episodes.
    pub fn full_scale() -> Self {
        Self {
            eval_episodes: 5000,
            sweep: SweepSettings {
                samples: 50,
                episodes_per_sample: 100,
                ..SweepSettings::default()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.ppo.validate()?;
        self.dynamics.params.validate()?;
        if self.betas.is_empty() || self.variants.is_empty() {
            return Err(Error::InvalidConfig(
                "suite needs at least one beta and one variant".into(),
            ));
        }
        if self.eval_episodes == 0 || self.dynamics.runs == 0 || self.dynamics.days == 0 {
            return Err(Error::InvalidConfig(
                "eval_episodes, dynamics.runs and dynamics.days must be positive".into(),
            ));
        }
        Ok(())
    }

    fn agent_cells(&self) -> Vec<(String, EnvConfig)> {
        let mut out = Vec::new();
        for &beta in &self.betas {
            for &variant in &self.variants {
                let mut cfg = self.env.clone();
                cfg.variant = variant;
                cfg.params.beta = beta;
                out.push((format!("{}_beta{beta}", variant.name()), cfg));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub kind: String,
    /// Relative to the suite output directory.
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub name: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub artifacts: Vec<Artifact>,
    /// `"ok"` or `"failed: <cause>"`.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub master_seed: u64,
    pub cells: Vec<CellRecord>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn artifacts_of_kind(&self, kind: &str) -> Vec<&Artifact> {
        self.cells
            .iter()
            .flat_map(|c| &c.artifacts)
            .filter(|a| a.kind == kind)
            .collect()
    }

    /// Every referenced file exists and every file under `dir` other than
    /// the manifest itself is referenced.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        let referenced: BTreeSet<String> = self
            .cells
            .iter()
            .flat_map(|c| &c.artifacts)
            .map(|a| a.path.clone())
            .collect();
        for p in &referenced {
            if !dir.join(p).is_file() {
                return Err(Error::MalformedReport(format!("manifest references missing file {p}")));
            }
        }
        let mut on_disk = BTreeSet::new();
        collect_files(dir, dir, &mut on_disk)?;
        on_disk.remove("manifest.json");
        if let Some(extra) = on_disk.difference(&referenced).next() {
            return Err(Error::MalformedReport(format!(
                "file {extra} is not referenced by the manifest"
            )));
        }
        Ok(())
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut BTreeSet<String>) -> Result<()> {
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("walk stays under root");
            out.insert(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

/// Per-agent headline numbers, one row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub name: String,
    pub variant: Variant,
    pub beta: f64,
    pub seed: u64,
    pub timesteps: u64,
    pub mean_return: f64,
    pub std_return: f64,
    pub pct_lockdown: f64,
    pub pct_distancing: f64,
    pub pct_open: f64,
    pub sweep_mean: f64,
    pub sweep_std: f64,
    pub sweep_drop: f64,
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<String> {
    csv_text(rows, SUMMARY_HEADER)
}

pub fn parse_summary_csv(text: &str) -> Result<Vec<SummaryRow>> {
    parse_csv(text, SUMMARY_HEADER)
}

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    /// Rows for agent cells that completed.
    pub summary: Vec<SummaryRow>,
}

struct CellOutput {
    record: CellRecord,
    summary: Option<SummaryRow>,
}

fn rel(dir: &str, file: &str) -> String {
    format!("{dir}/{file}")
}

fn run_agent_cell(suite: &SuiteConfig, name: &str, env: &EnvConfig, seed: u64, out_dir: &Path) -> CellOutput {
    let config = serde_json::json!({
        "env_config": env,
        "ppo_config": suite.ppo,
        "eval_episodes": suite.eval_episodes,
        "eval": suite.eval,
        "sweep": suite.sweep,
    });
    let mut artifacts = Vec::new();
    let result = (|| -> Result<SummaryRow> {
        let ckpt = train(env, &suite.ppo, seed)?;
        let path = rel(name, "policy.json");
        ckpt.save(out_dir.join(&path))?;
        artifacts.push(Artifact {
            kind: "checkpoint".into(),
            path,
        });

        let eval = evaluate(&ckpt, env, suite.eval_episodes, mix_seed(seed, 1), suite.eval)?;
        let path = rel(name, "eval.csv");
        write_atomic(out_dir.join(&path), eval.to_csv()?.as_bytes())?;
        artifacts.push(Artifact {
            kind: "eval".into(),
            path,
        });

        let sweep = generalization_sweep(
            &ckpt.params(),
            env,
            &suite.sweep,
            mix_seed(seed, 2),
            Some(eval.mean_return),
        )?;
        let path = rel(name, "sweep.csv");
        write_atomic(out_dir.join(&path), sweep.to_csv()?.as_bytes())?;
        artifacts.push(Artifact {
            kind: "sweep".into(),
            path,
        });

        let pct = eval.action_percentages();
        Ok(SummaryRow {
            name: name.to_string(),
            variant: env.variant,
            beta: env.params.beta,
            seed,
            timesteps: ckpt.timesteps_trained,
            mean_return: eval.mean_return,
            std_return: eval.std_return,
            pct_lockdown: pct[0],
            pct_distancing: pct[1],
            pct_open: pct[2],
            sweep_mean: sweep.mean,
            sweep_std: sweep.std,
            sweep_drop: sweep.relative_drop,
        })
    })();
    let (status, summary) = match result {
        Ok(row) => ("ok".to_string(), Some(row)),
        Err(e) => (format!("failed: {e}"), None),
    };
    CellOutput {
        record: CellRecord {
            name: name.to_string(),
            config,
            seed,
            artifacts,
            status,
        },
        summary,
    }
}

fn summary_figures(suite: &SuiteConfig, rows: &[SummaryRow]) -> Vec<(String, String)> {
    let variants: Vec<String> = suite.variants.iter().map(|v| v.name().to_string()).collect();
    let lookup = |v: Variant, beta: f64| rows.iter().find(|r| r.variant == v && r.beta == beta);
    let mut figs = Vec::new();
    for &beta in &suite.betas {
        let series = ["lockdown", "distancing", "open"]
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let vals = suite
                    .variants
                    .iter()
                    .map(|&v| {
                        lookup(v, beta)
                            .map(|r| [r.pct_lockdown, r.pct_distancing, r.pct_open][k])
                            .unwrap_or(0.0)
                    })
                    .collect();
                (name.to_string(), vals)
            })
            .collect::<Vec<_>>();
        figs.push((
            format!("actions_beta{beta}.svg"),
            bar_chart(
                &format!("Action share (%), beta = {beta}"),
                "% of steps",
                &variants,
                &series,
            ),
        ));
    }
    let reward_series: Vec<(String, Vec<f64>)> = suite
        .betas
        .iter()
        .map(|&beta| {
            let vals = suite
                .variants
                .iter()
                .map(|&v| lookup(v, beta).map(|r| r.mean_return).unwrap_or(0.0))
                .collect();
            (format!("beta = {beta}"), vals)
        })
        .collect();
    figs.push((
        "rewards.svg".into(),
        bar_chart(
            "Mean evaluation return",
            "mean per-step reward",
            &variants,
            &reward_series,
        ),
    ));
    let sweep_series: Vec<Series> = suite
        .betas
        .iter()
        .flat_map(|&beta| {
            suite.variants.iter().filter_map(move |&v| {
                lookup(v, beta).map(|r| {
                    Series::new(
                        format!("{} trained beta {beta}", v.name()),
                        vec![(0.0, r.mean_return), (1.0, r.sweep_mean)],
                    )
                })
            })
        })
        .collect();
    figs.push((
        "generalization.svg".into(),
        line_chart(
            "Train regime (0) vs beta sweep (1)",
            "evaluation",
            "mean return",
            &sweep_series,
        ),
    ));
    figs
}

/// Runs the whole grid and writes every artifact plus `manifest.json`
/// under `out_dir`. Failing cells are recorded and the rest continue.
pub fn run_suite(config: &SuiteConfig, master_seed: u64, out_dir: &Path) -> Result<SuiteOutcome> {
    config.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let cells = config.agent_cells();
    let outputs: Vec<CellOutput> = cells
        .par_iter()
        .enumerate()
        .map(|(k, (name, env))| run_agent_cell(config, name, env, mix_seed(master_seed, k as u64 + 1), out_dir))
        .collect();

    let mut records: Vec<CellRecord> = Vec::new();
    let mut summary: Vec<SummaryRow> = Vec::new();
    for out in outputs {
        records.push(out.record);
        summary.extend(out.summary);
    }

    let dyn_seed = mix_seed(master_seed, 0);
    let d = &config.dynamics;
    let mut dyn_record = CellRecord {
        name: "dynamics".into(),
        config: serde_json::to_value(d)?,
        seed: dyn_seed,
        artifacts: Vec::new(),
        status: "ok".into(),
    };
    match compare_dynamics(&d.params, d.days, d.runs, dyn_seed).and_then(|c| c.write(&out_dir.join("dynamics"))) {
        Ok(paths) => {
            for p in paths {
                let file = p
                    .file_name()
                    .expect("written file has a name")
                    .to_string_lossy()
                    .to_string();
                let kind = if file == "trajectories.csv" {
                    "trajectory"
                } else {
                    "dynamics"
                };
                dyn_record.artifacts.push(Artifact {
                    kind: kind.into(),
                    path: rel("dynamics", &file),
                });
            }
        }
        Err(e) => dyn_record.status = format!("failed: {e}"),
    }
    records.push(dyn_record);

    let mut summary_record = CellRecord {
        name: "summary".into(),
        config: serde_json::json!({ "betas": config.betas, "variants": config.variants }),
        seed: master_seed,
        artifacts: Vec::new(),
        status: "ok".into(),
    };
    let mut files = vec![("summary.csv".to_string(), summary_csv(&summary)?)];
    files.extend(summary_figures(config, &summary));
    for (file, body) in files {
        let path = rel("summary", &file);
        match write_atomic(out_dir.join(&path), body.as_bytes()) {
            Ok(()) => {
                let kind = if file.ends_with(".svg") { "figure" } else { "summary" };
                summary_record.artifacts.push(Artifact {
                    kind: kind.into(),
                    path,
                });
            }
            Err(e) => summary_record.status = format!("failed: {e}"),
        }
    }
    records.push(summary_record);

    let manifest = Manifest {
        version: MANIFEST_VERSION,
        master_seed,
        cells: records,
    };
    write_atomic(
        out_dir.join("manifest.json"),
        (serde_json::to_string_pretty(&manifest)? + "\n").as_bytes(),
    )?;
    Ok(SuiteOutcome {
        out_dir: out_dir.to_path_buf(),
        manifest,
        summary,
    })
}
