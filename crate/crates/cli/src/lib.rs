//! Argument parsing and dispatch for the `sirl` binary.
//!
//! Effective settings are resolved as built-in defaults, then the
//! `--config` file, then explicit flags. Every CSV or SVG output gets a
//! `<out>.provenance.json` sidecar recording the command, seed and the
//! resolved configuration.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sirl_core::abm::run_ensemble;
use sirl_core::experiments::{
    compare_dynamics, evaluate, generalization_sweep, plot::plot_csv, run_suite, trajectory_csv, EvalOptions,
    SuiteConfig, SweepOptions, TrajectoryRow,
};
use sirl_core::io::write_atomic;
use sirl_core::ode::ode_trajectory;
use sirl_core::ppo::{train_with_progress, PolicyCheckpoint};
use sirl_core::{EnvConfig, EpidemicParams, PpoConfig, Variant};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(
    name = "sirl",
    version,
    about = "SIR epidemic simulation and PPO intervention policies"
)]
pub struct Cli {
    /// Master seed; every subcommand is deterministic given its flags and seed.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// JSON file with optional `env`, `ppo` and `suite` sections.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Suppress progress and summary lines on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate ODE or ABM trajectories and write them as CSV.
    Simulate(SimulateArgs),
    /// Compare the ODE with an ABM ensemble (CSV, JSON summary and SVG).
    Compare(CompareArgs),
    /// Train a PPO policy and save a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint and write per-episode results.
    Eval(EvalArgs),
    /// Evaluate a checkpoint over uniformly sampled contact rates.
    Sweep(SweepArgs),
    /// Run the full train/evaluate/sweep grid plus the dynamics comparison.
    Suite(SuiteArgs),
    /// Render a CSV produced by another subcommand as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Ode,
    Abm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnvKind {
    Ode,
    #[value(alias = "randomized_ode")]
    RandomizedOde,
    Abm,
}

impl From<EnvKind> for Variant {
    fn from(k: EnvKind) -> Self {
        match k {
            EnvKind::Ode => Variant::Ode,
            EnvKind::RandomizedOde => Variant::RandomizedOde,
            EnvKind::Abm => Variant::Abm,
        }
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err("must be a finite non-negative number".into())
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err("must be a finite positive number".into())
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(format!("{e}")),
    }
}

fn positive_u64(s: &str) -> Result<u64, String> {
    match s.parse::<u64>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(format!("{e}")),
    }
}

fn positive_u32(s: &str) -> Result<u32, String> {
    match s.parse::<u32>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(format!("{e}")),
    }
}

/// Epidemic parameters; unset flags fall back to the config file, then defaults.
#[derive(Debug, Clone, Args)]
pub struct EpidemicArgs {
    /// Contact rate β.
    #[arg(long, allow_hyphen_values = true, value_parser = non_negative)]
    pub beta: Option<f64>,
    /// Recovery rate γ.
    #[arg(long, allow_hyphen_values = true, value_parser = positive)]
    pub gamma: Option<f64>,
    /// Population size N.
    #[arg(long, allow_hyphen_values = true, value_parser = positive_u32)]
    pub n: Option<u32>,
    /// Initially infected individuals I(0).
    #[arg(long, allow_hyphen_values = true, value_parser = positive_u32)]
    pub i0: Option<u32>,
}

impl EpidemicArgs {
    fn apply(&self, params: &mut EpidemicParams) {
        if let Some(b) = self.beta {
            params.beta = b;
        }
        if let Some(g) = self.gamma {
            params.gamma = g;
        }
        if let Some(n) = self.n {
            params.population = n;
        }
        if let Some(i) = self.i0 {
            params.initial_infected = i;
        }
    }
}

/// Environment flags shared by train, eval and sweep.
#[derive(Debug, Clone, Args)]
pub struct EnvArgs {
    /// Environment variant.
    #[arg(long = "env", value_enum)]
    pub variant: Option<EnvKind>,
    #[command(flatten)]
    pub epidemic: EpidemicArgs,
    /// Episode length in days.
    #[arg(long, allow_hyphen_values = true, value_parser = positive_u32)]
    pub horizon: Option<u32>,
    /// Reward weight κ of the infected fraction.
    #[arg(long, allow_hyphen_values = true, value_parser = non_negative)]
    pub kappa: Option<f64>,
}

impl EnvArgs {
    fn apply(&self, env: &mut EnvConfig) {
        if let Some(v) = self.variant {
            env.variant = v.into();
        }
        self.epidemic.apply(&mut env.params);
        if let Some(h) = self.horizon {
            env.horizon = h;
        }
        if let Some(k) = self.kappa {
            env.infection_penalty = k;
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Dynamics backend.
    #[arg(long, value_enum, default_value = "abm")]
    pub model: Model,
    #[command(flatten)]
    pub epidemic: EpidemicArgs,
    /// Number of simulated days.
    #[arg(long, default_value_t = 500, value_parser = positive_usize)]
    pub days: usize,
    /// Number of ABM runs (ignored for the ODE).
    #[arg(long, default_value_t = 100, value_parser = positive_usize)]
    pub runs: usize,
    /// Output CSV; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub epidemic: EpidemicArgs,
    /// Number of simulated days.
    #[arg(long, default_value_t = 500, value_parser = positive_usize)]
    pub days: usize,
    /// Number of ABM runs in the ensemble.
    #[arg(long, default_value_t = 100, value_parser = positive_usize)]
    pub runs: usize,
    /// Directory for trajectories.csv, ensemble.csv, summary.json and dynamics.svg.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub env: EnvArgs,
    /// Training budget in environment steps.
    #[arg(long, allow_hyphen_values = true, value_parser = positive_u64)]
    pub timesteps: Option<u64>,
    /// Adam learning rate.
    #[arg(long, allow_hyphen_values = true, value_parser = positive)]
    pub learning_rate: Option<f64>,
    /// Checkpoint path (JSON).
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Checkpoint to evaluate.
    #[arg(long, value_name = "PATH")]
    pub policy: PathBuf,
    /// Environment overrides; the checkpoint's training environment is the base.
    #[command(flatten)]
    pub env: EnvArgs,
    /// Number of evaluation episodes.
    #[arg(long, default_value_t = 200, value_parser = positive_usize)]
    pub episodes: usize,
    /// Pick the most likely action instead of sampling.
    #[arg(long)]
    pub greedy: bool,
    /// Output CSV.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Checkpoint to evaluate.
    #[arg(long, value_name = "PATH")]
    pub policy: PathBuf,
    /// Environment overrides; the checkpoint's training environment is the base.
    #[command(flatten)]
    pub env: EnvArgs,
    /// Lower end of the sampled β range.
    #[arg(long, default_value_t = 0.2, allow_hyphen_values = true, value_parser = non_negative)]
    pub beta_lo: f64,
    /// Upper end of the sampled β range.
    #[arg(long, default_value_t = 0.8, allow_hyphen_values = true, value_parser = non_negative)]
    pub beta_hi: f64,
    /// Number of sampled β values.
    #[arg(long, default_value_t = 20, value_parser = positive_usize)]
    pub samples: usize,
    /// Episodes per sampled β.
    #[arg(long, default_value_t = 20, value_parser = positive_usize)]
    pub episodes: usize,
    /// Pick the most likely action instead of sampling.
    #[arg(long)]
    pub greedy: bool,
    /// Output CSV.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SuiteArgs {
    /// Output directory for all cells and manifest.json.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Use the large evaluation budget (5000 episodes, larger sweeps).
    #[arg(long)]
    pub full_scale: bool,
    /// Training budget per agent.
    #[arg(long, allow_hyphen_values = true, value_parser = positive_u64)]
    pub timesteps: Option<u64>,
    /// Evaluation episodes per agent.
    #[arg(long, allow_hyphen_values = true, value_parser = positive_usize)]
    pub eval_episodes: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    /// CSV written by simulate, compare, eval, sweep or suite.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Output SVG.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

/// Contents of the `--config` file.
#[derive(Debug, Default, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub env: Option<EnvConfig>,
    pub ppo: Option<PpoConfig>,
    pub suite: Option<SuiteConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[derive(Serialize)]
struct Provenance<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a T,
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".provenance.json");
    out.with_file_name(name)
}

struct Ctx {
    seed: u64,
    quiet: bool,
    file: FileConfig,
}

impl Ctx {
    fn log(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn write_with_provenance<T: Serialize>(&self, out: &Path, body: &[u8], command: &str, config: &T) -> Result<()> {
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        write_atomic(out, body)?;
        let prov = Provenance {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed: self.seed,
            config,
        };
        write_atomic(
            sidecar_path(out),
            (serde_json::to_string_pretty(&prov)? + "\n").as_bytes(),
        )?;
        self.log(format!("wrote {}", out.display()));
        Ok(())
    }

    fn base_env(&self) -> EnvConfig {
        self.file.env.clone().unwrap_or_default()
    }

    fn base_params(&self) -> EpidemicParams {
        self.file.env.as_ref().map(|e| e.params).unwrap_or_default()
    }
}

/// Reports an invalid combination of otherwise well-formed flags the same
/// way clap reports a bad flag, then exits with status 2.
fn usage_error(msg: impl std::fmt::Display) -> ! {
    Cli::command().error(ErrorKind::ValueValidation, msg).exit()
}

fn checked_params(params: EpidemicParams) -> EpidemicParams {
    if let Err(e) = params.validate() {
        usage_error(format!("{e} (check --beta, --gamma, --n and --i0)"));
    }
    params
}

fn checked_env(env: EnvConfig) -> EnvConfig {
    if let Err(e) = env.validate() {
        usage_error(e);
    }
    env
}

/// Parses `argv`, runs the subcommand and returns the process exit code.
/// Usage errors exit directly with status 2.
pub fn run_from<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::parse_from(argv);
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let ctx = Ctx {
        seed: cli.seed,
        quiet: cli.quiet,
        file,
    };
    match cli.command {
        Command::Simulate(a) => simulate(&ctx, a),
        Command::Compare(a) => compare(&ctx, a),
        Command::Train(a) => train_cmd(&ctx, a),
        Command::Eval(a) => eval_cmd(&ctx, a),
        Command::Sweep(a) => sweep_cmd(&ctx, a),
        Command::Suite(a) => suite_cmd(&ctx, a),
        Command::Plot(a) => plot_cmd(&ctx, a),
    }
}

fn simulate(ctx: &Ctx, a: SimulateArgs) -> Result<()> {
    let mut params = ctx.base_params();
    a.epidemic.apply(&mut params);
    let params = checked_params(params);
    let rows: Vec<TrajectoryRow> = match a.model {
        Model::Ode => ode_trajectory(&params, a.days)
            .iter()
            .enumerate()
            .map(|(t, x)| TrajectoryRow {
                run_id: -1,
                t: t as u32,
                s: x.s,
                i: x.i,
                r: x.r,
            })
            .collect(),
        Model::Abm => {
            let ens = run_ensemble(&params, a.days, a.runs, ctx.seed)?;
            ens.runs
                .iter()
                .enumerate()
                .flat_map(|(k, run)| {
                    run.iter().map(move |c| TrajectoryRow {
                        run_id: k as i64,
                        t: c.t,
                        s: f64::from(c.s),
                        i: f64::from(c.i),
                        r: f64::from(c.r),
                    })
                })
                .collect()
        }
    };
    let csv = trajectory_csv(&rows)?;
    let config = serde_json::json!({
        "model": format!("{:?}", a.model).to_lowercase(),
        "params": params,
        "days": a.days,
        "runs": if a.model == Model::Abm { a.runs } else { 1 },
    });
    match &a.out {
        Some(out) => ctx.write_with_provenance(out, csv.as_bytes(), "simulate", &config),
        None => {
            std::io::stdout()
                .lock()
                .write_all(csv.as_bytes())
                .context("writing to stdout")?;
            Ok(())
        }
    }
}

fn compare(ctx: &Ctx, a: CompareArgs) -> Result<()> {
    let mut params = ctx.base_params();
    a.epidemic.apply(&mut params);
    let params = checked_params(params);
    let c = compare_dynamics(&params, a.days, a.runs, ctx.seed)?;
    c.write(&a.out_dir)?;
    let s = &c.summary;
    ctx.log(format!(
        "ODE R/N = {:.4}, ABM mean R/N = {:.4}, discrepancy = {:.4} (final-size oracle {:.4})",
        s.ode_final_recovered_fraction, s.abm_mean_final_recovered_fraction, s.discrepancy, s.final_size
    ));
    ctx.log(format!("wrote {}", a.out_dir.display()));
    Ok(())
}

fn train_cmd(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let mut env = ctx.base_env();
    a.env.apply(&mut env);
    let env = checked_env(env);
    let mut ppo = ctx.file.ppo.clone().unwrap_or_default();
    if let Some(t) = a.timesteps {
        ppo.total_timesteps = t;
    }
    if let Some(lr) = a.learning_rate {
        ppo.learning_rate = lr;
    }
    if let Err(e) = ppo.validate() {
        usage_error(e);
    }
    let ckpt = train_with_progress(&env, &ppo, ctx.seed, |u| {
        let ret = u.mean_episode_return.map_or("n/a".to_string(), |r| format!("{r:.3}"));
        ctx.log(format!(
            "update {:>4}  steps {:>8}  episode return {ret}  loss {:.4}  grad norm {:.3}",
            u.update, u.timesteps, u.stats.loss.total, u.stats.grad_norm
        ));
    })?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    ckpt.save(&a.out)?;
    ctx.log(format!("wrote {}", a.out.display()));
    Ok(())
}

fn load_policy(path: &Path) -> Result<PolicyCheckpoint> {
    let ckpt = PolicyCheckpoint::load(path).context("loading policy")?;
    ckpt.validate()
        .with_context(|| format!("validating policy {}", path.display()))?;
    Ok(ckpt)
}

/// The checkpoint's training environment, overridden by the config file's
/// `env` section and then by flags.
fn eval_env(ctx: &Ctx, ckpt: &PolicyCheckpoint, args: &EnvArgs) -> EnvConfig {
    let mut env = ctx.file.env.clone().unwrap_or_else(|| ckpt.env_config.clone());
    args.apply(&mut env);
    checked_env(env)
}

fn eval_cmd(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    let ckpt = load_policy(&a.policy)?;
    let env = eval_env(ctx, &ckpt, &a.env);
    let options = EvalOptions { greedy: a.greedy };
    let report = evaluate(&ckpt, &env, a.episodes, ctx.seed, options)?;
    let pct = report.action_percentages();
    ctx.log(format!(
        "mean return {:.4} ± {:.4} (std {:.4}); actions lockdown {:.1}% distancing {:.1}% open {:.1}%",
        report.mean_return,
        report.standard_error(),
        report.std_return,
        pct[0],
        pct[1],
        pct[2]
    ));
    let config = serde_json::json!({
        "policy": a.policy,
        "env": env,
        "episodes": a.episodes,
        "eval": options,
        "provenance": report.policy,
    });
    ctx.write_with_provenance(&a.out, report.to_csv()?.as_bytes(), "eval", &config)
}

fn sweep_cmd(ctx: &Ctx, a: SweepArgs) -> Result<()> {
    if a.beta_lo > a.beta_hi {
        usage_error(format!(
            "--beta-lo ({}) must not exceed --beta-hi ({})",
            a.beta_lo, a.beta_hi
        ));
    }
    let ckpt = load_policy(&a.policy)?;
    let env = eval_env(ctx, &ckpt, &a.env);
    let options = SweepOptions {
        beta_range: [a.beta_lo, a.beta_hi],
        samples: a.samples,
        episodes_per_sample: a.episodes,
        // γ stays at the base environment's value (0.1 unless overridden).
        gamma: env.params.gamma,
        eval: EvalOptions { greedy: a.greedy },
    };
    let report = generalization_sweep(&ckpt.params(), &env, &options, ctx.seed, None)?;
    ctx.log(format!(
        "sweep mean {:.4} (std {:.4}) vs train-regime {:.4}: relative drop {:.2}%",
        report.mean,
        report.std,
        report.baseline_mean,
        100.0 * report.relative_drop
    ));
    let config = serde_json::json!({ "policy": a.policy, "env": env, "sweep": options });
    ctx.write_with_provenance(&a.out, report.to_csv()?.as_bytes(), "sweep", &config)
}

fn suite_cmd(ctx: &Ctx, a: SuiteArgs) -> Result<()> {
    let mut config = match (&ctx.file.suite, a.full_scale) {
        (Some(s), _) => s.clone(),
        (None, true) => SuiteConfig::full_scale(),
        (None, false) => SuiteConfig::default(),
    };
    if a.full_scale {
        let full = SuiteConfig::full_scale();
        config.eval_episodes = full.eval_episodes;
        config.sweep = full.sweep;
    }
    if let Some(env) = &ctx.file.env {
        config.env = env.clone();
    }
    if let Some(ppo) = &ctx.file.ppo {
        config.ppo = ppo.clone();
    }
    if let Some(t) = a.timesteps {
        config.ppo.total_timesteps = t;
    }
    if let Some(e) = a.eval_episodes {
        config.eval_episodes = e;
    }
    if let Err(e) = config.validate() {
        usage_error(e);
    }
    ctx.log(format!(
        "running {} agent cells ({} timesteps each) into {}",
        config.betas.len() * config.variants.len(),
        config.ppo.total_timesteps,
        a.out_dir.display()
    ));
    let out = run_suite(&config, ctx.seed, &a.out_dir)?;
    for row in &out.summary {
        ctx.log(format!(
            "{:<24} return {:.4}  actions {:.1}/{:.1}/{:.1}%  sweep drop {:.2}%",
            row.name,
            row.mean_return,
            row.pct_lockdown,
            row.pct_distancing,
            row.pct_open,
            100.0 * row.sweep_drop
        ));
    }
    let failed: Vec<_> = out.manifest.cells.iter().filter(|c| c.status != "ok").collect();
    for c in &failed {
        ctx.log(format!("cell {} {}", c.name, c.status));
    }
    if !failed.is_empty() {
        anyhow::bail!(
            "{} of {} suite cells failed; see manifest.json",
            failed.len(),
            out.manifest.cells.len()
        );
    }
    Ok(())
}

fn plot_cmd(ctx: &Ctx, a: PlotArgs) -> Result<()> {
    let text = fs::read_to_string(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let svg = plot_csv(&text).with_context(|| format!("plotting {}", a.input.display()))?;
    let config = serde_json::json!({ "input": a.input });
    ctx.write_with_provenance(&a.out, svg.as_bytes(), "plot", &config)
}
