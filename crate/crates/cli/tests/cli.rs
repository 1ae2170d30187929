use std::path::Path;
use std::process::{Command, Output};

use clap::CommandFactory;
use sirl_cli::Cli;
use sirl_core::experiments::{parse_trajectory_csv, EvalReport, SweepReport};
use sirl_core::{PolicyCheckpoint, Variant};

fn sirl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sirl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_documents_every_flag() {
    let mut cmd = Cli::command();
    cmd.build();
    for sub in cmd.get_subcommands().filter(|s| s.get_name() != "help") {
        let out = sirl(&[sub.get_name(), "--help"]);
        assert_eq!(out.status.code(), Some(0));
        let help = String::from_utf8(out.stdout).unwrap();
        for arg in sub.get_arguments() {
            if let Some(long) = arg.get_long() {
                assert!(
                    help.contains(&format!("--{long}")),
                    "`{} --help` omits --{long}",
                    sub.get_name()
                );
                if long != "help" && long != "version" {
                    assert!(
                        arg.get_help().is_some(),
                        "--{long} on {} has no help text",
                        sub.get_name()
                    );
                }
            }
        }
    }
}

#[test]
fn usage_errors_exit_two_and_name_the_flag() {
    let out = sirl(&["simulate", "--beta", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--beta"), "{}", stderr(&out));

    let out = sirl(&["simulate", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));

    let out = sirl(&["train", "--gamma", "0", "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--gamma"));

    let out = sirl(&["simulate", "--n", "5", "--i0", "9"]);
    assert_eq!(out.status.code(), Some(2));

    let out = sirl(&[
        "sweep",
        "--policy",
        "x",
        "--out",
        "y",
        "--beta-lo",
        "0.9",
        "--beta-hi",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--beta-lo"));

    assert_eq!(sirl(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let policy = dir.path().join("missing.json");
    let out = sirl(&["eval", "--policy", p(&policy), "--out", p(&dir.path().join("e.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert!(msg.starts_with("error: "), "{msg}");
    assert!(msg.contains("missing.json"));
    assert_eq!(msg.trim_end().lines().count(), 1);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"version": 1}"#).unwrap();
    let out = sirl(&["eval", "--policy", p(&bad), "--out", p(&dir.path().join("e.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("e.csv").exists());
}

#[test]
fn simulate_writes_trajectories_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = sirl(&[
            "simulate",
            "--model",
            "abm",
            "--beta",
            "0.2",
            "--gamma",
            "0.1",
            "--n",
            "500",
            "--i0",
            "5",
            "--days",
            "500",
            "--runs",
            "100",
            "--seed",
            "42",
            "--out",
            p(out),
            "--quiet",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let rows = parse_trajectory_csv(&text).unwrap();
    assert_eq!(rows.len(), 100 * 501);
    assert!(rows.iter().all(|r| r.s + r.i + r.r == 500.0));
    assert!(dir.path().join("a.csv.provenance.json").exists());

    let o = sirl(&["simulate", "--model", "ode", "--days", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = parse_trajectory_csv(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert!(rows.iter().all(|r| r.run_id == -1));
    assert_eq!(rows.len(), 11);
}

#[test]
fn compare_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let o = sirl(&[
        "compare",
        "--days",
        "200",
        "--runs",
        "10",
        "--out-dir",
        p(dir.path()),
        "--quiet",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["trajectories.csv", "ensemble.csv", "summary.json", "dynamics.svg"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let svg = dir.path().join("ensemble.svg");
    let o = sirl(&["plot", "--input", p(&dir.path().join("ensemble.csv")), "--out", p(&svg)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    let junk = dir.path().join("junk.csv");
    std::fs::write(&junk, "a,b\n1,2\n").unwrap();
    let o = sirl(&["plot", "--input", p(&junk), "--out", p(&svg)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"env": {"variant": "randomized_ode", "params": {"beta": 0.5}, "horizon": 20},
            "ppo": {"rollout_steps": 64, "minibatch": 32, "epochs_per_update": 1, "total_timesteps": 128}}"#,
    )
    .unwrap();
    let policy = dir.path().join("policy.json");
    let o = sirl(&[
        "--config",
        p(&cfg),
        "train",
        "--beta",
        "0.3",
        "--out",
        p(&policy),
        "--quiet",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ckpt = PolicyCheckpoint::load(&policy).unwrap();
    assert_eq!(ckpt.env_config.params.beta, 0.3);
    assert_eq!(ckpt.env_config.variant, Variant::RandomizedOde);
    assert_eq!(ckpt.env_config.horizon, 20);
    assert_eq!(ckpt.ppo_config.rollout_steps, 64);
    assert_eq!(ckpt.seed, 42);

    std::fs::write(&cfg, r#"{"envv": {}}"#).unwrap();
    let o = sirl(&["--config", p(&cfg), "simulate", "--days", "3"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn train_then_eval_and_sweep_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let policy = dir.path().join("policy.json");
    let eval = dir.path().join("eval.csv");
    let sweep = dir.path().join("sweep.csv");

    let o = sirl(&[
        "train",
        "--env",
        "abm",
        "--beta",
        "0.8",
        "--timesteps",
        "200000",
        "--seed",
        "7",
        "--out",
        p(&policy),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("update"));
    let ckpt = PolicyCheckpoint::load(&policy).unwrap();
    assert_eq!(ckpt.timesteps_trained, 200_704);

    let o = sirl(&[
        "eval",
        "--policy",
        p(&policy),
        "--env",
        "abm",
        "--beta",
        "0.8",
        "--episodes",
        "200",
        "--seed",
        "9",
        "--out",
        p(&eval),
        "--quiet",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let records = EvalReport::parse_csv(&std::fs::read_to_string(&eval).unwrap()).unwrap();
    assert_eq!(records.len(), 200);
    assert!(records.iter().all(|r| r.beta == 0.8));

    let o = sirl(&[
        "sweep",
        "--policy",
        p(&policy),
        "--samples",
        "4",
        "--episodes",
        "5",
        "--out",
        p(&sweep),
        "--quiet",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = SweepReport::from_csv(&std::fs::read_to_string(&sweep).unwrap()).unwrap();
    assert!(report.samples.iter().all(|s| (0.2..=0.8).contains(&s.beta)));
}
