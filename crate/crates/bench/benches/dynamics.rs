use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use sirl_core::abm::{abm_step, abm_step_naive, run_ensemble};
use sirl_core::ode::{ode_step, ode_trajectory};
use sirl_core::{AbmState, Action, AgentRoster, EnvConfig, EpidemicParams, OdeState, RngStream, SirEnv, Variant};

fn ode(c: &mut Criterion) {
    let params = EpidemicParams::default();
    let state = OdeState::initial(&params);
    c.bench_function("ode step (1 day, h = 0.1)", |b| {
        b.iter(|| ode_step(black_box(&state), &params, 1.0))
    });
    c.bench_function("ode trajectory 500 days", |b| {
        b.iter(|| ode_trajectory(black_box(&params), 500))
    });
}

fn abm(c: &mut Criterion) {
    let params = EpidemicParams {
        population: 50,
        initial_infected: 20,
        beta: 0.5,
        ..EpidemicParams::default()
    };
    let state = AbmState::initial(&params);
    let roster = AgentRoster::from_state(&state);
    let mut rng = RngStream::new(0, 0);
    c.bench_function("abm step binomial cohorts (N=50)", |b| {
        b.iter(|| abm_step(black_box(&state), &params, &mut rng).unwrap())
    });
    c.bench_function("abm step per agent (N=50)", |b| {
        b.iter(|| abm_step_naive(black_box(&roster), &params, &mut rng).unwrap())
    });

    let params = EpidemicParams::default();
    let mut group = c.benchmark_group("abm ensemble");
    group.sample_size(10);
    group.bench_function("100 runs x 500 days (N=500)", |b| {
        b.iter(|| run_ensemble(black_box(&params), 500, 100, 42).unwrap())
    });
    group.finish();
}

fn env_episode(c: &mut Criterion) {
    for variant in Variant::ALL {
        let cfg = EnvConfig::new(variant, EpidemicParams::default());
        c.bench_function(&format!("{} episode, always open", variant.name()), |b| {
            b.iter_batched(
                || SirEnv::new(cfg.clone(), RngStream::new(1, 0)).unwrap(),
                |mut env| {
                    env.reset();
                    while !env.step(Action::Open).unwrap().done {}
                },
                BatchSize::SmallInput,
            )
        });
    }
}

criterion_group!(benches, ode, abm, env_episode);
criterion_main!(benches);
