use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use segsched::{
    assign_priorities, build_nominal, generate_taskset, hyperperiod, run_online, sample_behavior,
    simulate, Demand, GenConfig, Mode, Policy, Profile, ReleaseRule, Stop, TaskSet,
};

fn workload(n_tasks: usize, seed: u64) -> TaskSet {
    let cfg = GenConfig {
        total_utilization: 0.6,
        n_tasks,
        period_menu: vec![1, 2, 5, 10, 20, 50, 100],
        ..GenConfig::default()
    };
    generate_taskset(&cfg, seed).expect("generation")
}

fn bench_simulate(c: &mut Criterion) {
    let ts = workload(10, 1);
    let h = hyperperiod(&ts).unwrap();
    let order = assign_priorities(&ts, &Policy::Rm, h).unwrap();
    c.bench_function("simulate/nominal-rm-10-tasks", |b| {
        b.iter(|| {
            simulate(
                black_box(&ts),
                &order,
                Demand::WorstCase,
                &ReleaseRule::Natural,
                h,
                Stop::AtHorizon,
            )
            .unwrap()
        })
    });
}

fn bench_plan(c: &mut Criterion) {
    let ts = workload(10, 2);
    c.bench_function("build_nominal/edf-10-tasks", |b| {
        b.iter(|| build_nominal(black_box(&ts), &Policy::Edf, None).unwrap())
    });
}

fn bench_online(c: &mut Criterion) {
    let ts = workload(10, 3);
    let plan = build_nominal(&ts, &Policy::Rm, None).unwrap();
    let mut group = c.benchmark_group("run_online");
    for mode in Mode::ALL {
        group.bench_function(format!("{mode:?}"), |b| {
            b.iter_batched(
                || sample_behavior(&ts, plan.horizon, Profile::default(), 7),
                |beh| run_online(&plan, &beh, mode).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn bench_generate(c: &mut Criterion) {
    let cfg = GenConfig::default();
    let mut seed = 0;
    c.bench_function("generate_taskset/10-tasks", |b| {
        b.iter(|| {
            seed += 1;
            generate_taskset(black_box(&cfg), seed).unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_simulate,
    bench_plan,
    bench_online,
    bench_generate
);
criterion_main!(benches);
