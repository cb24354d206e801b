use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use gigopt::experiments::instances::three_type_market;
use gigopt::fluid::{solve_fluid_with, DEFAULT_TOL};
use gigopt::par::Execution;
use gigopt::sim::{simulate, SimConfig};
use gigopt::{Policy, RewardDistribution};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bench_simulate(c: &mut Criterion) {
    let inst = three_type_market().unwrap();
    let policy = Policy::Static(RewardDistribution::two_point(15.0, 45.0, 0.6).unwrap());
    let mut group = c.benchmark_group("simulate");
    for (name, execution) in MODES {
        let cfg = SimConfig {
            theta: 16.0,
            periods: 500,
            replications: 32,
            seed: 1,
            execution,
            ..SimConfig::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| simulate(&inst, &policy, cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_solve_fluid(c: &mut Criterion) {
    let inst = three_type_market().unwrap();
    let mut group = c.benchmark_group("solve_fluid");
    for (name, execution) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| solve_fluid_with(&inst, DEFAULT_TOL, execution).unwrap())
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_simulate, bench_solve_fluid
}
criterion_main!(benches);
