use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use d2dsim::sim::{run_sweep, Algorithm, SweepSpec};
use d2dsim::{Execution, SystemConfig};

fn sweep_backends(c: &mut Criterion) {
    let config = SystemConfig::default();
    let spec: SweepSpec = "delta_gamma=50,250,2500".parse().unwrap();
    let mut group = c.benchmark_group("delta_gamma_sweep");
    group.sample_size(10);
    for (name, exec) in [
        ("parallel", Execution::Parallel),
        ("sequential", Execution::Sequential),
    ] {
        group.bench_function(name, |b| {
            b.iter(|| {
                run_sweep(
                    &config,
                    &spec,
                    &[Algorithm::VertexColoring, Algorithm::NoReuse],
                    4,
                    1,
                    exec,
                )
                .map(|r| black_box(r.summary.len()))
                .unwrap()
            })
        });
    }
    group.finish();
}

fn trial_backends(c: &mut Criterion) {
    let config = SystemConfig::default();
    let scenario = d2dsim::sim::Scenario::generate(&config, 7).unwrap();
    let mut group = c.benchmark_group("vertex_coloring_trial");
    group.sample_size(20);
    for (name, exec) in [
        ("parallel", Execution::Parallel),
        ("sequential", Execution::Sequential),
    ] {
        group.bench_function(name, |b| {
            b.iter(|| {
                black_box(
                    d2dsim::sim::vertex_coloring(&scenario, exec)
                        .unwrap()
                        .allocation
                        .sum_rate,
                )
            })
        });
    }
    group.finish();
}

criterion_group!(benches, sweep_backends, trial_backends);
criterion_main!(benches);
