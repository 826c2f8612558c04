//! Sequential versus rayon execution of an IPM size sweep.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cqg::bench::{run_sweep, BenchOptions};
use cqg::gamegen::{sweep_instances, GameKind};
use cqg::par::Execution;

fn sweep(c: &mut Criterion) {
    let players: Vec<usize> = (2..=12).step_by(2).collect();
    let instances = sweep_instances(GameKind::Market, &players, 10, &[0.01], 7).unwrap();
    let mut group = c.benchmark_group("market_sweep_ipm");
    group.sample_size(10);
    for execution in [Execution::Sequential, Execution::Parallel] {
        let opts = BenchOptions {
            run_fbs: false,
            execution,
            ..BenchOptions::default()
        };
        let label = format!("{execution:?}").to_lowercase();
        group.bench_with_input(BenchmarkId::from_parameter(label), &opts, |b, opts| {
            b.iter(|| run_sweep(&instances, opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
