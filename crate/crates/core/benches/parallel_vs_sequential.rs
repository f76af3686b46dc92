use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use seedscope::alpha::{estimate_alpha, AlphaConfig};
use seedscope::exec::Execution;
use seedscope::synth::{ensemble_sweep, generate_pool, with_execution, SweepConfig, SynthSpec};

fn bench_alpha(c: &mut Criterion) {
    let pool = generate_pool(&SynthSpec {
        n_models: 21,
        n_test: 2000,
        ..SynthSpec::default()
    })
    .unwrap();
    let refs: Vec<String> = pool.ids()[..20].iter().map(|s| s.to_string()).collect();
    let candidate = pool.ids()[20].to_string();
    let mut group = c.benchmark_group("estimate_alpha");
    for execution in [Execution::Sequential, Execution::Parallel] {
        let cfg = AlphaConfig {
            n_bootstrap: 32,
            execution,
            ..AlphaConfig::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{execution:?}")), &cfg, |b, cfg| {
            b.iter(|| estimate_alpha(&pool, &refs, &candidate, cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_sweep(c: &mut Criterion) {
    let pool = generate_pool(&SynthSpec {
        n_models: 40,
        n_test: 1000,
        ..SynthSpec::default()
    })
    .unwrap();
    let base = SweepConfig {
        sizes: vec![3, 10],
        repetitions: 10,
        alpha: AlphaConfig {
            n_bootstrap: 10,
            ..AlphaConfig::default()
        },
        ..SweepConfig::default()
    };
    let mut group = c.benchmark_group("ensemble_sweep");
    group.sample_size(10);
    for execution in [Execution::Sequential, Execution::Parallel] {
        let cfg = with_execution(&base, execution);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{execution:?}")), &cfg, |b, cfg| {
            b.iter(|| ensemble_sweep(&pool, cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_alpha, bench_sweep);
criterion_main!(benches);
