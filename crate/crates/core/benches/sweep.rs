//! Sequential against rayon execution for weight builds and a small sweep.

use std::hint::black_box;

use assoc_core::harness::{sweep, ExperimentConfig};
use assoc_core::rules::build;
use assoc_core::{gen_patterns, CounterStore, Exec, Family, Mode, NoiseEstimate, Rule, Seed};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const EXECS: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn weight_build(c: &mut Criterion) {
    let mut group = c.benchmark_group("build");
    group.sample_size(10);
    let pats = gen_patterns(1024, 32, 1400, Family::Palm, Seed::new(1)).unwrap();
    let store = CounterStore::store(&pats, Mode::Auto, None).unwrap();
    let est = NoiseEstimate::from_lambda_kappa(0.9, 0.1, 1024, 32.0).unwrap();
    for rule in [Rule::Bayes, Rule::Bcpnn] {
        for (name, exec) in EXECS {
            group.bench_with_input(BenchmarkId::new(rule.to_string(), name), &exec, |b, &exec| {
                b.iter(|| build(rule, black_box(&store), est, exec))
            });
        }
    }
    group.finish();
}

fn small_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    let cfg = ExperimentConfig::from_toml(
        "family = \"palm\"\nrules = [\"B\", \"BCPNN\"]\nn = 512\nk = 16\nm_grid = [200, 400]\n\
         lambda = 0.9\nkappa = 0.1\nn_networks = 4\nn_queries = 20\nt_max = 10\n",
        &[],
    )
    .unwrap();
    for (name, exec) in EXECS {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| sweep(black_box(&cfg), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, weight_build, small_sweep);
criterion_main!(benches);
