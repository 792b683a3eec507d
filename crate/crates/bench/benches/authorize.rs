use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use chronicap_bench::joined;
use chronicap_core::fixtures::entity;
use chronicap_core::oracle::enumerate_chronicles;
use chronicap_core::oracle::naive::naive_verdicts;
use chronicap_core::sim::{World, WorldConfig};
use chronicap_core::{Authorizer, PolicyPreset, PresetKind};

fn authorize(c: &mut Criterion) {
    let mut group = c.benchmark_group("authorize");
    for seeds in [1, 4, 16] {
        let g = joined(PresetKind::AllowRevokeLater, seeds);
        let n = g.len();
        group.bench_with_input(BenchmarkId::new("memoized", n), &g, |b, g| {
            b.iter(|| Authorizer::new(black_box(g)).unwrap().values().len())
        });
        if seeds <= 4 {
            group.bench_with_input(BenchmarkId::new("naive", n), &g, |b, g| {
                b.iter(|| naive_verdicts(black_box(g)).unwrap().len())
            });
        }
        group.bench_with_input(BenchmarkId::new("precursive", n), &g, |b, g| {
            b.iter(|| {
                let a = Authorizer::new(black_box(g)).unwrap();
                (0..a.index().len())
                    .filter(|&i| a.precursive_verdict(i).authorized)
                    .count()
            })
        });
    }
    group.finish();
}

fn enumerate(c: &mut Criterion) {
    let mut group = c.benchmark_group("enumerate");
    group.sample_size(10);
    for kind in PresetKind::ALL {
        let p = PolicyPreset::new(kind, vec![entity("A"), entity("B")]).unwrap();
        group.bench_function(kind.to_string(), |b| {
            b.iter(|| enumerate_chronicles(black_box(&p), 3).len())
        });
    }
    group.finish();
}

fn simulate(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    group.sample_size(20);
    for n in [3, 5] {
        let replicas: Vec<_> = (0..n)
            .map(|i| (entity(&format!("R{i}")), i == n - 1))
            .collect();
        let mut cfg = WorldConfig::random(PresetKind::AllowRevokeLater, replicas, 7, 40);
        cfg.drop_rate = 0.1;
        cfg.max_delay = 3;
        group.bench_with_input(BenchmarkId::new("run_to_convergence", n), &cfg, |b, cfg| {
            b.iter(|| {
                let mut w = World::new(cfg.clone()).unwrap();
                w.run_to_convergence().is_none()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, authorize, enumerate, simulate);
criterion_main!(benches);
