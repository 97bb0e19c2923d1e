use criterion::{criterion_group, criterion_main, Criterion};
use parisian_bench::{at_barrier, below_barrier, desk};
use parisian_core::mc_oracle::simulate_price;
use parisian_core::pricer::price_down_in_call_per_node;
use parisian_core::{price_down_in_call, EngineConfig, SimConfig};
use std::hint::black_box;

fn transform(c: &mut Criterion) {
    let cfg = EngineConfig::default();
    let mut g = c.benchmark_group("price_down_in_call");
    for (name, m) in [("above", desk()), ("below", below_barrier()), ("at", at_barrier())] {
        g.bench_function(name, |b| b.iter(|| price_down_in_call(black_box(&m), &cfg).unwrap()));
    }
    g.finish();
}

fn per_node(c: &mut Criterion) {
    let cfg = EngineConfig::default();
    let m = desk();
    let mut g = c.benchmark_group("per_node");
    g.sample_size(10);
    g.bench_function("above", |b| b.iter(|| price_down_in_call_per_node(black_box(&m), &cfg).unwrap()));
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let m = desk();
    let sc = SimConfig {
        n_paths: 20_000,
        dt: 1e-3,
        ..SimConfig::default()
    };
    let mut g = c.benchmark_group("monte_carlo");
    g.sample_size(10);
    g.bench_function("desk_20k_paths", |b| b.iter(|| simulate_price(black_box(&m), &sc).unwrap()));
    g.finish();
}

criterion_group!(benches, transform, per_node, monte_carlo);
criterion_main!(benches);
