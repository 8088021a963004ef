use criterion::{criterion_group, criterion_main, Criterion};
use statevar_bench::*;
use statevar_core::protocol::Protocol;
use statevar_core::sim::{fuzz, run_scenario, FuzzConfig};
use std::hint::black_box;

fn runs(c: &mut Criterion) {
    let mut g = c.benchmark_group("run");
    g.sample_size(10);
    for (name, text) in shipped_scenarios() {
        let sc = scenario(text, 1000);
        g.bench_function(name, |b| b.iter(|| run_scenario(black_box(&sc), None).unwrap()));
    }
    g.finish();
}

fn logged(c: &mut Criterion) {
    let sc = scenario(statevar_core::sim::shipped::SIMPLE_4, 500);
    c.bench_function("run/simple-4/logged", |b| {
        b.iter(|| {
            let mut out = Vec::new();
            run_scenario(&sc, Some(&mut out)).unwrap();
            out.len()
        })
    });
}

fn fuzzing(c: &mut Criterion) {
    let mut g = c.benchmark_group("fuzz");
    g.sample_size(10);
    let cfg = FuzzConfig::new(Protocol::CyclicAck, 4, 500, 0..8);
    g.bench_function("cyclic-4x8", |b| b.iter(|| fuzz(black_box(&cfg)).unwrap()));
    g.finish();
}

criterion_group!(benches, runs, logged, fuzzing);
criterion_main!(benches);
