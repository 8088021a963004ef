use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use statevar_bench::*;
use statevar_core::catalog;
use statevar_core::{minimize, shift_register, Event};
use std::hint::black_box;

fn eval_vs_machine(c: &mut Criterion) {
    let mut g = c.benchmark_group("counter");
    let cc = connected_counters_fixture(3);
    let m = cc.d.to_machine().unwrap();
    for n in [100usize, 1000] {
        let w = ticks(n);
        g.bench_with_input(BenchmarkId::new("eval", n), &w, |b, w| b.iter(|| cc.d.eval(black_box(w)).unwrap()));
        g.bench_with_input(BenchmarkId::new("machine", n), &w, |b, w| b.iter(|| m.run(black_box(w)).unwrap()));
    }
    g.finish();

    let q = catalog::queue_variable(None).unwrap();
    let qm = q.to_machine().unwrap();
    let w = queue_traffic(500, 1);
    c.bench_function("queue/eval/500", |b| b.iter(|| q.eval(black_box(&w)).unwrap()));
    c.bench_function("queue/machine/500", |b| b.iter(|| qm.run(black_box(&w)).unwrap()));
}

fn minimization(c: &mut Criterion) {
    let tick = [Event::new("tick")];
    let mod7 = catalog::mod_counter(7).unwrap().to_machine().unwrap();
    c.bench_function("minimize/mod-counter-7", |b| b.iter(|| minimize(&mod7, &tick, 10_000).unwrap()));

    let reg = shift_register(3).unwrap();
    let m = reg.to_machine().unwrap();
    let ex = catalog::build_example("shift-register", &[("n".to_string(), "3".to_string())].into_iter().collect()).unwrap();
    c.bench_function("minimize/shift-register-3", |b| b.iter(|| minimize(&m, &ex.basis, 10_000).unwrap()));
}

criterion_group!(benches, eval_vs_machine, minimization);
criterion_main!(benches);
