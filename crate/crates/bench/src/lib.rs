//! Shared workloads for the benchmarks.

use statevar_core::catalog::{self, enq, deq};
use statevar_core::net::ScheduleRng;
use statevar_core::sim::{shipped, Scenario};
use statevar_core::{Event, Trace, Value};

pub fn ticks(n: usize) -> Trace {
    Trace::repeat(&Event::new("tick"), n)
}

/// Random enq/deq traffic over a two-symbol domain.
pub fn queue_traffic(n: usize, seed: u64) -> Trace {
    let mut rng = ScheduleRng::new(seed);
    (0..n)
        .map(|_| match rng.below(3) {
            0 => enq(Value::sym("a")),
            1 => enq(Value::sym("b")),
            _ => deq(),
        })
        .collect()
}

pub fn connected_counters_fixture(c: i64) -> catalog::ConnectedCounters {
    catalog::connected_counters(c).expect("valid modulus")
}

pub fn scenario(text: &str, steps: u64) -> Scenario {
    let mut sc = Scenario::from_json(text).expect("shipped scenario parses");
    sc.steps = Some(steps);
    sc
}

pub fn shipped_scenarios() -> [(&'static str, &'static str); 3] {
    [("cyclic-5", shipped::CYCLIC_5), ("simple-4", shipped::SIMPLE_4), ("broadcast-3", shipped::BROADCAST_3)]
}
