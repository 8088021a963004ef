//! Acceptance run: prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use statevar_core::catalog::{self, build_example, deq, enq, Example, QueueValue, EXAMPLE_NAMES};
use statevar_core::net::{check_no_spurious, Behavior, NetworkState, NodeEvent, Message, ScheduleRng};
use statevar_core::product::{cascade_product, shift_event, FeedbackMap};
use statevar_core::protocol::{Policy, Protocol, ProtocolBehavior, Rule};
use statevar_core::sim::{self, shipped, FuzzConfig, FuzzReport, Scenario, Status};
use statevar_core::{
    bidirectional_register, equivalent, is_finite_state, minimize, nerode_classes_bounded, shift_register, Alphabet,
    Event, Machine, StateVariable, Trace, TraceVariable, Value,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn random_trace(rng: &mut ScheduleRng, basis: &[Event], max_len: u64) -> Trace {
    let len = rng.below(max_len + 1);
    (0..len).map(|_| basis[rng.below(basis.len() as u64) as usize].clone()).collect()
}

fn example(name: &str) -> Example {
    let params: BTreeMap<String, String> = match name {
        "mod-counter" | "connected-counters" => [("c", "3")].as_slice(),
        "bounded-queue" => [("c", "2")].as_slice(),
        "shift-register" | "bidir-register" => [("n", "3")].as_slice(),
        _ => [].as_slice(),
    }
    .iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    build_example(name, &params).unwrap()
}

fn fixtures() -> Vec<Example> {
    EXAMPLE_NAMES.iter().map(|n| example(n)).collect()
}

fn ticks(n: usize) -> Trace {
    Trace::repeat(&Event::new("tick"), n)
}

fn criterion_1() -> Outcome {
    let mut rng = ScheduleRng::new(1);
    let mut checked = 0;
    for ex in fixtures() {
        let y = &ex.variable;
        let every_other = TraceVariable::append_when(&catalog::mod_counter(2).unwrap(), |v, _| *v == Value::Int(0));
        let drivers = [TraceVariable::recorder(Alphabet::universal()), every_other];
        ensure!(y.initial_value().unwrap() == y.eval(&Trace::new()).unwrap(), "{}: initial law", ex.name);
        for _ in 0..1000 {
            let w = random_trace(&mut rng, &ex.basis, 24);
            let e = &ex.basis[rng.below(ex.basis.len() as u64) as usize];
            ensure!(
                y.after(e).unwrap().eval(&w).unwrap() == y.eval(&w.append(e.clone())).unwrap(),
                "{}: shift law on {w} . {e}",
                ex.name
            );
            for u in &drivers {
                ensure!(
                    StateVariable::substitute(u, y).eval(&w).unwrap() == y.eval(&u.eval(&w).unwrap()).unwrap(),
                    "{}: substitution law on {w}",
                    ex.name
                );
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} (variable, trace) pairs over {} fixtures", EXAMPLE_NAMES.len()))
}

fn criterion_2() -> Outcome {
    for c in [1i64, 2, 3, 5] {
        let counter = catalog::mod_counter(c).unwrap();
        let cc = catalog::connected_counters(c).unwrap();
        let cascade = catalog::cascade_digits(c, &catalog::connected_counters_cascade(c).unwrap());
        let w = ticks((3 * c * c) as usize);
        let by_fold = [counter.prefix_values(&w).unwrap(), cc.d.prefix_values(&w).unwrap(), cascade.prefix_values(&w).unwrap()];
        for n in 0..=(3 * c * c) {
            let prefix = ticks(n as usize);
            let i = n as usize;
            ensure!(counter.eval(&prefix).unwrap() == Value::Int(n % c), "mod_counter({c}) at n={n}");
            ensure!(cc.d.eval(&prefix).unwrap() == Value::Int(n % (c * c)), "connected_counters({c}) at n={n}");
            ensure!(by_fold[0][i] == Value::Int(n % c), "mod_counter({c}) prefix fold at n={n}");
            ensure!(by_fold[1][i] == Value::Int(n % (c * c)), "connected_counters({c}) prefix fold at n={n}");
            ensure!(by_fold[2][i] == Value::Int(n % (c * c)), "cascade({c}) at n={n}");
        }
    }
    Ok("c in {1,2,3,5}, n <= 3c^2, three routes each".into())
}

fn criterion_3() -> Outcome {
    let mut rng = ScheduleRng::new(3);
    let domain = [Value::sym("a"), Value::sym("b")];
    let q = catalog::queue_variable(Some(domain.iter().cloned().collect())).unwrap();
    let cap = 3;
    let bq = catalog::bounded_queue(cap, Some(domain.iter().cloned().collect())).unwrap().view();
    let ops = [enq(Value::sym("a")), enq(Value::sym("b")), deq(), deq(), enq(Value::sym("z")), Event::new("noop")];
    for _ in 0..1000 {
        let w = random_trace(&mut rng, &ops, 40);
        let qs = q.prefix_values(&w).unwrap();
        let views = bq.prefix_values(&w).unwrap();
        let mut oracle: Vec<Value> = Vec::new();
        let mut hw = 0i64;
        let mut last_hw = 0i64;
        for i in 0..=w.len() {
            if i > 0 {
                let e = &w.events()[i - 1];
                if e.is("enq") && domain.contains(e.payload.as_ref().unwrap()) {
                    oracle.insert(0, e.payload.clone().unwrap());
                } else if e.is("deq") && !oracle.is_empty() {
                    oracle.remove(0);
                }
                hw = hw.max(oracle.len() as i64);
            }
            let got = QueueValue::from_value(&qs[i]).unwrap();
            ensure!(got.to_vec() == oracle, "queue after {}", w.prefix(i));
            ensure!(got.has_no_gaps(), "queue support has a gap after {}", w.prefix(i));
            let view = views[i].as_tuple().unwrap();
            let view_hw = view[1].as_int().unwrap();
            ensure!(view_hw == hw, "high water after {}", w.prefix(i));
            ensure!(view_hw >= last_hw, "high water decreased after {}", w.prefix(i));
            last_hw = view_hw;
            let defined = !oracle.is_empty() && hw < cap;
            ensure!(view[2] == Value::Bool(defined), "defined after {}", w.prefix(i));
            if defined {
                ensure!(view[0] == oracle[0], "front after {}", w.prefix(i));
            } else {
                ensure!(view[0].is_unspecified(), "front should be unspecified after {}", w.prefix(i));
            }
        }
    }
    Ok("1000 sequences of up to 40 operations".into())
}

fn criterion_4() -> Outcome {
    let mut rng = ScheduleRng::new(4);
    let mut fixtures: Vec<(String, StateVariable, Vec<Event>)> =
        fixtures().into_iter().map(|ex| (ex.name, ex.variable, ex.basis)).collect();
    let c = 3;
    fixtures.push((
        "connected-counters-cascade".into(),
        catalog::cascade_digits(c, &catalog::connected_counters_cascade(c).unwrap()),
        vec![Event::new("tick")],
    ));
    for (name, y, basis) in &fixtures {
        let m = y.to_machine().unwrap();
        for _ in 0..1000 {
            let w = random_trace(&mut rng, basis, 40);
            ensure!(m.run(&w).unwrap() == y.eval(&w).unwrap(), "{name} on {w}");
        }
    }
    Ok(format!("{} fixtures x 1000 traces", fixtures.len()))
}

fn finite_fixtures() -> Vec<Example> {
    ["mod-counter", "connected-counters", "shift-register", "bidir-register", "constant"].iter().map(|n| example(n)).collect()
}

fn criterion_5() -> Outcome {
    let tick = [Event::new("tick")];
    let mod3 = catalog::mod_counter(3).unwrap().to_machine().unwrap();
    let states = minimize(&mod3, &tick, 1000).unwrap().state_count();
    ensure!(states == 3, "mod_counter(3) minimized to {states} states");
    for ex in finite_fixtures() {
        let m = ex.variable.to_machine().unwrap();
        let min = minimize(&m, &ex.basis, 10_000).unwrap();
        ensure!(equivalent(&m, &min.machine, &ex.basis, 10_000).unwrap().is_equivalent(), "{} round trip", ex.name);
    }
    let mod4 = catalog::mod_counter(4).unwrap().to_machine().unwrap();
    let verdict = equivalent(&mod3, &mod4, &tick, 1000).unwrap();
    let len = verdict.witness().map(Trace::len);
    ensure!(len == Some(3), "mod3 vs mod4 witness length {len:?}");
    Ok("mod3 has 3 states; 5 round trips; witness length 3".into())
}

fn criterion_6() -> Outcome {
    let tick = vec![Event::new("tick")];
    let bits = |f: fn(i64, Value) -> Event| -> Vec<Event> {
        [0, 1].into_iter().flat_map(|v| [f(1, Value::Int(v)), f(-1, Value::Int(v))]).collect()
    };
    let ins: Vec<Event> = [0, 1].into_iter().map(|v| Event::with("in", v as i64)).collect();
    let cases = [
        ("connected-counters-cascade", catalog::connected_counters_cascade(3).unwrap(), tick.clone()),
        ("shift-register(3)", shift_register(3).unwrap(), ins),
        ("bidir-register(3)", bidirectional_register(3).unwrap(), bits(shift_event)),
    ];
    for (name, p, basis) in &cases {
        let r = is_finite_state(p, basis, 10_000).unwrap();
        ensure!(r.complete && r.minimized_states.is_some(), "{name}: closure incomplete");
    }
    let unbounded = catalog::unbounded_counter();
    let p = cascade_product(
        Alphabet::universal(),
        vec![unbounded.clone(), unbounded],
        vec![FeedbackMap::pass_through(), FeedbackMap::pass_through()],
    )
    .unwrap();
    let r = is_finite_state(&p, &tick, 1000).unwrap();
    ensure!(!r.complete, "unbounded product reported complete");
    Ok(format!("{} finite products complete; unbounded incomplete at 1000", cases.len()))
}

fn all_words(basis: &[Event], max_len: usize) -> Vec<Trace> {
    let mut out = vec![Trace::new()];
    let mut frontier = vec![Trace::new()];
    for _ in 0..max_len {
        frontier = frontier.iter().flat_map(|w| basis.iter().map(move |e| w.append(e.clone()))).collect();
        out.extend(frontier.iter().cloned());
    }
    out
}

fn criterion_7() -> Outcome {
    let values = [Value::Int(0), Value::Int(1)];
    let mut checked = 0;
    for n in 1..=4usize {
        let reg = shift_register(n).unwrap();
        let m = reg.to_machine().unwrap();
        let basis: Vec<Event> = values.iter().map(|v| Event::with("in", v.clone())).collect();
        for w in all_words(&basis, 6) {
            let mut cells = vec![Value::NullV; n];
            for e in w.iter() {
                cells.insert(0, e.payload.clone().unwrap());
                cells.truncate(n);
            }
            let expected = Value::Tuple(cells);
            ensure!(reg.eval(&w).unwrap() == expected, "shift_register({n}) on {w}");
            ensure!(m.run(&w).unwrap() == expected, "shift_register({n}) machine on {w}");
            checked += 1;
        }

        let reg = bidirectional_register(n).unwrap();
        let m = reg.to_machine().unwrap();
        let basis: Vec<Event> =
            values.iter().flat_map(|v| [shift_event(1, v.clone()), shift_event(-1, v.clone())]).collect();
        for w in all_words(&basis, 6) {
            let mut cells = vec![Value::NullV; n];
            for e in w.iter() {
                let t = e.payload.as_ref().unwrap().as_tuple().unwrap();
                let (r, v) = (t[0].as_int().unwrap(), t[1].clone());
                if r == 1 {
                    cells.insert(0, v);
                    cells.pop();
                } else {
                    cells.remove(0);
                    cells.push(v);
                }
            }
            let expected = Value::Tuple(cells);
            ensure!(reg.eval(&w).unwrap() == expected, "bidirectional_register({n}) on {w}");
            ensure!(m.run(&w).unwrap() == expected, "bidirectional_register({n}) machine on {w}");
            checked += 1;
        }
    }
    Ok(format!("{checked} exhaustive traces, n <= 4, length <= 6"))
}

const SEEDS: std::ops::Range<u64> = 0..10;
const STEPS: u64 = 10_000;

struct Sweeps {
    none: FuzzReport,
    simple: FuzzReport,
    cyclic: Vec<(usize, FuzzReport)>,
}

fn sweeps() -> &'static Sweeps {
    static CELL: std::sync::OnceLock<Sweeps> = std::sync::OnceLock::new();
    CELL.get_or_init(|| {
        let run = |protocol, nodes| sim::fuzz(&FuzzConfig::new(protocol, nodes, STEPS, SEEDS)).unwrap();
        Sweeps {
            none: run(Protocol::None, 4),
            simple: run(Protocol::SimpleAck, 4),
            cyclic: [2, 3, 5].into_iter().map(|k| (k, run(Protocol::CyclicAck, k + 1))).collect(),
        }
    })
}

fn clean(label: &str, report: &FuzzReport) -> Result<(), String> {
    ensure!(report.runs.len() == SEEDS.count(), "{label}: {} runs", report.runs.len());
    ensure!(report.runs.iter().all(|r| r.steps_run == STEPS), "{label}: a run stopped early");
    ensure!(report.is_clean(), "{label}: violations {:?}", report.violations);
    Ok(())
}

fn criterion_8() -> Outcome {
    let s = sweeps();
    clean("none", &s.none)?;
    clean("simple-ack", &s.simple)?;
    for (k, r) in &s.cyclic {
        clean(&format!("cyclic-ack k={k}"), r)?;
    }
    let plain: Arc<dyn Behavior> = Arc::new(ProtocolBehavior::new(Rule::Plain, Policy::Eager));
    let mut st = NetworkState::new(vec![("A".into(), plain.clone()), ("B".into(), plain)]).unwrap();
    st.force_append("B", NodeEvent::Rx(Message::Data(9))).unwrap();
    ensure!(!check_no_spurious(&st).is_ok(), "injected receive not detected");
    Ok(format!("5 protocol configurations x {} seeds x {STEPS} steps; injected receive detected", SEEDS.count()))
}

fn criterion_9() -> Outcome {
    let s = sweeps();
    clean("simple-ack", &s.simple)?;
    ensure!(s.simple.commits > 0, "no simple commits happened");
    let r = sim::run_scenario(&Scenario::from_json(shipped::ACK_WITHOUT_DATA).unwrap(), None).unwrap();
    ensure!(r.status == Status::Violation && r.violations.contains_key("ack-lemma"), "ack-without-data not detected");
    ensure!(r.steps_run <= STEPS, "detected after {} steps", r.steps_run);
    Ok(format!("{} commits checked; ack-without-data caught at step {}", s.simple.commits, r.steps_run))
}

fn criterion_10() -> Outcome {
    let s = sweeps();
    let mut commits = 0;
    for (k, r) in &s.cyclic {
        clean(&format!("cyclic-ack k={k}"), r)?;
        ensure!(r.commits > 0, "k={k}: no cyclic commits happened");
        commits += r.commits;
    }
    let r = sim::run_scenario(&Scenario::from_json(shipped::OUT_OF_TURN).unwrap(), None).unwrap();
    ensure!(r.violations.contains_key("cyclic-commit"), "out-of-turn ack not caught by cyclic soundness");
    ensure!(r.violations.contains_key("turn-discipline"), "out-of-turn ack not caught by turn discipline");
    for k in [2, 3, 5] {
        let sc = FuzzConfig::new(Protocol::CyclicAck, k + 1, 2000, 0..1).scenario(k as u64);
        let mut log = Vec::new();
        sim::run_scenario(&sc, Some(&mut log)).unwrap();
        let records = sim::parse_log(std::str::from_utf8(&log).unwrap()).unwrap();
        ensure!(sim::log_turn_discipline(&records, &sc.prepare().unwrap().group).is_ok(), "k={k}: log turn check");
    }
    Ok(format!("k in {{2,3,5}}, {commits} commits checked; out-of-turn ack caught"))
}

fn criterion_11() -> Outcome {
    for (name, text) in [("cyclic-5", shipped::CYCLIC_5), ("simple-4", shipped::SIMPLE_4), ("broadcast-3", shipped::BROADCAST_3)] {
        let mut sc = Scenario::from_json(text).unwrap();
        sc.steps = Some(2000);
        let mut a = Vec::new();
        let mut b = Vec::new();
        let summary = sim::run_scenario(&sc, Some(&mut a)).unwrap();
        sim::run_scenario(&sc, Some(&mut b)).unwrap();
        ensure!(a == b, "{name}: logs differ");
        let replayed = sim::replay(std::str::from_utf8(&a).unwrap()).map_err(|e| format!("{name}: {e}"))?;
        ensure!(replayed == summary, "{name}: replay summary differs");
    }
    Ok("3 scenarios x 2000 steps byte-identical and replayed".into())
}

fn random_machine(rng: &mut ScheduleRng) -> Machine {
    let delta: Vec<[i64; 2]> = (0..5).map(|_| [rng.below(5) as i64, rng.below(5) as i64]).collect();
    let lambda: Vec<i64> = (0..5).map(|_| rng.below(2) as i64).collect();
    Machine::from_rules(
        Alphabet::universal(),
        Value::Int(0),
        move |s, e| Value::Int(delta[s.as_int().unwrap() as usize][usize::from(e.is("b"))]),
        move |s| Value::Int(lambda[s.as_int().unwrap() as usize]),
    )
}

fn criterion_12() -> Outcome {
    let mut rng = ScheduleRng::new(12);
    let basis = [Event::new("a"), Event::new("b")];
    for i in 0..20 {
        let m = random_machine(&mut rng);
        let f = |w: &Trace| m.run(w).unwrap();
        let depths: Vec<_> = (0..=6).map(|d| nerode_classes_bounded(f, &basis, 4, d)).collect();
        for d in 1..depths.len() {
            ensure!(depths[d].refines(&depths[d - 1]), "machine {i}: classes merged going to depth {d}");
        }
        let exact = minimize(&m, &basis, 100).unwrap().partition;
        let words = all_words(&basis, 4);
        for u in &words {
            for v in &words {
                let by_machine = exact.same_class(&m.state_after(u).unwrap(), &m.state_after(v).unwrap());
                ensure!(depths[6].same_class(u, v) == by_machine, "machine {i}: {u} vs {v}");
            }
        }
    }
    Ok("20 random 5-state machines, depths 0..6, words <= 4".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("operator laws", criterion_1),
        ("counter closed forms", criterion_2),
        ("queue oracles", criterion_3),
        ("lowering soundness", criterion_4),
        ("minimization", criterion_5),
        ("finite-state closure", criterion_6),
        ("registers", criterion_7),
        ("no spurious messages", criterion_8),
        ("ack lemma and simple commit", criterion_9),
        ("cyclic commit", criterion_10),
        ("determinism and replay", criterion_11),
        ("bounded Nerode monotonicity", criterion_12),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2}: PASS  {name} ({detail}) [{secs:.1}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2}: FAIL  {name}: {why} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
