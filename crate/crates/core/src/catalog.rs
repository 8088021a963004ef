//! The worked examples: counters, connected counters, the map-valued queue,
//! and the bounded queue with its high-water mark. They double as fixtures
//! for the rest of the crate and are constructible by name.

use std::collections::{BTreeMap, BTreeSet};

use crate::alphabet::Alphabet;
use crate::error::{Error, Fault, Result};
use crate::product::{self, cascade_product, shift_event, FeedbackMap, ProductVariable};
use crate::value::{Event, Value};
use crate::variable::{StateVariable, TraceVariable};

fn positive(c: i64, what: &str) -> Result<()> {
    if c < 1 {
        return Err(Error::InvalidParameter(format!("{what} must be at least 1, got {c}")));
    }
    Ok(())
}

fn int_of(v: &Value) -> Result<i64, Fault> {
    v.as_int().ok_or_else(|| Fault::type_error("integer", v))
}

/// Counts events modulo `c`.
pub fn mod_counter(c: i64) -> Result<StateVariable> {
    positive(c, "modulus")?;
    Ok(StateVariable::define_fallible(Alphabet::universal(), Value::Int(0), move |v, _| {
        Ok(Value::Int((int_of(v)? + 1) % c))
    }))
}

pub fn unbounded_counter() -> StateVariable {
    StateVariable::define_fallible(Alphabet::universal(), Value::Int(0), |v, _| Ok(Value::Int(int_of(v)? + 1)))
}

/// Two mod-`c` counters wired as the two digits of a base-`c` number.
#[derive(Clone, Debug)]
pub struct ConnectedCounters {
    /// `D = C + c * SUB{u} C`
    pub d: StateVariable,
    /// The low digit `C`.
    pub low: StateVariable,
    /// The high digit `SUB{u} C`.
    pub high: StateVariable,
    /// `u`: appends the event exactly when `C = c - 1`.
    pub driver: TraceVariable,
}

pub fn connected_counters(c: i64) -> Result<ConnectedCounters> {
    let low = mod_counter(c)?;
    let driver = TraceVariable::append_when(&low, move |v, _| v.as_int() == Some(c - 1));
    let high = StateVariable::substitute(&driver, &low);
    let d = StateVariable::combine(
        move |vs| Ok(Value::Int(int_of(&vs[0])? + c * int_of(&vs[1])?)),
        vec![low.clone(), high.clone()],
    );
    Ok(ConnectedCounters { d, low, high, driver })
}

/// The same two digits as a loop-free product: component 0 is the high
/// digit and reads only component 1, the low digit, which counts every event.
pub fn connected_counters_cascade(c: i64) -> Result<ProductVariable> {
    let counter = mod_counter(c)?;
    cascade_product(
        Alphabet::universal(),
        vec![counter.clone(), counter],
        vec![
            FeedbackMap::total(move |e, outs| (outs[1].as_int() == Some(c - 1)).then(|| e.clone()).into()),
            FeedbackMap::pass_through(),
        ],
    )
}

/// `D` computed from the cascade's output tuple.
pub fn cascade_digits(c: i64, p: &ProductVariable) -> StateVariable {
    StateVariable::combine(
        move |vs| {
            let high = vs[0].component(0).ok_or_else(|| Fault::type_error("pair", &vs[0]))?;
            let low = vs[0].component(1).ok_or_else(|| Fault::type_error("pair", &vs[0]))?;
            Ok(Value::Int(int_of(low)? + c * int_of(high)?))
        },
        vec![p.variable().clone()],
    )
}

pub fn enq(v: impl Into<Value>) -> Event {
    Event::with("enq", v)
}

pub fn deq() -> Event {
    Event::new("deq")
}

/// A queue state: a finitely supported map from positions `1, 2, ..` to
/// values, absent positions holding `nullv`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QueueValue(BTreeMap<i64, Value>);

impl QueueValue {
    pub fn from_value(v: &Value) -> Option<QueueValue> {
        let m = v.as_map()?;
        let mut out = BTreeMap::new();
        for (k, x) in m {
            let i = k.as_int().filter(|i| *i >= 1)?;
            if *x != Value::NullV {
                out.insert(i, x.clone());
            }
        }
        Some(QueueValue(out))
    }

    pub fn to_value(&self) -> Value {
        Value::Map(self.0.iter().map(|(i, x)| (Value::Int(*i), x.clone())).collect())
    }

    /// `Q(i)`
    pub fn get(&self, i: i64) -> Value {
        self.0.get(&i).cloned().unwrap_or(Value::NullV)
    }

    /// `max{i : Q(i) != nullv}`, 0 when empty.
    pub fn support(&self) -> i64 {
        self.0.keys().next_back().copied().unwrap_or(0)
    }

    /// `Q(i) = nullv and j > i  ->  Q(j) = nullv`
    pub fn has_no_gaps(&self) -> bool {
        self.0.keys().copied().eq(1..=self.0.len() as i64)
    }

    /// `Q(1), Q(2), ..` up to the support.
    pub fn to_vec(&self) -> Vec<Value> {
        (1..=self.support()).map(|i| self.get(i)).collect()
    }
}

/// One application of the queue's after-event case analysis. `domain` is the
/// value set `V`; `None` admits every value except `nullv`.
fn queue_step(q: &QueueValue, e: &Event, domain: Option<&BTreeSet<Value>>) -> Result<QueueValue, Fault> {
    if e.is("enq") {
        let v = e.payload.as_ref().ok_or_else(|| Fault::InvalidEvent {
            event: e.clone(),
            reason: "enq needs a value".into(),
        })?;
        if *v == Value::NullV {
            return Err(Fault::InvalidEvent { event: e.clone(), reason: "nullv cannot be queued".into() });
        }
        if domain.is_some_and(|d| !d.contains(v)) {
            // not an event that changes queue state
            return Ok(q.clone());
        }
        // Q(1) = v, Q(i) = Q(i-1) for i > 1
        let mut next = BTreeMap::new();
        next.insert(1, v.clone());
        next.extend(q.0.iter().map(|(i, x)| (i + 1, x.clone())));
        Ok(QueueValue(next))
    } else if e.is("deq") && e.payload.is_none() {
        // Q(i) = Q(i+1)
        Ok(QueueValue(q.0.iter().filter(|(i, _)| **i > 1).map(|(i, x)| (i - 1, x.clone())).collect()))
    } else {
        Ok(q.clone())
    }
}

fn queue_value(v: &Value) -> Result<QueueValue, Fault> {
    QueueValue::from_value(v).ok_or_else(|| Fault::type_error("queue map", v))
}

/// The map-valued queue. Events other than `enq[v]` and `deq` are ignored.
pub fn queue_variable(domain: Option<BTreeSet<Value>>) -> Result<StateVariable> {
    if domain.as_ref().is_some_and(|d| d.contains(&Value::NullV)) {
        return Err(Error::InvalidParameter("nullv cannot be a queue value".into()));
    }
    Ok(StateVariable::define_fallible(Alphabet::universal(), QueueValue::default().to_value(), move |v, e| {
        Ok(queue_step(&queue_value(v)?, e, domain.as_ref())?.to_value())
    }))
}

/// The bounded queue's variables.
#[derive(Clone, Debug)]
pub struct BoundedQueue {
    pub capacity: i64,
    /// `Q(1)` while defined, the unspecified marker otherwise.
    pub cq: StateVariable,
    pub high_water: StateVariable,
    /// `Q(1) != nullv and HighWater < c`
    pub defined: StateVariable,
    pub queue: StateVariable,
}

impl BoundedQueue {
    /// `(cq, high_water, defined)` as one tuple-valued variable.
    pub fn view(&self) -> StateVariable {
        StateVariable::combine(
            |vs| Ok(Value::Tuple(vs.to_vec())),
            vec![self.cq.clone(), self.high_water.clone(), self.defined.clone()],
        )
    }
}

pub fn bounded_queue(c: i64, domain: Option<BTreeSet<Value>>) -> Result<BoundedQueue> {
    positive(c, "capacity")?;
    if domain.as_ref().is_some_and(|d| d.contains(&Value::NullV)) {
        return Err(Error::InvalidParameter("nullv cannot be a queue value".into()));
    }
    // (Q, HighWater); the high-water update reads Q after the event
    let paired = StateVariable::define_fallible(
        Alphabet::universal(),
        Value::Tuple(vec![QueueValue::default().to_value(), Value::Int(0)]),
        move |v, e| {
            let (q, hw) = crate::variable::split_pair(v)?;
            let q = queue_step(&queue_value(q)?, e, domain.as_ref())?;
            let hw = int_of(hw)?.max(q.support());
            Ok(Value::Tuple(vec![q.to_value(), Value::Int(hw)]))
        },
    );
    let queue = paired.project(0);
    let high_water = paired.project(1);
    let defined = StateVariable::combine(
        move |vs| {
            let front = queue_value(&vs[0])?.get(1);
            Ok(Value::Bool(front != Value::NullV && int_of(&vs[1])? < c))
        },
        vec![queue.clone(), high_water.clone()],
    );
    let front = StateVariable::combine(|vs| Ok(queue_value(&vs[0])?.get(1)), vec![queue.clone()]);
    let cq = StateVariable::guarded(&front, &defined);
    Ok(BoundedQueue { capacity: c, cq, high_water, defined, queue })
}

/// An example built by name, with the finite event basis used to explore it.
#[derive(Clone, Debug)]
pub struct Example {
    pub name: String,
    pub variable: StateVariable,
    pub basis: Vec<Event>,
}

pub const EXAMPLE_NAMES: &[&str] = &[
    "mod-counter",
    "unbounded-counter",
    "connected-counters",
    "queue",
    "bounded-queue",
    "shift-register",
    "bidir-register",
    "constant",
];

/// Parse a payload token: integers (with optional sign), `nullv`, or a symbol.
pub fn parse_value(token: &str) -> Value {
    match token {
        "nullv" => Value::NullV,
        "nullm" => Value::NullM,
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        _ => token.parse::<i64>().map(Value::Int).unwrap_or_else(|_| Value::sym(token)),
    }
}

/// Parse `name`, `name:payload`, or `name:p1:p2` (payload tuple).
pub fn parse_event(token: &str) -> Result<Event> {
    let mut parts = token.split(':');
    let name = parts.next().filter(|n| !n.is_empty()).ok_or_else(|| {
        Error::InvalidParameter(format!("empty event name in {token:?}"))
    })?;
    let payload: Vec<Value> = parts.map(parse_value).collect();
    Ok(match payload.len() {
        0 => Event::new(name),
        1 => Event::with(name, payload.into_iter().next().unwrap()),
        _ => Event::with(name, Value::Tuple(payload)),
    })
}

fn param_int(params: &BTreeMap<String, String>, key: &str, default: Option<i64>) -> Result<i64> {
    match params.get(key) {
        Some(v) => v.parse().map_err(|_| Error::InvalidParameter(format!("{key}={v} is not an integer"))),
        None => default.ok_or_else(|| Error::InvalidParameter(format!("missing parameter {key}"))),
    }
}

fn param_values(params: &BTreeMap<String, String>, default: &str) -> Vec<Value> {
    params.get("values").map_or(default, String::as_str).split(',').filter(|s| !s.is_empty()).map(parse_value).collect()
}

/// Build a catalog example from its name and `key=value` parameters.
pub fn build_example(name: &str, params: &BTreeMap<String, String>) -> Result<Example> {
    let tick = vec![Event::new("tick")];
    let (variable, basis) = match name {
        "mod-counter" => (mod_counter(param_int(params, "c", None)?)?, tick),
        "unbounded-counter" => (unbounded_counter(), tick),
        "connected-counters" => (connected_counters(param_int(params, "c", None)?)?.d, tick),
        "constant" => (StateVariable::constant(Value::Int(param_int(params, "k", Some(0))?)), tick),
        "queue" | "bounded-queue" => {
            let values = param_values(params, "a,b");
            let mut basis: Vec<Event> = values.iter().cloned().map(enq).collect();
            basis.push(deq());
            let domain = Some(values.into_iter().collect());
            let variable = if name == "queue" {
                queue_variable(domain)?
            } else {
                bounded_queue(param_int(params, "c", None)?, domain)?.view()
            };
            (variable, basis)
        }
        "shift-register" => {
            let n = param_int(params, "n", None)?;
            positive(n, "n")?;
            let basis = param_values(params, "0,1").into_iter().map(|v| Event::with("in", v)).collect();
            (product::shift_register(n as usize)?.variable().clone(), basis)
        }
        "bidir-register" => {
            let n = param_int(params, "n", None)?;
            positive(n, "n")?;
            let basis = param_values(params, "0,1")
                .into_iter()
                .flat_map(|v| [shift_event(1, v.clone()), shift_event(-1, v)])
                .collect();
            (product::bidirectional_register(n as usize)?.variable().clone(), basis)
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown example {other:?}; expected one of {}",
                EXAMPLE_NAMES.join(", ")
            )))
        }
    };
    Ok(Example { name: name.to_string(), variable, basis })
}
