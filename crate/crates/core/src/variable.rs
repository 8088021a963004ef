//! State variables: functions of the event trace given by an initial value
//! and an after-event rule, closed under pointwise combination, the
//! after-event shift, substitution of trace-valued drivers, and products.
//!
//! There are two independent ways to compute a variable's value:
//!
//! * [`StateVariable::eval`] follows the definitions on explicit traces:
//!   substitution evaluates the driver to a trace and then evaluates the
//!   inner variable on it, products build the driver traces `g_i` one outer
//!   event at a time.
//! * [`StateVariable::to_machine`] lowers the variable to a [`Machine`] whose
//!   state never stores a driver trace, so finite-state variables lower to
//!   finite-state machines.

use std::fmt;
use std::sync::Arc;

use crate::alphabet::Alphabet;
use crate::error::{Error, Fault, Result};
use crate::machine::Machine;
use crate::product::ProductSpec;
use crate::value::{Event, Trace, Value};

pub type Transition = Arc<dyn Fn(&Value, &Event) -> Result<Value, Fault> + Send + Sync>;
pub type CombineOp = Arc<dyn Fn(&[Value]) -> Result<Value, Fault> + Send + Sync>;
/// Given the context value before an event and the event, the segment a
/// driver appends.
pub type ExtendRule = Arc<dyn Fn(&Value, &Event) -> Result<Vec<Event>, Fault> + Send + Sync>;

#[derive(Clone)]
pub struct StateVariable(Arc<Form>);

pub(crate) enum Form {
    Base { alphabet: Alphabet, initial: Value, transition: Transition },
    Combine { alphabet: Alphabet, op: CombineOp, parts: Vec<StateVariable> },
    Substitute { driver: TraceVariable, inner: StateVariable },
    After { inner: StateVariable, event: Event },
    TraceValued(TraceVariable),
    Product(Arc<ProductSpec>),
}

impl fmt::Debug for StateVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Form::Base { initial, .. } => write!(f, "Base(initial={initial})"),
            Form::Combine { parts, .. } => f.debug_tuple("Combine").field(parts).finish(),
            Form::Substitute { driver, inner } => {
                f.debug_struct("Substitute").field("driver", driver).field("inner", inner).finish()
            }
            Form::After { inner, event } => write!(f, "After({event}, {inner:?})"),
            Form::TraceValued(u) => f.debug_tuple("TraceValued").field(u).finish(),
            Form::Product(p) => write!(f, "Product(n={})", p.components.len()),
        }
    }
}

/// Re-anchor an error raised while evaluating on some derived trace to the
/// outer position `position`.
pub(crate) fn reposition(err: Error, position: usize) -> Error {
    match err {
        Error::Step { fault, .. } => Error::Step { position, fault },
        other => other,
    }
}

impl StateVariable {
    pub(crate) fn from_form(form: Form) -> Self {
        StateVariable(Arc::new(form))
    }

    pub(crate) fn form(&self) -> &Form {
        &self.0
    }

    /// `initial y = initial_value`, `after e: y = transition(y, e)`.
    pub fn define(
        alphabet: Alphabet,
        initial_value: Value,
        transition: impl Fn(&Value, &Event) -> Value + Send + Sync + 'static,
    ) -> Self {
        StateVariable::define_fallible(alphabet, initial_value, move |v, e| Ok(transition(v, e)))
    }

    pub fn define_fallible(
        alphabet: Alphabet,
        initial_value: Value,
        transition: impl Fn(&Value, &Event) -> Result<Value, Fault> + Send + Sync + 'static,
    ) -> Self {
        StateVariable::from_form(Form::Base {
            alphabet,
            initial: initial_value,
            transition: Arc::new(transition),
        })
    }

    /// A variable that never changes.
    pub fn constant(value: Value) -> Self {
        StateVariable::define(Alphabet::universal(), value, |v, _| v.clone())
    }

    /// Pointwise `op(y1, .., yn)`.
    pub fn combine(
        op: impl Fn(&[Value]) -> Result<Value, Fault> + Send + Sync + 'static,
        parts: Vec<StateVariable>,
    ) -> Self {
        let alphabet = parts
            .iter()
            .fold(Alphabet::universal(), |acc, p| acc.intersect(&p.alphabet()));
        StateVariable::from_form(Form::Combine { alphabet, op: Arc::new(op), parts })
    }

    /// `SUB{u} y`: evaluate `y` on the trace that `u` holds.
    pub fn substitute(driver: &TraceVariable, inner: &StateVariable) -> Self {
        StateVariable::from_form(Form::Substitute { driver: driver.clone(), inner: inner.clone() })
    }

    /// `AFTER{e} y`, as a variable: its value on `w` is `y`'s value on `w.e`.
    pub fn after(&self, e: &Event) -> Result<StateVariable> {
        if !self.alphabet().contains(e) {
            return Err(Fault::OutsideAlphabet(e.clone()).at(0));
        }
        Ok(StateVariable::from_form(Form::After { inner: self.clone(), event: e.clone() }))
    }

    /// `value` where `defined` holds, the unspecified marker elsewhere.
    pub fn guarded(value: &StateVariable, defined: &StateVariable) -> Self {
        StateVariable::combine(
            |vs| match vs[1] {
                Value::Bool(true) => Ok(vs[0].clone()),
                Value::Bool(false) => Ok(Value::Unspecified),
                ref other => Err(Fault::type_error("boolean", other)),
            },
            vec![value.clone(), defined.clone()],
        )
    }

    /// Component `i` of a tuple-valued variable.
    pub fn project(&self, i: usize) -> StateVariable {
        StateVariable::combine(
            move |vs| vs[0].component(i).cloned().ok_or_else(|| Fault::type_error("tuple", &vs[0])),
            vec![self.clone()],
        )
    }

    pub fn alphabet(&self) -> Alphabet {
        match self.form() {
            Form::Base { alphabet, .. } | Form::Combine { alphabet, .. } => alphabet.clone(),
            Form::Substitute { driver, .. } => driver.alphabet(),
            Form::After { inner, .. } => inner.alphabet(),
            Form::TraceValued(u) => u.alphabet(),
            Form::Product(p) => p.alphabet.clone(),
        }
    }

    /// `initial y`
    pub fn initial_value(&self) -> Result<Value> {
        self.eval(&Trace::new())
    }

    /// The value of the variable after trace `w`.
    pub fn eval(&self, w: &Trace) -> Result<Value> {
        match self.form() {
            Form::Base { alphabet, initial, transition } => {
                let mut v = initial.clone();
                for (i, e) in w.iter().enumerate() {
                    v = base_step(alphabet, transition, &v, e).map_err(|f| f.at(i))?;
                }
                Ok(v)
            }
            // op must be defined on every prefix, as in the lowered machine
            Form::Combine { .. } => Ok(self.prefix_values(w)?.pop().expect("at least one prefix")),
            Form::Substitute { driver, inner } => {
                let (u, lens) = driver.prefix_traces(w)?;
                inner.eval(&u).map_err(|err| outer_position(err, &lens))
            }
            Form::After { inner, event } => inner.eval(&w.append(event.clone())),
            Form::TraceValued(u) => Ok(Value::Trace(u.eval(w)?)),
            Form::Product(p) => p.eval(w),
        }
    }

    /// Values after every prefix of `w` (`|w| + 1` of them).
    pub fn prefix_values(&self, w: &Trace) -> Result<Vec<Value>> {
        match self.form() {
            Form::Base { alphabet, initial, transition } => {
                let mut out = Vec::with_capacity(w.len() + 1);
                let mut v = initial.clone();
                for (i, e) in w.iter().enumerate() {
                    let next = base_step(alphabet, transition, &v, e).map_err(|f| f.at(i))?;
                    out.push(std::mem::replace(&mut v, next));
                }
                out.push(v);
                Ok(out)
            }
            Form::Combine { op, parts, .. } => {
                let columns = parts.iter().map(|p| p.prefix_values(w)).collect::<Result<Vec<_>>>()?;
                (0..=w.len())
                    .map(|i| {
                        let row: Vec<Value> = columns.iter().map(|c| c[i].clone()).collect();
                        op(&row).map_err(|f| f.at(i.saturating_sub(1)))
                    })
                    .collect()
            }
            Form::Substitute { driver, inner } => {
                let (u, lens) = driver.prefix_traces(w)?;
                let ys = inner.prefix_values(&u).map_err(|err| outer_position(err, &lens))?;
                Ok(lens.iter().map(|&l| ys[l].clone()).collect())
            }
            Form::After { inner, event } => (0..=w.len())
                .map(|i| inner.eval(&w.prefix(i).append(event.clone())))
                .collect(),
            Form::TraceValued(u) => {
                let (full, lens) = u.prefix_traces(w)?;
                Ok(lens.iter().map(|&l| Value::Trace(full.prefix(l))).collect())
            }
            Form::Product(p) => p.prefix_values(w),
        }
    }

    /// Lower to a generalized Moore machine with `run(m, w) == eval(y, w)`.
    pub fn to_machine(&self) -> Result<Machine> {
        match self.form() {
            Form::Base { alphabet, initial, transition } => {
                let t = transition.clone();
                Ok(Machine::new(
                    alphabet.clone(),
                    initial.clone(),
                    Arc::new(move |s, e| t(s, e)),
                    Arc::new(|s| s.clone()),
                ))
            }
            Form::Combine { alphabet, op, parts } => lower_combine(alphabet, op, parts),
            Form::Substitute { driver, inner } => lower_substitute(driver, inner),
            Form::After { inner, event } => {
                let m = inner.to_machine()?;
                let start = m.step_state(m.initial(), event).map_err(|f| f.at(0))?;
                Ok(m.with_initial(start))
            }
            Form::TraceValued(u) => {
                let seg = u.segment_machine()?;
                let initial = Value::Tuple(vec![seg.initial.clone(), Value::Trace(seg.start.clone())]);
                let step = seg.step.clone();
                Ok(Machine::new(
                    seg.alphabet.clone(),
                    initial,
                    Arc::new(move |s, e| {
                        let (ds, held) = split_pair(s)?;
                        let mut held = held.as_trace().ok_or_else(|| Fault::type_error("trace", held))?.clone();
                        let (ds, segment) = step(ds, e)?;
                        held.extend_from_slice(&segment);
                        Ok(Value::Tuple(vec![ds, Value::Trace(held)]))
                    }),
                    Arc::new(|s| s.component(1).cloned().unwrap_or(Value::Unspecified)),
                ))
            }
            Form::Product(p) => p.to_machine(),
        }
    }
}

fn base_step(alphabet: &Alphabet, transition: &Transition, v: &Value, e: &Event) -> Result<Value, Fault> {
    if !alphabet.contains(e) {
        return Err(Fault::OutsideAlphabet(e.clone()));
    }
    transition(v, e)
}

/// Map an error at a position of a driver trace back to the outer event that
/// appended that position.
fn outer_position(err: Error, lens: &[usize]) -> Error {
    match err.position() {
        Some(p) => {
            // first outer prefix whose driver holds position p
            let i = lens.partition_point(|&l| l <= p);
            reposition(err, i.saturating_sub(1))
        }
        None => err,
    }
}

pub(crate) fn split_pair(s: &Value) -> Result<(&Value, &Value), Fault> {
    match s.as_tuple() {
        Some([a, b]) => Ok((a, b)),
        _ => Err(Fault::type_error("pair", s)),
    }
}

fn lower_combine(alphabet: &Alphabet, op: &CombineOp, parts: &[StateVariable]) -> Result<Machine> {
    let machines = parts.iter().map(|p| p.to_machine()).collect::<Result<Vec<_>>>()?;
    let n = machines.len();
    let initial_outs: Vec<Value> = machines.iter().map(|m| m.out(m.initial())).collect();
    // the combined output is cached as the last tuple component so that op
    // failures surface from the step that caused them
    let initial_out = op(&initial_outs).map_err(|f| f.at(0))?;
    let mut initial: Vec<Value> = machines.iter().map(|m| m.initial().clone()).collect();
    initial.push(initial_out);
    let op = op.clone();
    Ok(Machine::new(
        alphabet.clone(),
        Value::Tuple(initial),
        Arc::new(move |s, e| {
            let states = s.as_tuple().filter(|t| t.len() == n + 1).ok_or_else(|| Fault::type_error("tuple", s))?;
            let mut next = Vec::with_capacity(n + 1);
            for (m, st) in machines.iter().zip(states) {
                next.push(m.step_state(st, e)?);
            }
            let outs: Vec<Value> = machines.iter().zip(&next).map(|(m, st)| m.out(st)).collect();
            next.push(op(&outs)?);
            Ok(Value::Tuple(next))
        }),
        Arc::new(move |s| s.component(n).cloned().unwrap_or(Value::Unspecified)),
    ))
}

fn lower_substitute(driver: &TraceVariable, inner: &StateVariable) -> Result<Machine> {
    let seg = driver.segment_machine()?;
    let inner_m = inner.to_machine()?;
    let inner_start = inner_m.advance(inner_m.initial(), seg.start.iter())?;
    let initial = Value::Tuple(vec![seg.initial.clone(), inner_start]);
    let step = seg.step.clone();
    let out_m = inner_m.clone();
    Ok(Machine::new(
        seg.alphabet.clone(),
        initial,
        Arc::new(move |s, e| {
            let (ds, is) = split_pair(s)?;
            let (ds, segment) = step(ds, e)?;
            let mut is = is.clone();
            for x in &segment {
                is = inner_m.step_state(&is, x)?;
            }
            Ok(Value::Tuple(vec![ds, is]))
        }),
        Arc::new(move |s| match s.component(1) {
            Some(is) => out_m.out(is),
            None => Value::Unspecified,
        }),
    ))
}

/// A state variable whose values are traces that only ever grow: each event
/// leaves the trace unchanged or appends a finite segment.
#[derive(Clone)]
pub struct TraceVariable(Arc<DriverForm>);

enum DriverForm {
    Recorder { alphabet: Alphabet },
    Constant { alphabet: Alphabet, trace: Trace },
    Driven { initial: Trace, context: StateVariable, extend: ExtendRule },
    Values(StateVariable),
}

impl fmt::Debug for TraceVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            DriverForm::Recorder { .. } => f.write_str("Recorder"),
            DriverForm::Constant { trace, .. } => write!(f, "Constant({trace})"),
            DriverForm::Driven { initial, context, .. } => {
                write!(f, "Driven(initial={initial}, context={context:?})")
            }
            DriverForm::Values(v) => write!(f, "Values({v:?})"),
        }
    }
}

/// A driver lowered to a machine that reports the segment each event appends.
pub(crate) struct SegmentMachine {
    pub alphabet: Alphabet,
    pub start: Trace,
    pub initial: Value,
    #[allow(clippy::type_complexity)]
    pub step: Arc<dyn Fn(&Value, &Event) -> Result<(Value, Vec<Event>), Fault> + Send + Sync>,
}

impl TraceVariable {
    /// Appends every event: the identity driver.
    pub fn recorder(alphabet: Alphabet) -> Self {
        TraceVariable(Arc::new(DriverForm::Recorder { alphabet }))
    }

    /// Always holds `trace`.
    pub fn constant(trace: Trace) -> Self {
        TraceVariable(Arc::new(DriverForm::Constant { alphabet: Alphabet::universal(), trace }))
    }

    /// `initial u = initial`, `after e: u = u ++ extend(context, e)` where
    /// `context` is read before the event.
    pub fn driven(
        initial: Trace,
        context: &StateVariable,
        extend: impl Fn(&Value, &Event) -> Result<Vec<Event>, Fault> + Send + Sync + 'static,
    ) -> Self {
        TraceVariable(Arc::new(DriverForm::Driven {
            initial,
            context: context.clone(),
            extend: Arc::new(extend),
        }))
    }

    /// Appends `e` exactly when `cond(context, e)` holds, holds otherwise.
    pub fn append_when(
        context: &StateVariable,
        cond: impl Fn(&Value, &Event) -> bool + Send + Sync + 'static,
    ) -> Self {
        TraceVariable::driven(Trace::new(), context, move |v, e| {
            Ok(if cond(v, e) { vec![e.clone()] } else { Vec::new() })
        })
    }

    /// Wrap an arbitrary variable whose values must be growing traces. Values
    /// that are not traces, or that do not extend the previous value, are
    /// reported as errors at the offending position.
    pub fn from_values(values: &StateVariable) -> Self {
        TraceVariable(Arc::new(DriverForm::Values(values.clone())))
    }

    pub fn alphabet(&self) -> Alphabet {
        match &*self.0 {
            DriverForm::Recorder { alphabet } | DriverForm::Constant { alphabet, .. } => alphabet.clone(),
            DriverForm::Driven { context, .. } => context.alphabet(),
            DriverForm::Values(v) => v.alphabet(),
        }
    }

    /// This driver as an ordinary variable with `Value::Trace` values.
    pub fn as_variable(&self) -> StateVariable {
        StateVariable::from_form(Form::TraceValued(self.clone()))
    }

    pub fn eval(&self, w: &Trace) -> Result<Trace> {
        Ok(self.prefix_traces(w)?.0)
    }

    /// The final driver trace together with its length after each prefix of
    /// `w`; every intermediate value is a prefix of the final one.
    pub fn prefix_traces(&self, w: &Trace) -> Result<(Trace, Vec<usize>)> {
        match &*self.0 {
            DriverForm::Recorder { alphabet } => {
                if let Some(i) = w.iter().position(|e| !alphabet.contains(e)) {
                    return Err(Fault::OutsideAlphabet(w.events()[i].clone()).at(i));
                }
                Ok((w.clone(), (0..=w.len()).collect()))
            }
            DriverForm::Constant { trace, .. } => Ok((trace.clone(), vec![trace.len(); w.len() + 1])),
            DriverForm::Driven { initial, context, extend } => {
                let ctx = context.prefix_values(w)?;
                let mut u = initial.clone();
                let mut lens = Vec::with_capacity(w.len() + 1);
                lens.push(u.len());
                for (i, e) in w.iter().enumerate() {
                    let segment = extend(&ctx[i], e).map_err(|f| f.at(i))?;
                    u.extend_from_slice(&segment);
                    lens.push(u.len());
                }
                Ok((u, lens))
            }
            DriverForm::Values(v) => {
                let vals = v.prefix_values(w)?;
                let mut lens = Vec::with_capacity(vals.len());
                let mut prev: Option<&Trace> = None;
                for (i, val) in vals.iter().enumerate() {
                    let t = val.as_trace().ok_or_else(|| Fault::type_error("trace", val).at(i))?;
                    if let Some(p) = prev {
                        if !p.is_prefix_of(t) {
                            return Err(Fault::NotAnExtension { found: val.clone() }.at(i));
                        }
                    }
                    lens.push(t.len());
                    prev = Some(t);
                }
                let last = prev.cloned().unwrap_or_default();
                Ok((last, lens))
            }
        }
    }

    pub(crate) fn segment_machine(&self) -> Result<SegmentMachine> {
        match &*self.0 {
            DriverForm::Recorder { alphabet } => Ok(SegmentMachine {
                alphabet: alphabet.clone(),
                start: Trace::new(),
                initial: Value::unit(),
                step: Arc::new(|s, e| Ok((s.clone(), vec![e.clone()]))),
            }),
            DriverForm::Constant { alphabet, trace } => Ok(SegmentMachine {
                alphabet: alphabet.clone(),
                start: trace.clone(),
                initial: Value::unit(),
                step: Arc::new(|s, _| Ok((s.clone(), Vec::new()))),
            }),
            DriverForm::Driven { initial, context, extend } => {
                let ctx = context.to_machine()?;
                let extend = extend.clone();
                Ok(SegmentMachine {
                    alphabet: ctx.alphabet().clone(),
                    start: initial.clone(),
                    initial: ctx.initial().clone(),
                    step: Arc::new(move |s, e| {
                        let segment = extend(&ctx.out(s), e)?;
                        Ok((ctx.step_state(s, e)?, segment))
                    }),
                })
            }
            DriverForm::Values(v) => {
                let m = v.to_machine()?;
                let start_val = m.out(m.initial());
                let start = start_val.as_trace().ok_or_else(|| Fault::type_error("trace", &start_val).at(0))?.clone();
                Ok(SegmentMachine {
                    alphabet: m.alphabet().clone(),
                    start,
                    initial: m.initial().clone(),
                    step: Arc::new(move |s, e| {
                        let before = m.out(s);
                        let next = m.step_state(s, e)?;
                        let after = m.out(&next);
                        let (b, a) = match (before.as_trace(), after.as_trace()) {
                            (Some(b), Some(a)) => (b, a),
                            (Some(_), None) => return Err(Fault::type_error("trace", &after)),
                            _ => return Err(Fault::type_error("trace", &before)),
                        };
                        if !b.is_prefix_of(a) {
                            return Err(Fault::NotAnExtension { found: after.clone() });
                        }
                        let segment = a.events()[b.len()..].to_vec();
                        Ok((next, segment))
                    }),
                })
            }
        }
    }
}

/// Free-function spellings of the three operators.
pub fn define(
    alphabet: Alphabet,
    initial_value: Value,
    transition: impl Fn(&Value, &Event) -> Value + Send + Sync + 'static,
) -> StateVariable {
    StateVariable::define(alphabet, initial_value, transition)
}

pub fn eval(y: &StateVariable, w: &Trace) -> Result<Value> {
    y.eval(w)
}

pub fn after(y: &StateVariable, e: &Event) -> Result<StateVariable> {
    y.after(e)
}

pub fn substitute(u: &TraceVariable, y: &StateVariable) -> StateVariable {
    StateVariable::substitute(u, y)
}

pub fn to_machine(y: &StateVariable) -> Result<Machine> {
    y.to_machine()
}
