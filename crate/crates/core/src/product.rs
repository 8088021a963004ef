//! General products of state variables with output feedback.
//!
//! Each component `y_i` is driven by a trace `u_i`. On every outer event `e`,
//! the feedback map `φ_i` reads `e` and the outputs of all components in the
//! current (pre-event) state and says what to append to `u_i`: nothing, one
//! event, or (for multi-step products) a finite sequence. All drivers extend
//! simultaneously. The product's value is the tuple of `SUB{u_i} y_i`.

use std::fmt;
use std::sync::Arc;

use crate::alphabet::{Alphabet, PayloadDomain};
use crate::error::{Error, Fault, Result};
use crate::machine::{reachable, Machine};
use crate::minimize::minimize;
use crate::value::{Event, Trace, Value};
use crate::variable::{reposition, Form, StateVariable};

/// What a feedback map asks of its component for one outer event.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    Hold,
    Step(Event),
    Steps(Vec<Event>),
}

impl Action {
    fn into_events(self) -> Vec<Event> {
        match self {
            Action::Hold => Vec::new(),
            Action::Step(e) => vec![e],
            Action::Steps(es) => es,
        }
    }
}

impl From<Option<Event>> for Action {
    fn from(e: Option<Event>) -> Self {
        e.map_or(Action::Hold, Action::Step)
    }
}

type FeedbackFn = dyn Fn(&Event, &[Value]) -> Result<Action, Fault> + Send + Sync;

/// `φ_i`: outer event and component outputs to an [`Action`].
#[derive(Clone)]
pub struct FeedbackMap(Arc<FeedbackFn>);

impl fmt::Debug for FeedbackMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FeedbackMap")
    }
}

impl FeedbackMap {
    pub fn new(f: impl Fn(&Event, &[Value]) -> Result<Action, Fault> + Send + Sync + 'static) -> Self {
        FeedbackMap(Arc::new(f))
    }

    /// A map that never fails.
    pub fn total(f: impl Fn(&Event, &[Value]) -> Action + Send + Sync + 'static) -> Self {
        FeedbackMap::new(move |e, outs| Ok(f(e, outs)))
    }

    pub fn hold() -> Self {
        FeedbackMap::total(|_, _| Action::Hold)
    }

    /// Forward the outer event unchanged.
    pub fn pass_through() -> Self {
        FeedbackMap::total(|e, _| Action::Step(e.clone()))
    }

    pub fn apply(&self, e: &Event, outputs: &[Value]) -> Result<Action, Fault> {
        (self.0)(e, outputs)
    }
}

pub(crate) struct ProductSpec {
    pub(crate) alphabet: Alphabet,
    pub(crate) components: Vec<StateVariable>,
    feedback: Vec<FeedbackMap>,
    initial_drivers: Vec<Trace>,
    multi_step: bool,
    /// Component `i`'s map sees only outputs `i..n`.
    cascade: bool,
}

impl ProductSpec {
    fn segment(&self, i: usize, e: &Event, outs: &[Value]) -> Result<Vec<Event>, Fault> {
        let visible = if self.cascade { &outs[i..] } else { outs };
        let action = self.feedback[i].apply(e, visible)?;
        if !self.multi_step && matches!(action, Action::Steps(_)) {
            return Err(Fault::Domain(format!(
                "component {i}: sequence action in a single-step product"
            )));
        }
        let events = action.into_events();
        let alphabet = self.components[i].alphabet();
        if let Some(bad) = events.iter().find(|x| !alphabet.contains(x)) {
            return Err(Fault::Feedback { component: i, event: bad.clone() });
        }
        Ok(events)
    }

    fn check_outer(&self, e: &Event) -> Result<(), Fault> {
        if self.alphabet.contains(e) {
            Ok(())
        } else {
            Err(Fault::OutsideAlphabet(e.clone()))
        }
    }

    fn outputs_on(&self, drivers: &[Trace], position: usize) -> Result<Vec<Value>> {
        self.components
            .iter()
            .zip(drivers)
            .map(|(y, u)| y.eval(u).map_err(|err| reposition(err, position)))
            .collect()
    }

    /// The driver traces `g_i(w)` built by the defining recursion, together
    /// with the component outputs after every prefix.
    fn unfold(&self, w: &Trace) -> Result<(Vec<Trace>, Vec<Vec<Value>>)> {
        let mut drivers = self.initial_drivers.clone();
        let mut history = Vec::with_capacity(w.len() + 1);
        let mut outs = self.outputs_on(&drivers, 0)?;
        for (t, e) in w.iter().enumerate() {
            self.check_outer(e).map_err(|f| f.at(t))?;
            let segments = (0..drivers.len())
                .map(|i| self.segment(i, e, &outs).map_err(|f| f.at(t)))
                .collect::<Result<Vec<_>>>()?;
            for (u, seg) in drivers.iter_mut().zip(segments) {
                u.extend_from_slice(&seg);
            }
            history.push(std::mem::replace(&mut outs, self.outputs_on(&drivers, t)?));
        }
        history.push(outs);
        Ok((drivers, history))
    }

    pub(crate) fn eval(&self, w: &Trace) -> Result<Value> {
        let (_, mut history) = self.unfold(w)?;
        Ok(Value::Tuple(history.pop().unwrap_or_default()))
    }

    pub(crate) fn prefix_values(&self, w: &Trace) -> Result<Vec<Value>> {
        Ok(self.unfold(w)?.1.into_iter().map(Value::Tuple).collect())
    }

    /// The product machine: state is the tuple of component states.
    pub(crate) fn to_machine(self: &Arc<Self>) -> Result<Machine> {
        let machines = self.components.iter().map(|y| y.to_machine()).collect::<Result<Vec<_>>>()?;
        let initial = machines
            .iter()
            .zip(&self.initial_drivers)
            .map(|(m, u)| m.advance(m.initial(), u))
            .collect::<Result<Vec<_>>>()?;
        let spec = Arc::clone(self);
        let n = machines.len();
        let machines = Arc::new(machines);
        let outs_of = {
            let machines = Arc::clone(&machines);
            move |states: &[Value]| -> Vec<Value> {
                machines.iter().zip(states).map(|(m, s)| m.out(s)).collect()
            }
        };
        let outs_for_step = outs_of.clone();
        Ok(Machine::new(
            self.alphabet.clone(),
            Value::Tuple(initial),
            Arc::new(move |s, e| {
                let states = s.as_tuple().filter(|t| t.len() == n).ok_or_else(|| Fault::type_error("tuple", s))?;
                let outs = outs_for_step(states);
                let mut next = Vec::with_capacity(n);
                for (i, (m, st)) in machines.iter().zip(states).enumerate() {
                    let mut st = st.clone();
                    for x in spec.segment(i, e, &outs)? {
                        st = m.step_state(&st, &x)?;
                    }
                    next.push(st);
                }
                Ok(Value::Tuple(next))
            }),
            Arc::new(move |s| match s.as_tuple() {
                Some(states) => Value::Tuple(outs_of(states)),
                None => Value::Unspecified,
            }),
        ))
    }
}

/// A product of state variables. Its value is the tuple of component outputs.
#[derive(Clone)]
pub struct ProductVariable {
    spec: Arc<ProductSpec>,
    variable: StateVariable,
}

impl fmt::Debug for ProductVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProductVariable")
            .field("components", &self.spec.components.len())
            .field("multi_step", &self.spec.multi_step)
            .field("cascade", &self.spec.cascade)
            .finish()
    }
}

impl AsRef<StateVariable> for ProductVariable {
    fn as_ref(&self) -> &StateVariable {
        &self.variable
    }
}

impl ProductVariable {
    fn build(
        alphabet: Alphabet,
        components: Vec<StateVariable>,
        feedback: Vec<FeedbackMap>,
        initial_drivers: Option<Vec<Trace>>,
        multi_step: bool,
        cascade: bool,
    ) -> Result<Self> {
        let n = components.len();
        if n == 0 {
            return Err(Error::InvalidParameter("a product needs at least one component".into()));
        }
        if feedback.len() != n {
            return Err(Error::InvalidParameter(format!(
                "{} feedback maps for {n} components",
                feedback.len()
            )));
        }
        let initial_drivers = initial_drivers.unwrap_or_else(|| vec![Trace::new(); n]);
        if initial_drivers.len() != n {
            return Err(Error::InvalidParameter(format!(
                "{} initial driver traces for {n} components",
                initial_drivers.len()
            )));
        }
        let spec = Arc::new(ProductSpec { alphabet, components, feedback, initial_drivers, multi_step, cascade });
        let variable = StateVariable::from_form(Form::Product(Arc::clone(&spec)));
        Ok(ProductVariable { spec, variable })
    }

    pub fn variable(&self) -> &StateVariable {
        &self.variable
    }

    pub fn len(&self) -> usize {
        self.spec.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spec.components.is_empty()
    }

    pub fn eval(&self, w: &Trace) -> Result<Value> {
        self.variable.eval(w)
    }

    /// `g_i(w)` for every component.
    pub fn driver_traces(&self, w: &Trace) -> Result<Vec<Trace>> {
        Ok(self.spec.unfold(w)?.0)
    }

    pub fn to_machine(&self) -> Result<Machine> {
        self.variable.to_machine()
    }

    /// Component `i` of the output tuple, `SUB{u_i} y_i`.
    pub fn output(&self, i: usize) -> StateVariable {
        self.variable.project(i)
    }
}

/// `Π [y_i, φ_i]` where each `φ_i` yields at most one event per outer event.
/// `initial_drivers` defaults to empty traces.
pub fn general_product(
    alphabet: Alphabet,
    components: Vec<StateVariable>,
    feedback: Vec<FeedbackMap>,
    initial_drivers: Option<Vec<Trace>>,
) -> Result<ProductVariable> {
    ProductVariable::build(alphabet, components, feedback, initial_drivers, false, false)
}

/// Like [`general_product`], but feedback maps may return whole sequences
/// that are concatenated onto the drivers.
pub fn multi_step_product(
    alphabet: Alphabet,
    components: Vec<StateVariable>,
    feedback: Vec<FeedbackMap>,
    initial_drivers: Option<Vec<Trace>>,
) -> Result<ProductVariable> {
    ProductVariable::build(alphabet, components, feedback, initial_drivers, true, false)
}

/// A loop-free product: the map for component `i` is handed only the
/// outputs of components `i..n`, so outputs of lower-numbered components
/// cannot reach it.
pub fn cascade_product(
    alphabet: Alphabet,
    components: Vec<StateVariable>,
    feedback: Vec<FeedbackMap>,
) -> Result<ProductVariable> {
    ProductVariable::build(alphabet, components, feedback, None, false, true)
}

/// A storage cell: its value is the payload of the last `in[v]` it saw.
pub fn cell(initial: Value) -> StateVariable {
    StateVariable::define(Alphabet::of([("in", PayloadDomain::Any)]), initial, |v, e| {
        e.payload.clone().unwrap_or_else(|| v.clone())
    })
}

fn payload_of(e: &Event) -> Result<&Value, Fault> {
    e.payload.as_ref().ok_or_else(|| Fault::InvalidEvent { event: e.clone(), reason: "missing payload".into() })
}

/// An `n`-cell shift-right register over events `in[v]`. Cell 1 loads the
/// input and cell `i > 1` loads the previous value of cell `i - 1`. Cells
/// start out holding `nullv`.
pub fn shift_register(n: usize) -> Result<ProductVariable> {
    if n == 0 {
        return Err(Error::InvalidParameter("a register needs at least one cell".into()));
    }
    let feedback = (0..n)
        .map(|i| {
            if i == 0 {
                FeedbackMap::new(|e, _| Ok(Action::Step(Event::with("in", payload_of(e)?.clone()))))
            } else {
                FeedbackMap::total(move |_, outs| Action::Step(Event::with("in", outs[i - 1].clone())))
            }
        })
        .collect();
    general_product(
        Alphabet::of([("in", PayloadDomain::Any)]),
        vec![cell(Value::NullV); n],
        feedback,
        None,
    )
}

/// An `n`-cell register over events `shift[(r, v)]`, `r` in `{+1, -1}`.
/// Cell `i` (1-based) loads cell `i - r` when that index is in `1..=n`, and
/// loads `v` otherwise.
pub fn bidirectional_register(n: usize) -> Result<ProductVariable> {
    if n == 0 {
        return Err(Error::InvalidParameter("a register needs at least one cell".into()));
    }
    let feedback = (1..=n as i64)
        .map(|i| {
            FeedbackMap::new(move |e, outs| {
                let invalid = |reason: &str| Fault::InvalidEvent { event: e.clone(), reason: reason.into() };
                let (r, v) = match payload_of(e)?.as_tuple() {
                    Some([Value::Int(r), v]) => (*r, v),
                    _ => return Err(invalid("expected payload (r, v)")),
                };
                if r != 1 && r != -1 {
                    return Err(invalid("direction must be +1 or -1"));
                }
                let source = i - r;
                let loaded = if (1..=n as i64).contains(&source) {
                    outs[(source - 1) as usize].clone()
                } else {
                    v.clone()
                };
                Ok(Action::Step(Event::with("in", loaded)))
            })
        })
        .collect();
    general_product(
        Alphabet::of([("shift", PayloadDomain::Any)]),
        vec![cell(Value::NullV); n],
        feedback,
        None,
    )
}

/// `shift[(r, v)]`
pub fn shift_event(r: i64, v: Value) -> Event {
    Event::with("shift", Value::Tuple(vec![Value::Int(r), v]))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteStateReport {
    /// The reachable closure over the basis finished within the bound.
    pub complete: bool,
    pub reachable_states: usize,
    /// State count after minimization, when the closure completed.
    pub minimized_states: Option<usize>,
}

/// Lower `p` and explore it over `basis`; exhausting `bound` is reported as
/// an incomplete closure, not an error.
pub fn is_finite_state(p: impl AsRef<StateVariable>, basis: &[Event], bound: usize) -> Result<FiniteStateReport> {
    let m = p.as_ref().to_machine()?;
    let r = reachable(&m, basis, bound)?;
    let minimized_states = if r.complete { Some(minimize(&m, basis, bound)?.state_count()) } else { None };
    Ok(FiniteStateReport { complete: r.complete, reachable_states: r.len(), minimized_states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tick() -> Event {
        Event::new("tick")
    }

    fn counter(c: i64) -> StateVariable {
        StateVariable::define(Alphabet::universal(), Value::Int(0), move |v, _| {
            Value::Int((v.as_int().unwrap() + 1) % c)
        })
    }

    fn unbounded() -> StateVariable {
        StateVariable::define(Alphabet::universal(), Value::Int(0), |v, _| Value::Int(v.as_int().unwrap() + 1))
    }

    fn ins(vals: &[&str]) -> Trace {
        vals.iter().map(|v| Event::with("in", Value::sym(v))).collect()
    }

    fn syms(vals: &[&str]) -> Value {
        Value::Tuple(vals.iter().map(|v| Value::sym(v)).collect())
    }

    #[test]
    fn single_pass_through_component_is_the_component() {
        let p = general_product(Alphabet::universal(), vec![counter(4)], vec![FeedbackMap::pass_through()], None)
            .unwrap();
        for n in 0..10 {
            let w = Trace::repeat(&tick(), n);
            assert_eq!(p.eval(&w).unwrap(), Value::Tuple(vec![counter(4).eval(&w).unwrap()]));
        }
    }

    #[test]
    fn all_hold_freezes_components() {
        let p = general_product(
            Alphabet::universal(),
            vec![counter(3), counter(5)],
            vec![FeedbackMap::hold(), FeedbackMap::hold()],
            None,
        )
        .unwrap();
        let w = Trace::repeat(&tick(), 13);
        assert_eq!(p.eval(&w).unwrap(), Value::Tuple(vec![Value::Int(0), Value::Int(0)]));
        assert_eq!(p.driver_traces(&w).unwrap(), vec![Trace::new(), Trace::new()]);
        let report = is_finite_state(&p, &[tick()], 10).unwrap();
        assert_eq!(report.reachable_states, 1);
        assert!(report.complete);
    }

    #[test]
    fn feedback_reads_pre_event_outputs() {
        // component 1 copies component 0's output before the event
        let p = general_product(
            Alphabet::universal(),
            vec![counter(10), cell(Value::NullV)],
            vec![
                FeedbackMap::pass_through(),
                FeedbackMap::total(|_, outs| Action::Step(Event::with("in", outs[0].clone()))),
            ],
            None,
        )
        .unwrap();
        let w = Trace::repeat(&tick(), 4);
        assert_eq!(p.eval(&w).unwrap(), Value::Tuple(vec![Value::Int(4), Value::Int(3)]));
        assert_eq!(p.to_machine().unwrap().run(&w).unwrap(), p.eval(&w).unwrap());
    }

    #[test]
    fn feedback_outside_component_alphabet_names_component_and_step() {
        let p = general_product(
            Alphabet::universal(),
            vec![counter(3), cell(Value::NullV)],
            vec![FeedbackMap::pass_through(), FeedbackMap::pass_through()],
            None,
        )
        .unwrap();
        let err = p.eval(&Trace::repeat(&tick(), 2)).unwrap_err();
        assert_eq!(err, Fault::Feedback { component: 1, event: tick() }.at(0));
        let err = p.to_machine().unwrap().run(&Trace::repeat(&tick(), 2)).unwrap_err();
        assert_eq!(err, Fault::Feedback { component: 1, event: tick() }.at(0));
    }

    #[test]
    fn sequence_actions_need_a_multi_step_product() {
        let double = FeedbackMap::total(|e, _| Action::Steps(vec![e.clone(), e.clone()]));
        let p = general_product(Alphabet::universal(), vec![unbounded()], vec![double.clone()], None).unwrap();
        assert!(p.eval(&Trace::repeat(&tick(), 1)).is_err());
        let p = multi_step_product(Alphabet::universal(), vec![unbounded()], vec![double], None).unwrap();
        for n in 0..20 {
            let w = Trace::repeat(&tick(), n);
            assert_eq!(p.eval(&w).unwrap(), Value::Tuple(vec![Value::Int(2 * n as i64)]));
        }
    }

    #[test]
    fn empty_sequence_is_hold() {
        let none = FeedbackMap::total(|_, _| Action::Steps(Vec::new()));
        let p = multi_step_product(Alphabet::universal(), vec![counter(3)], vec![none], None).unwrap();
        assert_eq!(p.eval(&Trace::repeat(&tick(), 7)).unwrap(), Value::Tuple(vec![Value::Int(0)]));
    }

    #[test]
    fn initial_driver_traces_preload_components() {
        let p = general_product(
            Alphabet::universal(),
            vec![unbounded()],
            vec![FeedbackMap::pass_through()],
            Some(vec![Trace::repeat(&tick(), 5)]),
        )
        .unwrap();
        assert_eq!(p.eval(&Trace::new()).unwrap(), Value::Tuple(vec![Value::Int(5)]));
        assert_eq!(p.to_machine().unwrap().run(&Trace::new()).unwrap(), Value::Tuple(vec![Value::Int(5)]));
    }

    #[test]
    fn constructor_arity_checks() {
        assert!(general_product(Alphabet::universal(), vec![], vec![], None).is_err());
        assert!(general_product(Alphabet::universal(), vec![counter(2)], vec![], None).is_err());
        assert!(
            general_product(Alphabet::universal(), vec![counter(2)], vec![FeedbackMap::hold()], Some(vec![]))
                .is_err()
        );
    }

    #[test]
    fn cascade_maps_see_only_their_suffix() {
        let widths = Arc::new(std::sync::Mutex::new(Vec::new()));
        let probe = |w: Arc<std::sync::Mutex<Vec<usize>>>| {
            FeedbackMap::total(move |_, outs| {
                w.lock().unwrap().push(outs.len());
                Action::Hold
            })
        };
        let p = cascade_product(
            Alphabet::universal(),
            vec![counter(2), counter(2), counter(2)],
            vec![probe(widths.clone()), probe(widths.clone()), probe(widths.clone())],
        )
        .unwrap();
        p.eval(&Trace::repeat(&tick(), 1)).unwrap();
        assert_eq!(*widths.lock().unwrap(), vec![3, 2, 1]);
    }

    #[test]
    fn shift_register_examples() {
        let r = shift_register(3).unwrap();
        assert_eq!(r.eval(&ins(&["a", "b", "c", "d"])).unwrap(), syms(&["d", "c", "b"]));
        assert_eq!(r.eval(&Trace::new()).unwrap(), Value::Tuple(vec![Value::NullV; 3]));
        let one = shift_register(1).unwrap();
        assert_eq!(one.eval(&ins(&["a", "b"])).unwrap(), syms(&["b"]));
    }

    #[test]
    fn bidirectional_register_examples() {
        let r = bidirectional_register(3).unwrap();
        let load: Trace = ["c", "b", "a"].iter().map(|v| shift_event(1, Value::sym(v))).collect();
        assert_eq!(r.eval(&load).unwrap(), syms(&["a", "b", "c"]));
        assert_eq!(r.eval(&load.append(shift_event(1, Value::sym("x")))).unwrap(), syms(&["x", "a", "b"]));
        assert_eq!(r.eval(&load.append(shift_event(-1, Value::sym("x")))).unwrap(), syms(&["b", "c", "x"]));

        let one = bidirectional_register(1).unwrap();
        let w: Trace = [shift_event(1, Value::sym("x")), shift_event(-1, Value::sym("y"))].into_iter().collect();
        assert_eq!(one.eval(&w.prefix(1)).unwrap(), syms(&["x"]));
        assert_eq!(one.eval(&w).unwrap(), syms(&["y"]));
    }

    #[test]
    fn bidirectional_register_rejects_bad_direction() {
        let r = bidirectional_register(2).unwrap();
        let w = Trace::from_events(vec![shift_event(2, Value::sym("x"))]);
        let err = r.eval(&w).unwrap_err();
        assert!(matches!(err.fault(), Some(Fault::InvalidEvent { .. })));
        assert!(r.to_machine().unwrap().run(&w).is_err());
    }

    #[test]
    fn unbounded_component_is_not_finite_state() {
        let p = general_product(Alphabet::universal(), vec![unbounded()], vec![FeedbackMap::pass_through()], None)
            .unwrap();
        let report = is_finite_state(&p, &[tick()], 1000).unwrap();
        assert!(!report.complete);
        assert_eq!(report.reachable_states, 1000);
        assert_eq!(report.minimized_states, None);
    }

    proptest! {
        #[test]
        fn singleton_sequences_match_single_steps(n in 0usize..40, c in 1i64..6) {
            let carry = move |e: &Event, outs: &[Value]| -> Option<Event> {
                (outs[1].as_int() == Some(c - 1)).then(|| e.clone())
            };
            let single = general_product(
                Alphabet::universal(),
                vec![counter(c), counter(c)],
                vec![FeedbackMap::total(move |e, o| carry(e, o).into()), FeedbackMap::pass_through()],
                None,
            ).unwrap();
            let multi = multi_step_product(
                Alphabet::universal(),
                vec![counter(c), counter(c)],
                vec![
                    FeedbackMap::total(move |e, o| Action::Steps(carry(e, o).into_iter().collect())),
                    FeedbackMap::total(|e, _| Action::Steps(vec![e.clone()])),
                ],
                None,
            ).unwrap();
            let w = Trace::repeat(&tick(), n);
            prop_assert_eq!(single.eval(&w).unwrap(), multi.eval(&w).unwrap());
        }
    }
}
