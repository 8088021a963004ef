//! Generalized Moore machines: `(E, X, S, ι, δ, λ)` with no finiteness
//! requirement on any component. States and outputs are [`Value`]s, so
//! exploration and partitioning only need structural equality.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use indexmap::IndexSet;

use crate::alphabet::Alphabet;
use crate::error::{Error, Fault, Result};
use crate::value::{Event, Trace, Value};

pub type StepFn = Arc<dyn Fn(&Value, &Event) -> Result<Value, Fault> + Send + Sync>;
pub type OutFn = Arc<dyn Fn(&Value) -> Value + Send + Sync>;

/// A deterministic machine given by rules. Cloning is cheap.
#[derive(Clone)]
pub struct Machine {
    alphabet: Alphabet,
    initial: Value,
    step: StepFn,
    out: OutFn,
}

impl fmt::Debug for Machine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Machine")
            .field("alphabet", &self.alphabet)
            .field("initial", &self.initial)
            .finish_non_exhaustive()
    }
}

impl Machine {
    pub fn new(alphabet: Alphabet, initial: Value, step: StepFn, out: OutFn) -> Self {
        Machine { alphabet, initial, step, out }
    }

    /// Build a machine from an infallible transition rule.
    pub fn from_rules(
        alphabet: Alphabet,
        initial: Value,
        step: impl Fn(&Value, &Event) -> Value + Send + Sync + 'static,
        out: impl Fn(&Value) -> Value + Send + Sync + 'static,
    ) -> Self {
        Machine::new(alphabet, initial, Arc::new(move |s, e| Ok(step(s, e))), Arc::new(out))
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn initial(&self) -> &Value {
        &self.initial
    }

    /// The same rules started from a different state.
    pub fn with_initial(&self, initial: Value) -> Machine {
        Machine { initial, ..self.clone() }
    }

    /// One application of the transition map.
    pub fn step_state(&self, state: &Value, e: &Event) -> Result<Value, Fault> {
        if !self.alphabet.contains(e) {
            return Err(Fault::OutsideAlphabet(e.clone()));
        }
        (self.step)(state, e)
    }

    pub fn out(&self, state: &Value) -> Value {
        (self.out)(state)
    }

    /// The state reached from `from` after consuming `events`; errors carry
    /// the index into `events`.
    pub fn advance<'a>(
        &self,
        from: &Value,
        events: impl IntoIterator<Item = &'a Event>,
    ) -> Result<Value> {
        let mut s = from.clone();
        for (i, e) in events.into_iter().enumerate() {
            s = self.step_state(&s, e).map_err(|f| f.at(i))?;
        }
        Ok(s)
    }

    /// `δ*(w)`
    pub fn state_after(&self, w: &Trace) -> Result<Value> {
        self.advance(&self.initial, w)
    }

    /// `M*(w) = λ(δ*(w))`
    pub fn run(&self, w: &Trace) -> Result<Value> {
        Ok(self.out(&self.state_after(w)?))
    }

    /// Outputs after every prefix of `w`, `|w| + 1` values.
    pub fn run_prefixes(&self, w: &Trace) -> Result<Vec<Value>> {
        let mut s = self.initial.clone();
        let mut outs = Vec::with_capacity(w.len() + 1);
        outs.push(self.out(&s));
        for (i, e) in w.iter().enumerate() {
            s = self.step_state(&s, e).map_err(|f| f.at(i))?;
            outs.push(self.out(&s));
        }
        Ok(outs)
    }
}

/// `M*(w)` as a free function.
pub fn run(m: &Machine, w: &Trace) -> Result<Value> {
    m.run(w)
}

pub fn step_state(m: &Machine, s: &Value, e: &Event) -> Result<Value, Fault> {
    m.step_state(s, e)
}

/// Result of a bounded breadth-first exploration.
#[derive(Clone, Debug)]
pub struct Reachable {
    /// Discovered states in breadth-first order; the initial state is first.
    pub states: IndexSet<Value>,
    /// True when the closure under the basis was reached within the bound.
    pub complete: bool,
}

impl Reachable {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

pub(crate) fn check_basis(m: &Machine, basis: &[Event]) -> Result<()> {
    match basis.iter().find(|e| !m.alphabet().contains(e)) {
        Some(e) => Err(Error::InvalidParameter(format!("basis event {e} is outside the alphabet"))),
        None => Ok(()),
    }
}

/// Breadth-first closure of the initial state under `basis`, stopping as
/// soon as a state beyond `max_states` would be added.
pub fn reachable(m: &Machine, basis: &[Event], max_states: usize) -> Result<Reachable> {
    if max_states == 0 {
        return Err(Error::InvalidParameter("max_states must be at least 1".into()));
    }
    check_basis(m, basis)?;
    let mut states = IndexSet::new();
    states.insert(m.initial().clone());
    let mut frontier = VecDeque::from([0usize]);
    while let Some(ix) = frontier.pop_front() {
        let s = states[ix].clone();
        for e in basis {
            let next = m.step_state(&s, e).map_err(|f| f.at(0))?;
            if states.contains(&next) {
                continue;
            }
            if states.len() == max_states {
                return Ok(Reachable { states, complete: false });
            }
            let (nix, _) = states.insert_full(next);
            frontier.push_back(nix);
        }
    }
    Ok(Reachable { states, complete: true })
}
