//! Minimization, equivalence, and bounded Nerode partitions.
//!
//! Minimization is Moore-style refinement on the reachable state space: split
//! by output, then split by the classes of successors until stable. The
//! quotient is the machine whose states are the classes of `~f` restricted
//! to words over the exploration basis.

use std::collections::{HashMap, VecDeque};
use std::hash::Hash;
use std::sync::Arc;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use crate::alphabet::Alphabet;
use crate::error::{Error, Fault, Result};
use crate::machine::{check_basis, reachable, Machine};
use crate::value::{Event, Trace, Value};

/// Disjoint classes covering a set of elements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition<T: Hash + Eq> {
    classes: Vec<Vec<T>>,
    class_of: HashMap<T, usize>,
}

impl<T: Hash + Eq + Clone> Partition<T> {
    /// Panics if the classes are not pairwise disjoint.
    pub fn from_classes(classes: Vec<Vec<T>>) -> Self {
        let mut class_of = HashMap::new();
        for (i, class) in classes.iter().enumerate() {
            for x in class {
                let prev = class_of.insert(x.clone(), i);
                assert!(prev.is_none(), "element appears in two classes");
            }
        }
        Partition { classes, class_of }
    }

    /// Group `items` by `key`, classes numbered by first appearance.
    pub fn group_by<K: Hash + Eq>(items: impl IntoIterator<Item = T>, key: impl Fn(&T) -> K) -> Self {
        let mut ids: HashMap<K, usize> = HashMap::new();
        let mut classes: Vec<Vec<T>> = Vec::new();
        for x in items {
            let next = ids.len();
            let id = *ids.entry(key(&x)).or_insert(next);
            if id == classes.len() {
                classes.push(Vec::new());
            }
            classes[id].push(x);
        }
        Partition::from_classes(classes)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[Vec<T>] {
        &self.classes
    }

    pub fn class_of(&self, x: &T) -> Option<usize> {
        self.class_of.get(x).copied()
    }

    pub fn same_class(&self, a: &T, b: &T) -> bool {
        matches!((self.class_of(a), self.class_of(b)), (Some(x), Some(y)) if x == y)
    }

    /// Every class of `self` lies inside a class of `coarser`.
    pub fn refines(&self, coarser: &Partition<T>) -> bool {
        self.classes.iter().all(|class| {
            let mut ids = class.iter().map(|x| coarser.class_of(x));
            match ids.next() {
                Some(first @ Some(_)) => ids.all(|id| id == first),
                Some(None) => false,
                None => true,
            }
        })
    }
}

impl<T: Hash + Eq + Serialize> Serialize for Partition<T> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a, T> {
            classes: &'a [Vec<T>],
        }
        Repr { classes: &self.classes }.serialize(serializer)
    }
}

impl<'de, T: Hash + Eq + Clone + Deserialize<'de>> Deserialize<'de> for Partition<T> {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr<T> {
            classes: Vec<Vec<T>>,
        }
        let repr = Repr::<T>::deserialize(deserializer)?;
        let total: usize = repr.classes.iter().map(Vec::len).sum();
        let p = Partition::from_classes_checked(repr.classes)
            .ok_or_else(|| serde::de::Error::custom("classes overlap"))?;
        debug_assert_eq!(p.class_of.len(), total);
        Ok(p)
    }
}

impl<T: Hash + Eq + Clone> Partition<T> {
    fn from_classes_checked(classes: Vec<Vec<T>>) -> Option<Self> {
        let mut class_of = HashMap::new();
        for (i, class) in classes.iter().enumerate() {
            for x in class {
                if class_of.insert(x.clone(), i).is_some() {
                    return None;
                }
            }
        }
        Some(Partition { classes, class_of })
    }
}

/// An explicit finite machine over a finite basis: states are `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteMachine {
    pub basis: Vec<Event>,
    pub initial: usize,
    /// `outputs[s]` is the output of state `s`.
    pub outputs: Vec<Value>,
    /// `transitions[s][k]` is the successor of `s` on `basis[k]`.
    pub transitions: Vec<Vec<usize>>,
}

impl FiniteMachine {
    pub fn state_count(&self) -> usize {
        self.outputs.len()
    }

    /// The table as a rule-based machine with states `Int(0..n)`, over the
    /// finite alphabet `basis`.
    pub fn to_machine(&self) -> Machine {
        let index: HashMap<Event, usize> =
            self.basis.iter().enumerate().map(|(k, e)| (e.clone(), k)).collect();
        let transitions = Arc::new(self.transitions.clone());
        let outputs = Arc::new(self.outputs.clone());
        Machine::new(
            Alphabet::finite(&self.basis),
            Value::Int(self.initial as i64),
            Arc::new(move |s, e| {
                let k = *index.get(e).ok_or_else(|| Fault::OutsideAlphabet(e.clone()))?;
                let s = s.as_int().ok_or_else(|| Fault::type_error("state index", s))? as usize;
                Ok(Value::Int(transitions[s][k] as i64))
            }),
            Arc::new(move |s| outputs[s.as_int().unwrap_or_default() as usize].clone()),
        )
    }

    /// Tabulate the reachable part of `m` over `basis`.
    pub fn tabulate(m: &Machine, basis: &[Event], max_states: usize) -> Result<FiniteMachine> {
        let r = reachable(m, basis, max_states)?;
        if !r.complete {
            return Err(Error::Incomplete { bound: max_states, explored: r.len() });
        }
        let transitions = successor_table(m, &r.states, basis)?;
        Ok(FiniteMachine {
            basis: basis.to_vec(),
            initial: 0,
            outputs: r.states.iter().map(|s| m.out(s)).collect(),
            transitions,
        })
    }
}

fn successor_table(m: &Machine, states: &IndexSet<Value>, basis: &[Event]) -> Result<Vec<Vec<usize>>> {
    states
        .iter()
        .map(|s| {
            basis
                .iter()
                .map(|e| {
                    let next = m.step_state(s, e).map_err(|f| f.at(0))?;
                    Ok(states.get_index_of(&next).expect("closure is complete"))
                })
                .collect()
        })
        .collect()
}

/// The quotient of a machine by output-indistinguishability.
#[derive(Clone, Debug)]
pub struct Minimized {
    pub machine: Machine,
    pub table: FiniteMachine,
    /// Classes of the original reachable states; class `i` is state `i` of
    /// `table`.
    pub partition: Partition<Value>,
}

impl Minimized {
    pub fn state_count(&self) -> usize {
        self.table.state_count()
    }
}

/// Moore refinement over `succ`, starting from the split by `outputs`.
/// Returns a class id per state, numbered by first appearance.
fn refine(outputs: &[Value], succ: &[Vec<usize>]) -> Vec<usize> {
    let renumber = |keys: Vec<Vec<usize>>| -> (Vec<usize>, usize) {
        let mut ids: HashMap<Vec<usize>, usize> = HashMap::new();
        let class = keys
            .into_iter()
            .map(|k| {
                let next = ids.len();
                *ids.entry(k).or_insert(next)
            })
            .collect();
        (class, ids.len())
    };
    let mut out_ids: HashMap<&Value, usize> = HashMap::new();
    let mut class: Vec<usize> = outputs
        .iter()
        .map(|o| {
            let next = out_ids.len();
            *out_ids.entry(o).or_insert(next)
        })
        .collect();
    let mut count = out_ids.len();
    loop {
        let keys = (0..class.len())
            .map(|s| {
                let mut key = Vec::with_capacity(succ[s].len() + 1);
                key.push(class[s]);
                key.extend(succ[s].iter().map(|&t| class[t]));
                key
            })
            .collect();
        let (next, next_count) = renumber(keys);
        class = next;
        if next_count == count {
            return class;
        }
        count = next_count;
    }
}

/// Minimize `m` over the finite `basis`. The reachable closure must complete
/// within `max_states`.
pub fn minimize(m: &Machine, basis: &[Event], max_states: usize) -> Result<Minimized> {
    let r = reachable(m, basis, max_states)?;
    if !r.complete {
        return Err(Error::Incomplete { bound: max_states, explored: r.len() });
    }
    let succ = successor_table(m, &r.states, basis)?;
    let outputs: Vec<Value> = r.states.iter().map(|s| m.out(s)).collect();
    let class = refine(&outputs, &succ);
    let count = class.iter().max().map_or(0, |c| c + 1);

    let mut reps = vec![usize::MAX; count];
    let mut classes: Vec<Vec<Value>> = vec![Vec::new(); count];
    for (s, &c) in class.iter().enumerate() {
        if reps[c] == usize::MAX {
            reps[c] = s;
        }
        classes[c].push(r.states[s].clone());
    }
    let table = FiniteMachine {
        basis: basis.to_vec(),
        initial: class[0],
        outputs: reps.iter().map(|&s| outputs[s].clone()).collect(),
        transitions: reps.iter().map(|&s| succ[s].iter().map(|&t| class[t]).collect()).collect(),
    };
    Ok(Minimized { machine: table.to_machine(), table, partition: Partition::from_classes(classes) })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Equivalence {
    Equivalent,
    /// A shortest trace on which the two machines disagree.
    Distinguished(Trace),
}

impl Equivalence {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Equivalence::Equivalent)
    }

    pub fn witness(&self) -> Option<&Trace> {
        match self {
            Equivalence::Distinguished(t) => Some(t),
            Equivalence::Equivalent => None,
        }
    }
}

/// Decide `M1* = M2*` on words over `basis` by breadth-first search of the
/// reachable pair space. `max_states` bounds the number of explored pairs.
pub fn equivalent(m1: &Machine, m2: &Machine, basis: &[Event], max_states: usize) -> Result<Equivalence> {
    if max_states == 0 {
        return Err(Error::InvalidParameter("max_states must be at least 1".into()));
    }
    check_basis(m1, basis)?;
    check_basis(m2, basis)?;
    let mut pairs: IndexSet<(Value, Value)> = IndexSet::new();
    let mut parent: Vec<Option<(usize, usize)>> = Vec::new();
    let witness = |parent: &[Option<(usize, usize)>], mut ix: usize| {
        let mut events = Vec::new();
        while let Some((p, k)) = parent[ix] {
            events.push(basis[k].clone());
            ix = p;
        }
        events.reverse();
        Trace::from_events(events)
    };

    let start = (m1.initial().clone(), m2.initial().clone());
    if m1.out(&start.0) != m2.out(&start.1) {
        return Ok(Equivalence::Distinguished(Trace::new()));
    }
    pairs.insert(start);
    parent.push(None);
    let mut frontier = VecDeque::from([0usize]);
    while let Some(ix) = frontier.pop_front() {
        let (s1, s2) = pairs[ix].clone();
        for (k, e) in basis.iter().enumerate() {
            let t1 = m1.step_state(&s1, e).map_err(|f| f.at(0))?;
            let t2 = m2.step_state(&s2, e).map_err(|f| f.at(0))?;
            let pair = (t1, t2);
            if pairs.contains(&pair) {
                continue;
            }
            let differs = m1.out(&pair.0) != m2.out(&pair.1);
            if differs {
                let mut w = witness(&parent, ix);
                w.push(e.clone());
                return Ok(Equivalence::Distinguished(w));
            }
            if pairs.len() == max_states {
                return Err(Error::Incomplete { bound: max_states, explored: pairs.len() });
            }
            pairs.insert(pair);
            parent.push(Some((ix, k)));
            frontier.push_back(pairs.len() - 1);
        }
    }
    Ok(Equivalence::Equivalent)
}

/// All words over `basis` of length `0..=max_len`, shortest first, and in
/// basis order within a length.
pub fn words_up_to(basis: &[Event], max_len: usize) -> Vec<Trace> {
    let mut all = vec![Trace::new()];
    let mut layer = vec![Trace::new()];
    for _ in 0..max_len {
        if basis.is_empty() {
            break;
        }
        layer = layer.iter().flat_map(|w| basis.iter().map(move |e| w.append(e.clone()))).collect();
        all.extend(layer.iter().cloned());
    }
    all
}

/// Approximate `~f` for a black-box `f`: words of length at most `word_len`
/// are grouped by the values of `f` on all continuations of length at most
/// `distinguisher_len`.
pub fn nerode_classes_bounded<F>(
    f: F,
    basis: &[Event],
    word_len: usize,
    distinguisher_len: usize,
) -> Partition<Trace>
where
    F: Fn(&Trace) -> Value,
{
    let continuations = words_up_to(basis, distinguisher_len);
    let words = words_up_to(basis, word_len);
    Partition::group_by(words, |w| continuations.iter().map(|u| f(&w.concat(u))).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::tests::{mod_counter_machine, unbounded_counter_machine};

    fn tick() -> Event {
        Event::new("tick")
    }

    fn ab() -> Vec<Event> {
        vec![Event::new("a"), Event::new("b")]
    }

    #[test]
    fn mod_counter_minimizes_to_three() {
        let min = minimize(&mod_counter_machine(3), &[tick()], 100).unwrap();
        assert_eq!(min.state_count(), 3);
        assert_eq!(min.partition.len(), 3);
    }

    #[test]
    fn duplicated_states_merge() {
        // mod-6 counter observed through "value mod 3": states k and k+3 are
        // indistinguishable
        let m = Machine::from_rules(
            crate::alphabet::Alphabet::universal(),
            Value::Int(0),
            |s, _| Value::Int((s.as_int().unwrap() + 1) % 6),
            |s| Value::Int(s.as_int().unwrap() % 3),
        );
        let min = minimize(&m, &[tick()], 100).unwrap();
        assert_eq!(min.state_count(), 3);
        assert!(min.partition.same_class(&Value::Int(1), &Value::Int(4)));
        assert!(equivalent(&m, &min.machine, &[tick()], 100).unwrap().is_equivalent());
    }

    #[test]
    fn one_state_machine_is_already_minimal() {
        let m = mod_counter_machine(1);
        let min = minimize(&m, &[tick()], 10).unwrap();
        assert_eq!(min.state_count(), 1);
        assert_eq!(min.table.transitions, vec![vec![0]]);
        assert_eq!(min.table.outputs, vec![Value::Int(0)]);
    }

    #[test]
    fn minimize_reports_incompleteness() {
        let err = minimize(&unbounded_counter_machine(), &[tick()], 50).unwrap_err();
        assert_eq!(err, Error::Incomplete { bound: 50, explored: 50 });
    }

    #[test]
    fn partition_classes_are_stable_under_successors() {
        let m = Machine::from_rules(
            crate::alphabet::Alphabet::universal(),
            Value::Int(0),
            |s, e| {
                let s = s.as_int().unwrap();
                Value::Int(if e.is("a") { (s + 1) % 6 } else { (s * 2) % 6 })
            },
            |s| Value::Bool(s.as_int().unwrap() % 2 == 0),
        );
        let basis = ab();
        let min = minimize(&m, &basis, 100).unwrap();
        for class in min.partition.classes() {
            for x in class {
                assert_eq!(m.out(x), m.out(&class[0]));
                for e in &basis {
                    let tx = m.step_state(x, e).unwrap();
                    let t0 = m.step_state(&class[0], e).unwrap();
                    assert!(min.partition.same_class(&tx, &t0));
                }
            }
        }
    }

    #[test]
    fn mod3_vs_mod4_shortest_witness_has_length_three() {
        let eq = equivalent(&mod_counter_machine(3), &mod_counter_machine(4), &[tick()], 100).unwrap();
        assert_eq!(eq.witness().map(Trace::len), Some(3));
    }

    #[test]
    fn equivalence_is_reflexive() {
        let m = mod_counter_machine(5);
        assert!(equivalent(&m, &m, &[tick()], 100).unwrap().is_equivalent());
    }

    #[test]
    fn equivalent_distinguishes_unbounded_machines_without_exhausting() {
        let eq = equivalent(&unbounded_counter_machine(), &mod_counter_machine(7), &[tick()], 100).unwrap();
        assert_eq!(eq.witness().map(Trace::len), Some(7));
        let err = equivalent(&unbounded_counter_machine(), &unbounded_counter_machine(), &[tick()], 20)
            .unwrap_err();
        assert!(matches!(err, Error::Incomplete { bound: 20, .. }));
    }

    #[test]
    fn witness_ties_break_by_basis_order() {
        // outputs differ after "a" and after "b"; "a" comes first
        let m1 = Machine::from_rules(
            crate::alphabet::Alphabet::universal(),
            Value::Int(0),
            |_, e| Value::Int(if e.is("a") { 1 } else { 2 }),
            |s| s.clone(),
        );
        let m2 = Machine::from_rules(
            crate::alphabet::Alphabet::universal(),
            Value::Int(0),
            |_, _| Value::Int(3),
            |s| s.clone(),
        );
        let eq = equivalent(&m1, &m2, &ab(), 100).unwrap();
        assert_eq!(eq.witness().unwrap(), &Trace::from_events(vec![Event::new("a")]));
        // output differs immediately
        let m3 = m2.with_initial(Value::Int(9));
        assert_eq!(equivalent(&m1, &m3, &ab(), 10).unwrap().witness(), Some(&Trace::new()));
    }

    #[test]
    fn table_round_trips_through_json() {
        let min = minimize(&mod_counter_machine(3), &[tick()], 100).unwrap();
        let text = serde_json::to_string(&min.table).unwrap();
        let back: FiniteMachine = serde_json::from_str(&text).unwrap();
        assert_eq!(back, min.table);
        let p: Partition<Value> =
            serde_json::from_str(&serde_json::to_string(&min.partition).unwrap()).unwrap();
        assert_eq!(p, min.partition);
    }

    #[test]
    fn words_enumerate_length_lex() {
        let ws = words_up_to(&ab(), 2);
        assert_eq!(ws.len(), 1 + 2 + 4);
        assert_eq!(ws[0], Trace::new());
        assert_eq!(ws[3].to_string(), "<a, a>");
        assert_eq!(ws[6].to_string(), "<b, b>");
    }

    /// Brute-force grouping of words by their full continuation table,
    /// written independently of `nerode_classes_bounded`.
    fn brute_force_class_count(f: impl Fn(usize) -> i64, word_len: usize, dist_len: usize) -> usize {
        let mut sigs: Vec<Vec<i64>> = Vec::new();
        for n in 0..=word_len {
            let sig: Vec<i64> = (0..=dist_len).map(|k| f(n + k)).collect();
            if !sigs.contains(&sig) {
                sigs.push(sig);
            }
        }
        sigs.len()
    }

    #[test]
    fn length_mod_three_has_three_classes() {
        let f = |w: &Trace| Value::Int(w.len() as i64 % 3);
        let p = nerode_classes_bounded(f, &[tick()], 4, 3);
        assert_eq!(p.len(), brute_force_class_count(|n| n as i64 % 3, 4, 3));
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn depth_zero_groups_by_value() {
        let f = |w: &Trace| Value::Int(w.iter().filter(|e| e.is("a")).count() as i64 % 2);
        let p = nerode_classes_bounded(f, &ab(), 3, 0);
        let by_value = Partition::group_by(words_up_to(&ab(), 3), |w| f(w));
        assert_eq!(p, by_value);
    }

    #[test]
    fn constant_function_has_one_class() {
        let p = nerode_classes_bounded(|_| Value::Int(7), &ab(), 3, 3);
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn deeper_distinguishers_only_split() {
        let f = |w: &Trace| Value::Bool(w.events().ends_with(&[Event::new("a"), Event::new("b")]));
        let mut prev = nerode_classes_bounded(f, &ab(), 3, 0);
        for d in 1..=4 {
            let next = nerode_classes_bounded(f, &ab(), 3, d);
            assert!(next.refines(&prev));
            prev = next;
        }
    }
}
