use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{node_variable, Behavior, Message, NodeEvent, NodeState, ScheduleEntry};
use crate::alphabet::Alphabet;
use crate::error::{Fault, Result as CalcResult};
use crate::product::{multi_step_product, Action, FeedbackMap, ProductVariable};
use crate::value::{Event, Symbol, Trace, Value};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("a network needs at least one node")]
    Empty,
    #[error("duplicate node name {0}")]
    DuplicateName(Symbol),
    #[error("unknown node {0}")]
    UnknownNode(Symbol),
    #[error("{0} is scheduled to transmit but holds nullm")]
    NothingToSend(Symbol),
    #[error("{0} is scheduled to receive but no node transmits")]
    SpuriousReceive(Symbol),
    #[error("{0} is scheduled for more than one event in a step")]
    Overlap(Symbol),
    #[error("{node} chose {event} as a local action")]
    NotLocal { node: Symbol, event: NodeEvent },
    #[error("data {id} originated by {node} was already originated by {first}")]
    ReusedSequence { id: u64, node: Symbol, first: Symbol },
    #[error("data {0} appears more than once in the data plan")]
    DuplicatePlan(u64),
}

/// Data `id` becomes available to `origin` from step `earliest` on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataPlanEntry {
    pub origin: Symbol,
    pub id: u64,
    #[serde(default)]
    pub earliest: u64,
}

#[derive(Clone)]
struct Node {
    trace: Vec<NodeEvent>,
    state: NodeState,
    behavior: Arc<dyn Behavior>,
}

impl fmt::Debug for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Node").field("state", &self.state).field("behavior", &self.behavior).finish()
    }
}

/// Local traces `u_n` and what has happened on the network so far.
#[derive(Clone, Debug)]
pub struct NetworkState {
    nodes: BTreeMap<Symbol, Node>,
    plan: Vec<DataPlanEntry>,
    originated: BTreeMap<u64, Symbol>,
    first_tx: BTreeMap<Message, Symbol>,
    step_count: u64,
}

/// The event each node appended in one step.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub appended: BTreeMap<Symbol, NodeEvent>,
    /// The message carried by this step's `tx`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sent: Option<Message>,
}

impl NetworkState {
    /// Every `u_n` starts as `nulls.n`.
    pub fn new(behaviors: Vec<(Symbol, Arc<dyn Behavior>)>) -> Result<Self, NetError> {
        if behaviors.is_empty() {
            return Err(NetError::Empty);
        }
        let mut nodes = BTreeMap::new();
        for (name, behavior) in behaviors {
            if nodes.contains_key(&name) {
                return Err(NetError::DuplicateName(name));
            }
            let first = NodeEvent::Name(name.clone());
            let state = NodeState::default().after(&first);
            nodes.insert(name, Node { trace: vec![first], state, behavior });
        }
        Ok(NetworkState {
            nodes,
            plan: Vec::new(),
            originated: BTreeMap::new(),
            first_tx: BTreeMap::new(),
            step_count: 0,
        })
    }

    pub fn with_plan(mut self, plan: Vec<DataPlanEntry>) -> Result<Self, NetError> {
        let mut ids = BTreeSet::new();
        for p in &plan {
            self.known(&p.origin)?;
            if !ids.insert(p.id) {
                return Err(NetError::DuplicatePlan(p.id));
            }
        }
        self.plan = plan;
        Ok(self)
    }

    pub fn names(&self) -> impl Iterator<Item = &Symbol> {
        self.nodes.keys()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, name: &str) -> Option<&NodeState> {
        self.nodes.get(name).map(|n| &n.state)
    }

    pub fn states(&self) -> impl Iterator<Item = (&Symbol, &NodeState)> {
        self.nodes.iter().map(|(k, n)| (k, &n.state))
    }

    /// `u_n`
    pub fn trace(&self, name: &str) -> Option<&[NodeEvent]> {
        self.nodes.get(name).map(|n| n.trace.as_slice())
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn plan(&self) -> &[DataPlanEntry] {
        &self.plan
    }

    /// Which node first transmitted each message.
    pub fn first_transmitters(&self) -> &BTreeMap<Message, Symbol> {
        &self.first_tx
    }

    pub fn originated(&self) -> &BTreeMap<u64, Symbol> {
        &self.originated
    }

    /// Planned data `name` may originate now, lowest id first.
    pub fn offered(&self, name: &str) -> Vec<u64> {
        let mut ids: Vec<u64> = self
            .plan
            .iter()
            .filter(|p| &*p.origin == name && p.earliest <= self.step_count && !self.originated.contains_key(&p.id))
            .map(|p| p.id)
            .collect();
        ids.sort_unstable();
        ids
    }

    fn known(&self, name: &Symbol) -> Result<(), NetError> {
        if self.nodes.contains_key(name) {
            Ok(())
        } else {
            Err(NetError::UnknownNode(name.clone()))
        }
    }

    /// Check a schedule entry against the current state without applying it.
    pub fn validate(&self, entry: &ScheduleEntry) -> Result<(), NetError> {
        let mut seen = BTreeSet::new();
        let all = entry.local.iter().chain(&entry.transmitter).chain(&entry.receivers);
        for n in all {
            self.known(n)?;
            if !seen.insert(n) {
                return Err(NetError::Overlap(n.clone()));
            }
        }
        match &entry.transmitter {
            Some(tx) if self.nodes[tx].state.t.is_none() => Err(NetError::NothingToSend(tx.clone())),
            None => match entry.receivers.iter().next() {
                Some(r) => Err(NetError::SpuriousReceive(r.clone())),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    fn local_events(&self, entry: &ScheduleEntry) -> Result<BTreeMap<Symbol, NodeEvent>, NetError> {
        let mut events = BTreeMap::new();
        let mut claimed = BTreeMap::new();
        for name in &entry.local {
            let node = &self.nodes[name];
            let Some(e) = node.behavior.choose(&node.state, &self.offered(name)) else { continue };
            match &e {
                NodeEvent::Originate(id) => {
                    let first = self.originated.get(id).or_else(|| claimed.get(id).copied());
                    if let Some(first) = first {
                        return Err(NetError::ReusedSequence { id: *id, node: name.clone(), first: first.clone() });
                    }
                    claimed.insert(*id, name);
                }
                NodeEvent::Select(_) => {}
                _ => return Err(NetError::NotLocal { node: name.clone(), event: e }),
            }
            events.insert(name.clone(), e);
        }
        Ok(events)
    }

    /// Apply one network step in place. On error the state is unchanged.
    pub fn apply(&mut self, entry: &ScheduleEntry) -> Result<StepOutcome, NetError> {
        self.validate(entry)?;
        let mut appended = self.local_events(entry)?;
        let mut sent = None;
        if let Some(tx) = &entry.transmitter {
            let m = self.nodes[tx].state.t.clone().expect("validated transmitter");
            sent = Some(m.clone());
            appended.insert(tx.clone(), NodeEvent::Tx);
            for r in &entry.receivers {
                appended.insert(r.clone(), NodeEvent::Rx(m.clone()));
            }
            self.first_tx.entry(m).or_insert_with(|| tx.clone());
        }
        for (name, e) in &appended {
            if let NodeEvent::Originate(id) = e {
                self.originated.insert(*id, name.clone());
            }
            let node = self.nodes.get_mut(name).expect("validated name");
            node.state.apply(e);
            node.trace.push(e.clone());
        }
        self.step_count += 1;
        Ok(StepOutcome { appended, sent })
    }

    /// The pure form of [`apply`](Self::apply).
    pub fn step(&self, entry: &ScheduleEntry) -> Result<(NetworkState, StepOutcome), NetError> {
        let mut next = self.clone();
        let outcome = next.apply(entry)?;
        Ok((next, outcome))
    }

    /// Append to `u_n` with no checks at all. Only for building fixtures
    /// that break the network axioms.
    pub fn force_append(&mut self, name: &str, e: NodeEvent) -> Result<(), NetError> {
        let node = self.nodes.get_mut(name).ok_or_else(|| NetError::UnknownNode(name.into()))?;
        node.state.apply(&e);
        node.trace.push(e);
        Ok(())
    }
}

/// `R` and `S` for every node.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivedSets {
    pub r: BTreeMap<Symbol, BTreeSet<Message>>,
    pub s: BTreeMap<Symbol, BTreeSet<Message>>,
}

/// Fold the `R`/`S` recursions over each local trace.
pub fn derived_sets(st: &NetworkState) -> DerivedSets {
    let mut out = DerivedSets::default();
    for (name, node) in &st.nodes {
        let fin = node.trace.iter().fold(NodeState::default(), |s, e| s.after(e));
        out.r.insert(name.clone(), fin.r);
        out.s.insert(name.clone(), fin.s);
    }
    out
}

/// A monitor's finding.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    /// `message ∈ R(node)` but no node has it in `S`.
    SpuriousMessage { node: Symbol, message: Message },
    /// `a(data, acker) ∈ R(node)` but `data ∉ R(acker)`.
    AckLemma { node: Symbol, data: u64, acker: Symbol },
    /// `node` commits `data` though `missing` never received it.
    SimpleCommit { node: Symbol, data: u64, missing: Symbol },
    /// `a(seq + k) ∈ R(node)` though `missing` never received `d(seq)`.
    CyclicCommit { node: Symbol, seq: u64, missing: Symbol },
    /// `a(seq)` was first sent by `sender`, not by `expected`.
    TurnOrder { seq: u64, sender: Symbol, expected: Symbol },
    /// `node` transmitted `message` without being permitted to.
    TransmitConstraint { node: Symbol, message: Message },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Ok,
    Violation(Violation),
}

impl Verdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, Verdict::Ok)
    }

    pub fn violation(&self) -> Option<&Violation> {
        match self {
            Verdict::Ok => None,
            Verdict::Violation(v) => Some(v),
        }
    }
}

impl From<Option<Violation>> for Verdict {
    fn from(v: Option<Violation>) -> Self {
        v.map_or(Verdict::Ok, Verdict::Violation)
    }
}

/// `m ∈ R(n1) -> (∃ n2) m ∈ S(n2)`
pub fn check_no_spurious(st: &NetworkState) -> Verdict {
    let sent: BTreeSet<&Message> = st.states().flat_map(|(_, s)| &s.s).collect();
    st.states()
        .find_map(|(n, s)| {
            s.r.iter()
                .find(|m| !sent.contains(m))
                .map(|m| Violation::SpuriousMessage { node: n.clone(), message: m.clone() })
        })
        .into()
}

fn event_value(e: &Event) -> Value {
    let mut parts = vec![Value::Sym(e.name.clone())];
    parts.extend(e.payload.clone());
    Value::Seq(parts)
}

fn value_event(v: &Value) -> Option<Event> {
    match v {
        Value::Seq(parts) => match parts.as_slice() {
            [Value::Sym(n)] => Some(Event::new(n)),
            [Value::Sym(n), p] => Some(Event::with(n, p.clone())),
            _ => None,
        },
        _ => None,
    }
}

/// One network step as an outer event of [`network_product`].
pub fn network_event(outcome: &StepOutcome) -> Event {
    Event::with(
        "step",
        Value::Map(
            outcome.appended.iter().map(|(n, e)| (Value::Sym(n.clone()), event_value(&e.to_event()))).collect(),
        ),
    )
}

/// The network as a multi-step product of [`node_variable`]s. Component `i`
/// is the `i`-th name in sorted order; each starts from `nulls.n`. Feedback
/// forwards each node's appended event and rejects any `rx[m]` that no
/// transmitter holding `m` accompanies.
pub fn network_product(names: &[Symbol]) -> CalcResult<ProductVariable> {
    let mut names = names.to_vec();
    names.sort();
    let index: Arc<BTreeMap<Symbol, usize>> = Arc::new(names.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect());
    let feedback = names
        .iter()
        .map(|name| {
            let me = Value::Sym(name.clone());
            let index = Arc::clone(&index);
            FeedbackMap::new(move |e, outs| {
                let step = e.payload.as_ref().and_then(Value::as_map).ok_or_else(|| Fault::InvalidEvent {
                    event: e.clone(),
                    reason: "expected a step map".into(),
                })?;
                let Some(mine) = step.get(&me) else { return Ok(Action::Hold) };
                let ev = value_event(mine).ok_or_else(|| Fault::type_error("event", mine))?;
                if let Some(NodeEvent::Rx(m)) = NodeEvent::from_event(&ev) {
                    let paired = step.iter().any(|(n, x)| {
                        value_event(x).is_some_and(|x| x.is("tx"))
                            && match n {
                                Value::Sym(n) => index.get(n),
                                _ => None,
                            }.is_some_and(|&j| {
                                NodeState::from_value(&outs[j]).is_some_and(|s| s.t.as_ref() == Some(&m))
                            })
                    });
                    if !paired {
                        return Err(Fault::InvalidEvent { event: ev, reason: "receive without a matching transmit".into() });
                    }
                }
                Ok(Action::Steps(vec![ev]))
            })
        })
        .collect();
    let initial = names.iter().map(|n| Trace::from_events(vec![NodeEvent::Name(n.clone()).to_event()])).collect();
    multi_step_product(Alphabet::universal(), vec![node_variable(); names.len()], feedback, Some(initial))
}
