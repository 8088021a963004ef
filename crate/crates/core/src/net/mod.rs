//! A broadcast network of nodes, each a state variable over its own local
//! trace. A network step appends at most one event to each node's trace;
//! receives are only ever paired with a transmit of the same message.

mod network;
mod schedule;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::alphabet::Alphabet;
use crate::error::Fault;
use crate::value::{Event, Symbol, Value};
use crate::variable::StateVariable;

pub use network::{
    check_no_spurious, derived_sets, network_event, network_product, DataPlanEntry, DerivedSets, NetError,
    NetworkState, StepOutcome, Verdict, Violation,
};
pub use schedule::{random_schedule, unbiased_below, ScheduleEntry, ScheduleRng};

/// An acknowledgement. `Of` names the data message and the acknowledging
/// node; `Seq` carries only a sequence number.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ack {
    Of { data: u64, node: Symbol },
    Seq(u64),
}

/// Data sorts before acks.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Message {
    Data(u64),
    Ack(Ack),
}

impl Message {
    pub fn ack_of(data: u64, node: impl Into<Symbol>) -> Message {
        Message::Ack(Ack::Of { data, node: node.into() })
    }

    pub fn ack_seq(i: u64) -> Message {
        Message::Ack(Ack::Seq(i))
    }

    pub fn is_data(&self) -> bool {
        matches!(self, Message::Data(_))
    }

    pub fn to_value(&self) -> Value {
        match self {
            Message::Data(i) => Value::Tuple(vec![Value::sym("d"), Value::Int(*i as i64)]),
            Message::Ack(Ack::Of { data, node }) => {
                Value::Tuple(vec![Value::sym("a"), Value::Int(*data as i64), Value::Sym(node.clone())])
            }
            Message::Ack(Ack::Seq(i)) => Value::Tuple(vec![Value::sym("a"), Value::Int(*i as i64)]),
        }
    }

    pub fn from_value(v: &Value) -> Option<Message> {
        let nat = |v: &Value| v.as_int().and_then(|i| u64::try_from(i).ok());
        match v.as_tuple()? {
            [Value::Sym(k), i] if &**k == "d" => Some(Message::Data(nat(i)?)),
            [Value::Sym(k), i] if &**k == "a" => Some(Message::ack_seq(nat(i)?)),
            [Value::Sym(k), d, Value::Sym(n)] if &**k == "a" => Some(Message::ack_of(nat(d)?, n.clone())),
            _ => None,
        }
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Message::Data(i) => write!(f, "d{i}"),
            Message::Ack(Ack::Of { data, node }) => write!(f, "a(d{data},{node})"),
            Message::Ack(Ack::Seq(i)) => write!(f, "a{i}"),
        }
    }
}

/// The node alphabet: `name` seeds the id, `tx` and `rx[m]` are network
/// events, `originate` and `select` are local.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeEvent {
    Name(Symbol),
    Tx,
    Rx(Message),
    /// Take ownership of a data message so it may be transmitted.
    Originate(u64),
    /// Set `T`; `None` is `nullm`.
    Select(Option<Message>),
}

impl NodeEvent {
    pub fn to_event(&self) -> Event {
        match self {
            NodeEvent::Name(n) => Event::with("name", Value::Sym(n.clone())),
            NodeEvent::Tx => Event::new("tx"),
            NodeEvent::Rx(m) => Event::with("rx", m.to_value()),
            NodeEvent::Originate(i) => Event::with("originate", Value::Int(*i as i64)),
            NodeEvent::Select(m) => Event::with("select", m.as_ref().map_or(Value::NullM, Message::to_value)),
        }
    }

    pub fn from_event(e: &Event) -> Option<NodeEvent> {
        let p = e.payload.as_ref();
        Some(match (&*e.name, p) {
            ("name", Some(Value::Sym(n))) => NodeEvent::Name(n.clone()),
            ("tx", None) => NodeEvent::Tx,
            ("rx", Some(m)) => NodeEvent::Rx(Message::from_value(m)?),
            ("originate", Some(i)) => NodeEvent::Originate(u64::try_from(i.as_int()?).ok()?),
            ("select", Some(Value::NullM)) => NodeEvent::Select(None),
            ("select", Some(m)) => NodeEvent::Select(Some(Message::from_value(m)?)),
            _ => return None,
        })
    }
}

impl fmt::Display for NodeEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeEvent::Name(n) => write!(f, "name[{n}]"),
            NodeEvent::Tx => f.write_str("tx"),
            NodeEvent::Rx(m) => write!(f, "rx[{m}]"),
            NodeEvent::Originate(i) => write!(f, "originate[{i}]"),
            NodeEvent::Select(Some(m)) => write!(f, "select[{m}]"),
            NodeEvent::Select(None) => f.write_str("select[nullm]"),
        }
    }
}

/// What a node knows after its local trace.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeState {
    pub id: Option<Symbol>,
    /// The message the node wants to transmit; `None` is `nullm`.
    pub t: Option<Message>,
    pub r: BTreeSet<Message>,
    pub s: BTreeSet<Message>,
    /// Data messages this node originated.
    pub own: BTreeSet<u64>,
}

impl NodeState {
    pub fn after(&self, e: &NodeEvent) -> NodeState {
        let mut next = self.clone();
        next.apply(e);
        next
    }

    pub fn apply(&mut self, e: &NodeEvent) {
        match e {
            NodeEvent::Name(n) => self.id = Some(n.clone()),
            NodeEvent::Tx => {
                if let Some(m) = &self.t {
                    self.s.insert(m.clone());
                }
            }
            NodeEvent::Rx(m) => {
                self.r.insert(m.clone());
            }
            NodeEvent::Originate(i) => {
                self.own.insert(*i);
            }
            NodeEvent::Select(m) => self.t = m.clone(),
        }
    }

    pub fn to_value(&self) -> Value {
        let set = |s: &BTreeSet<Message>| Value::Set(s.iter().map(Message::to_value).collect());
        Value::Tuple(vec![
            self.id.clone().map_or(Value::NullV, Value::Sym),
            self.t.as_ref().map_or(Value::NullM, Message::to_value),
            set(&self.r),
            set(&self.s),
            Value::Set(self.own.iter().map(|i| Value::Int(*i as i64)).collect()),
        ])
    }

    pub fn from_value(v: &Value) -> Option<NodeState> {
        let [id, t, r, s, own] = v.as_tuple()? else { return None };
        let messages = |v: &Value| match v {
            Value::Set(items) => items.iter().map(Message::from_value).collect::<Option<BTreeSet<_>>>(),
            _ => None,
        };
        Some(NodeState {
            id: match id {
                Value::NullV => None,
                Value::Sym(n) => Some(n.clone()),
                _ => return None,
            },
            t: match t {
                Value::NullM => None,
                m => Some(Message::from_value(m)?),
            },
            r: messages(r)?,
            s: messages(s)?,
            own: match own {
                Value::Set(items) => {
                    items.iter().map(|i| i.as_int().and_then(|i| u64::try_from(i).ok())).collect::<Option<_>>()?
                }
                _ => return None,
            },
        })
    }
}

/// The node as a state variable over its local events, valued in
/// `(Id, T, R, S, own)` tuples.
pub fn node_variable() -> StateVariable {
    StateVariable::define_fallible(Alphabet::universal(), NodeState::default().to_value(), |v, e| {
        let ev = NodeEvent::from_event(e)
            .ok_or_else(|| Fault::InvalidEvent { event: e.clone(), reason: "not a node event".into() })?;
        let st = NodeState::from_value(v).ok_or_else(|| Fault::type_error("node state", v))?;
        Ok(st.after(&ev).to_value())
    })
}

/// Chooses the local event a node takes when the schedule gives it a local
/// step. `offered` lists data the node may originate now, lowest first.
pub trait Behavior: fmt::Debug + Send + Sync {
    fn choose(&self, node: &NodeState, offered: &[u64]) -> Option<NodeEvent>;
}
