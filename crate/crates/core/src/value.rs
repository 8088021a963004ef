//! The value universe shared by machines, state variables and the simulator.
//!
//! Everything a machine can output, and every machine state, is a [`Value`].
//! Equality is structural; sets and maps are ordered containers so two values
//! built with different insertion orders compare equal and serialize
//! identically.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

/// A cheaply clonable, immutable name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: &str) -> Self {
        Symbol(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Deref for Symbol {
    type Target = str;

    fn deref(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for Symbol {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

impl From<String> for Symbol {
    fn from(s: String) -> Self {
        Symbol(Arc::from(s))
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for Symbol {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Symbol {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(Symbol::from(s))
    }
}

/// A tagged discrete value.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Value {
    Int(i64),
    Sym(Symbol),
    Bool(bool),
    Seq(Vec<Value>),
    Set(BTreeSet<Value>),
    #[serde(with = "map_as_pairs")]
    Map(BTreeMap<Value, Value>),
    Tuple(Vec<Value>),
    /// A sequence of events; the values of trace-valued variables.
    Trace(Trace),
    /// "No value at this position."
    NullV,
    /// "No message."
    NullM,
    /// Behavior deliberately left open.
    Unspecified,
}

impl Value {
    pub fn sym(name: &str) -> Self {
        Value::Sym(Symbol::new(name))
    }

    pub fn unit() -> Self {
        Value::Tuple(Vec::new())
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_tuple(&self) -> Option<&[Value]> {
        match self {
            Value::Tuple(items) => Some(items),
            _ => None,
        }
    }

    pub fn as_trace(&self) -> Option<&Trace> {
        match self {
            Value::Trace(t) => Some(t),
            _ => None,
        }
    }

    pub fn as_map(&self) -> Option<&BTreeMap<Value, Value>> {
        match self {
            Value::Map(m) => Some(m),
            _ => None,
        }
    }

    pub fn is_unspecified(&self) -> bool {
        matches!(self, Value::Unspecified)
    }

    /// Tuple component `i`, if this is a tuple long enough.
    pub fn component(&self, i: usize) -> Option<&Value> {
        self.as_tuple().and_then(|t| t.get(i))
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<Symbol> for Value {
    fn from(s: Symbol) -> Self {
        Value::Sym(s)
    }
}

impl From<Trace> for Value {
    fn from(t: Trace) -> Self {
        Value::Trace(t)
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn write_joined<T: fmt::Display>(
    f: &mut fmt::Formatter<'_>,
    open: &str,
    items: impl IntoIterator<Item = T>,
    close: &str,
) -> fmt::Result {
    f.write_str(open)?;
    for (i, item) in items.into_iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{item}")?;
    }
    f.write_str(close)
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Sym(s) => write!(f, "{s}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Seq(items) => write_joined(f, "[", items, "]"),
            Value::Set(items) => write_joined(f, "{", items, "}"),
            Value::Map(m) => write_joined(f, "{", m.iter().map(|(k, v)| format!("{k}↦{v}")), "}"),
            Value::Tuple(items) => write_joined(f, "(", items, ")"),
            Value::Trace(t) => write!(f, "{t}"),
            Value::NullV => f.write_str("nullv"),
            Value::NullM => f.write_str("nullm"),
            Value::Unspecified => f.write_str("unspecified"),
        }
    }
}

mod map_as_pairs {
    use super::*;

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<Value, Value>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(map.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<BTreeMap<Value, Value>, D::Error> {
        let pairs: Vec<(Value, Value)> = Vec::deserialize(deserializer)?;
        let len = pairs.len();
        let map: BTreeMap<_, _> = pairs.into_iter().collect();
        if map.len() != len {
            return Err(de::Error::custom("duplicate key in map"));
        }
        Ok(map)
    }
}

/// A symbolic event: a name with an optional payload. `enq[v]` is
/// `Event { name: "enq", payload: Some(v) }`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Event {
    pub name: Symbol,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Value>,
}

impl Event {
    pub fn new(name: &str) -> Self {
        Event { name: Symbol::new(name), payload: None }
    }

    pub fn with(name: &str, payload: impl Into<Value>) -> Self {
        Event { name: Symbol::new(name), payload: Some(payload.into()) }
    }

    pub fn is(&self, name: &str) -> bool {
        &*self.name == name
    }
}

impl fmt::Debug for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.payload {
            Some(p) => write!(f, "{}[{}]", self.name, p),
            None => write!(f, "{}", self.name),
        }
    }
}

/// A finite sequence of events. `Trace::default()` is the empty trace.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trace(Vec<Event>);

impl Trace {
    pub fn new() -> Self {
        Trace(Vec::new())
    }

    pub fn from_events(events: Vec<Event>) -> Self {
        Trace(events)
    }

    /// `n` copies of the same event.
    pub fn repeat(event: &Event, n: usize) -> Self {
        Trace(vec![event.clone(); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn events(&self) -> &[Event] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Event> {
        self.0.iter()
    }

    /// `w.e`
    pub fn append(&self, e: Event) -> Trace {
        let mut events = Vec::with_capacity(self.0.len() + 1);
        events.extend_from_slice(&self.0);
        events.push(e);
        Trace(events)
    }

    pub fn concat(&self, other: &Trace) -> Trace {
        let mut events = Vec::with_capacity(self.0.len() + other.0.len());
        events.extend_from_slice(&self.0);
        events.extend_from_slice(&other.0);
        Trace(events)
    }

    pub fn push(&mut self, e: Event) {
        self.0.push(e);
    }

    pub fn extend_from_slice(&mut self, events: &[Event]) {
        self.0.extend_from_slice(events);
    }

    pub fn prefix(&self, len: usize) -> Trace {
        Trace(self.0[..len].to_vec())
    }

    pub fn is_prefix_of(&self, other: &Trace) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn into_events(self) -> Vec<Event> {
        self.0
    }
}

impl FromIterator<Event> for Trace {
    fn from_iter<I: IntoIterator<Item = Event>>(iter: I) -> Self {
        Trace(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a Trace {
    type Item = &'a Event;
    type IntoIter = std::slice::Iter<'a, Event>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl fmt::Debug for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("nulls");
        }
        write_joined(f, "<", &self.0, ">")
    }
}
