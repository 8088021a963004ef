//! Event alphabets. An alphabet is a set of event constructors: a name plus
//! the domain its payload ranges over, which may be infinite.

use std::collections::{BTreeMap, BTreeSet};

use crate::value::{Event, Symbol, Value};

/// The payloads an event constructor accepts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PayloadDomain {
    /// Bare event, no payload.
    Unit,
    /// Any payload (or none).
    Any,
    Ints,
    Values(BTreeSet<Value>),
    /// An explicit list of payload options, `None` meaning the bare event.
    Exactly(BTreeSet<Option<Value>>),
}

impl PayloadDomain {
    fn admits(&self, payload: Option<&Value>) -> bool {
        match (self, payload) {
            (PayloadDomain::Unit, None) => true,
            (PayloadDomain::Unit, Some(_)) => false,
            (PayloadDomain::Any, _) => true,
            (PayloadDomain::Ints, Some(Value::Int(_))) => true,
            (PayloadDomain::Values(vs), Some(v)) => vs.contains(v),
            (PayloadDomain::Exactly(ps), p) => ps.contains(&p.cloned()),
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Repr {
    Universal,
    Named(BTreeMap<Symbol, PayloadDomain>),
    Intersection(Vec<Alphabet>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet(Repr);

impl Alphabet {
    /// Every event. Counters and the queue ignore what they do not recognise.
    pub fn universal() -> Self {
        Alphabet(Repr::Universal)
    }

    pub fn of<'a>(constructors: impl IntoIterator<Item = (&'a str, PayloadDomain)>) -> Self {
        Alphabet(Repr::Named(
            constructors.into_iter().map(|(n, d)| (Symbol::new(n), d)).collect(),
        ))
    }

    /// The finite alphabet containing exactly `events`.
    pub fn finite<'a>(events: impl IntoIterator<Item = &'a Event>) -> Self {
        let mut named: BTreeMap<Symbol, BTreeSet<Option<Value>>> = BTreeMap::new();
        for e in events {
            named.entry(e.name.clone()).or_default().insert(e.payload.clone());
        }
        Alphabet(Repr::Named(
            named.into_iter().map(|(n, ps)| (n, PayloadDomain::Exactly(ps))).collect(),
        ))
    }

    pub fn contains(&self, e: &Event) -> bool {
        match &self.0 {
            Repr::Universal => true,
            Repr::Named(m) => m.get(&e.name).is_some_and(|d| d.admits(e.payload.as_ref())),
            Repr::Intersection(parts) => parts.iter().all(|a| a.contains(e)),
        }
    }

    pub fn intersect(&self, other: &Alphabet) -> Alphabet {
        match (&self.0, &other.0) {
            (Repr::Universal, _) => other.clone(),
            (_, Repr::Universal) => self.clone(),
            _ if self == other => self.clone(),
            _ => Alphabet(Repr::Intersection(vec![self.clone(), other.clone()])),
        }
    }

    pub fn is_universal(&self) -> bool {
        matches!(self.0, Repr::Universal)
    }
}
