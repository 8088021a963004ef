use thiserror::Error;

use crate::value::{Event, Value};

/// A failure inside a single transition, before it is tied to a trace
/// position.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Fault {
    #[error("event {0} is outside the alphabet")]
    OutsideAlphabet(Event),
    #[error("feedback for component {component} produced {event}, outside that component's alphabet")]
    Feedback { component: usize, event: Event },
    #[error("invalid event {event}: {reason}")]
    InvalidEvent { event: Event, reason: String },
    #[error("type error: expected {expected}, found {found}")]
    Type { expected: &'static str, found: Value },
    #[error("driver value {found} does not extend the previous driver value")]
    NotAnExtension { found: Value },
    #[error("operation undefined on {0}")]
    Domain(String),
}

impl Fault {
    pub fn at(self, position: usize) -> Error {
        Error::Step { position, fault: self }
    }

    pub fn type_error(expected: &'static str, found: &Value) -> Fault {
        Fault::Type { expected, found: found.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Error {
    /// A transition failed while consuming the event at `position` (0-based).
    #[error("at position {position}: {fault}")]
    Step { position: usize, fault: Fault },
    #[error("state exploration not complete within {bound} states")]
    Incomplete { bound: usize, explored: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub fn fault(&self) -> Option<&Fault> {
        match self {
            Error::Step { fault, .. } => Some(fault),
            _ => None,
        }
    }

    pub fn position(&self) -> Option<usize> {
        match self {
            Error::Step { position, .. } => Some(*position),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
