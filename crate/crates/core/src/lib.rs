//! State variables over generalized Moore machines.
//!
//! A [`StateVariable`] is a function on event traces built from a small
//! calculus (initial value, after-event, substitution, combination) and
//! lowered to a [`Machine`] whose state never stores the whole trace.
//! Products wire several variables together with feedback; the [`net`],
//! [`protocol`] and [`sim`] modules use them to model a broadcast network
//! running commit protocols.

pub mod alphabet;
pub mod catalog;
pub mod error;
pub mod machine;
pub mod minimize;
pub mod net;
pub mod product;
pub mod protocol;
pub mod sim;
pub mod value;
pub mod variable;

pub use alphabet::{Alphabet, PayloadDomain};
pub use error::{Error, Fault, Result};
pub use machine::{reachable, Machine, Reachable};
pub use minimize::{equivalent, minimize, nerode_classes_bounded, Equivalence, FiniteMachine, Minimized, Partition};
pub use product::{
    bidirectional_register, cascade_product, general_product, is_finite_state, multi_step_product, shift_register,
    Action, FeedbackMap, FiniteStateReport, ProductVariable,
};
pub use value::{Event, Symbol, Trace, Value};
pub use variable::{StateVariable, TraceVariable};
