//! Commit protocols as node behaviours: per-message acks and cyclic acks.
//! A rule says which messages a node may transmit; a policy picks one.
//! Monitors check the safety properties over a [`NetworkState`].

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::{check_no_spurious, Ack, Behavior, Message, NetworkState, NodeEvent, NodeState, Verdict, Violation};
use crate::value::Symbol;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("the group needs at least one member")]
    EmptyGroup,
    #[error("{0} appears more than once in the group order")]
    RepeatedMember(Symbol),
    #[error("fault {fault} does not apply to protocol {protocol}")]
    FaultMismatch { fault: FaultKind, protocol: Protocol },
}

/// The group `G` with its turn order: `π(i)` is `order[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Symbol>", into = "Vec<Symbol>")]
pub struct GroupConfig {
    order: Vec<Symbol>,
}

impl GroupConfig {
    pub fn new(order: Vec<Symbol>) -> Result<Self, ProtocolError> {
        if order.is_empty() {
            return Err(ProtocolError::EmptyGroup);
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = order.iter().find(|n| !seen.insert(*n)) {
            return Err(ProtocolError::RepeatedMember(dup.clone()));
        }
        Ok(GroupConfig { order })
    }

    pub fn k(&self) -> u64 {
        self.order.len() as u64
    }

    /// `π(i mod k)`
    pub fn pi(&self, i: u64) -> &Symbol {
        &self.order[(i % self.k()) as usize]
    }

    pub fn members(&self) -> &[Symbol] {
        &self.order
    }

    pub fn contains(&self, n: &str) -> bool {
        self.order.iter().any(|m| &**m == n)
    }
}

impl TryFrom<Vec<Symbol>> for GroupConfig {
    type Error = ProtocolError;

    fn try_from(order: Vec<Symbol>) -> Result<Self, Self::Error> {
        GroupConfig::new(order)
    }
}

impl From<GroupConfig> for Vec<Symbol> {
    fn from(g: GroupConfig) -> Self {
        g.order
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// Data only; no acks.
    #[default]
    None,
    SimpleAck,
    CyclicAck,
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Protocol::None => "none",
            Protocol::SimpleAck => "simple-ack",
            Protocol::CyclicAck => "cyclic-ack",
        })
    }
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Protocol::None),
            "simple-ack" => Ok(Protocol::SimpleAck),
            "cyclic-ack" => Ok(Protocol::CyclicAck),
            _ => Err(format!("unknown protocol {s:?}; expected none, simple-ack or cyclic-ack")),
        }
    }
}

/// How a node picks among permitted messages.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Lowest unsent permitted message, data before acks.
    #[default]
    Eager,
    /// Lowest unsent permitted message, acks before data.
    AcksFirst,
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "eager" => Ok(Policy::Eager),
            "acks-first" => Ok(Policy::AcksFirst),
            _ => Err(format!("unknown policy {s:?}; expected eager or acks-first")),
        }
    }
}

impl Policy {
    fn key<'a>(&self, m: &'a Message) -> (bool, &'a Message) {
        match self {
            Policy::Eager => (false, m),
            Policy::AcksFirst => (m.is_data(), m),
        }
    }

    /// The lowest pending message, or when nothing is pending the next
    /// permitted one after `current`, wrapping around.
    pub fn pick(&self, permitted: &BTreeSet<Message>, sent: &BTreeSet<Message>, current: Option<&Message>) -> Option<Message> {
        let mut order: Vec<&Message> = permitted.iter().collect();
        order.sort_by_key(|m| self.key(m));
        if let Some(m) = order.iter().find(|m| !sent.contains(**m)) {
            return Some((*m).clone());
        }
        let next = match current {
            Some(c) => order.iter().find(|m| self.key(m) > self.key(c)).or(order.first()),
            None => order.first(),
        };
        next.map(|m| (*m).clone())
    }
}

/// Deliberately broken behaviours for negative tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultKind {
    /// Acks its own data, or data it has only seen acks for, without
    /// having received it.
    AckWithoutData,
    /// Sends the highest `a_i` whose data it holds, ignoring turn and
    /// completeness.
    OutOfTurnAck,
}

impl std::fmt::Display for FaultKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FaultKind::AckWithoutData => "ack-without-data",
            FaultKind::OutOfTurnAck => "out-of-turn-ack",
        })
    }
}

impl std::str::FromStr for FaultKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ack-without-data" => Ok(FaultKind::AckWithoutData),
            "out-of-turn-ack" => Ok(FaultKind::OutOfTurnAck),
            _ => Err(format!("unknown fault {s:?}; expected ack-without-data or out-of-turn-ack")),
        }
    }
}

/// The transmit constraint of a protocol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rule {
    Plain,
    SimpleAck,
    CyclicAck(GroupConfig),
}

fn received_data(node: &NodeState) -> impl Iterator<Item = u64> + '_ {
    node.r.iter().filter_map(|m| match m {
        Message::Data(d) => Some(*d),
        _ => None,
    })
}

/// The least `c` with `d_c ∉ R` or `a_c ∉ R`.
fn complete_prefix(node: &NodeState) -> u64 {
    (0..).find(|j| !(node.r.contains(&Message::Data(*j)) && node.r.contains(&Message::ack_seq(*j)))).unwrap_or(0)
}

impl Rule {
    pub fn protocol(&self) -> Protocol {
        match self {
            Rule::Plain => Protocol::None,
            Rule::SimpleAck => Protocol::SimpleAck,
            Rule::CyclicAck(_) => Protocol::CyclicAck,
        }
    }

    /// Every message `node` may set `T` to. Data it owns or has received may
    /// always be sent.
    pub fn permitted(&self, node: &NodeState) -> BTreeSet<Message> {
        let mut out: BTreeSet<Message> = node.own.iter().copied().chain(received_data(node)).map(Message::Data).collect();
        match self {
            Rule::Plain => {}
            Rule::SimpleAck => {
                // T = a(d,n) -> d ∈ R and (Id = n or a(d,n) ∈ R)
                if let Some(id) = &node.id {
                    out.extend(received_data(node).map(|d| Message::ack_of(d, id.clone())));
                }
                out.extend(node.r.iter().filter(|m| match m {
                    Message::Ack(Ack::Of { data, .. }) => node.r.contains(&Message::Data(*data)),
                    _ => false,
                }).cloned());
            }
            Rule::CyclicAck(cfg) => {
                // T = a_i -> (π(i mod k) = Id or a_i ∈ R), d_i ∈ R, and all
                // earlier data and acks received
                for i in 0..=complete_prefix(node) {
                    let turn = node.id.as_ref() == Some(cfg.pi(i));
                    let a = Message::ack_seq(i);
                    if node.r.contains(&Message::Data(i)) && (turn || node.r.contains(&a)) {
                        out.insert(a);
                    }
                }
            }
        }
        out
    }

    pub fn permits(&self, node: &NodeState, m: &Message) -> bool {
        self.permitted(node).contains(m)
    }
}

/// A rule, a policy, and optionally a fault.
#[derive(Clone, Debug)]
pub struct ProtocolBehavior {
    pub rule: Rule,
    pub policy: Policy,
    pub fault: Option<FaultKind>,
}

impl ProtocolBehavior {
    pub fn new(rule: Rule, policy: Policy) -> Self {
        ProtocolBehavior { rule, policy, fault: None }
    }

    pub fn faulty(rule: Rule, policy: Policy, fault: FaultKind) -> Result<Self, ProtocolError> {
        let ok = matches!(
            (&rule, fault),
            (Rule::SimpleAck, FaultKind::AckWithoutData) | (Rule::CyclicAck(_), FaultKind::OutOfTurnAck)
        );
        if !ok {
            return Err(ProtocolError::FaultMismatch { fault, protocol: rule.protocol() });
        }
        Ok(ProtocolBehavior { rule, policy, fault: Some(fault) })
    }

    fn forbidden_choice(&self, node: &NodeState, permitted: &BTreeSet<Message>) -> Option<Message> {
        let fresh = |m: &Message| !permitted.contains(m) && !node.s.contains(m);
        match self.fault? {
            FaultKind::AckWithoutData => {
                let id = node.id.clone()?;
                let heard = node.r.iter().filter_map(|m| match m {
                    Message::Ack(Ack::Of { data, .. }) => Some(*data),
                    _ => None,
                });
                let known: BTreeSet<u64> = node.own.iter().copied().chain(received_data(node)).chain(heard).collect();
                known.into_iter().map(|d| Message::ack_of(d, id.clone())).find(fresh)
            }
            FaultKind::OutOfTurnAck => {
                received_data(node).map(Message::ack_seq).filter(fresh).max()
            }
        }
    }
}

impl Behavior for ProtocolBehavior {
    fn choose(&self, node: &NodeState, offered: &[u64]) -> Option<NodeEvent> {
        if let Some(&id) = offered.first() {
            return Some(NodeEvent::Originate(id));
        }
        let permitted = self.rule.permitted(node);
        let next = self
            .forbidden_choice(node, &permitted)
            .or_else(|| self.policy.pick(&permitted, &node.s, node.t.as_ref()));
        (next != node.t).then_some(NodeEvent::Select(next))
    }
}

/// `(∀ n ∈ G) a(m, n) ∈ R`
pub fn commit_simple(cfg: &GroupConfig, m: u64, r: &BTreeSet<Message>) -> bool {
    cfg.members().iter().all(|n| r.contains(&Message::ack_of(m, n.clone())))
}

/// `a_{i+k} ∈ R`
pub fn commit_cyclic(cfg: &GroupConfig, i: u64, r: &BTreeSet<Message>) -> bool {
    r.contains(&Message::ack_seq(i + cfg.k()))
}

/// `a(d, n') ∈ R(n) -> d ∈ R(n')`
pub fn check_ack_lemma(st: &NetworkState) -> Verdict {
    st.states()
        .find_map(|(n, s)| {
            s.r.iter().find_map(|m| match m {
                Message::Ack(Ack::Of { data, node: acker }) => {
                    let ok = st.node(acker).is_some_and(|a| a.r.contains(&Message::Data(*data)));
                    (!ok).then(|| Violation::AckLemma { node: n.clone(), data: *data, acker: acker.clone() })
                }
                _ => None,
            })
        })
        .into()
}

fn missing_member(st: &NetworkState, cfg: &GroupConfig, data: u64) -> Option<Symbol> {
    let d = Message::Data(data);
    cfg.members().iter().find(|g| !st.node(g).is_some_and(|s| s.r.contains(&d))).cloned()
}

/// Wherever `commit_simple` holds, every member of `G` has the data.
pub fn check_simple_commit(st: &NetworkState, cfg: &GroupConfig) -> Verdict {
    st.states()
        .find_map(|(n, s)| {
            let acked: BTreeSet<u64> = s
                .r
                .iter()
                .filter_map(|m| match m {
                    Message::Ack(Ack::Of { data, .. }) => Some(*data),
                    _ => None,
                })
                .collect();
            acked.into_iter().filter(|d| commit_simple(cfg, *d, &s.r)).find_map(|d| {
                missing_member(st, cfg, d).map(|missing| Violation::SimpleCommit { node: n.clone(), data: d, missing })
            })
        })
        .into()
}

/// `a_{i+k} ∈ R(n) -> (∀ n' ∈ G) d_i ∈ R(n')`
pub fn check_cyclic_soundness(st: &NetworkState, cfg: &GroupConfig) -> Verdict {
    st.states()
        .find_map(|(n, s)| {
            s.r.iter().find_map(|m| match m {
                Message::Ack(Ack::Seq(j)) if *j >= cfg.k() => {
                    let i = j - cfg.k();
                    missing_member(st, cfg, i).map(|missing| Violation::CyclicCommit { node: n.clone(), seq: i, missing })
                }
                _ => None,
            })
        })
        .into()
}

/// The first transmission of each `a_i` is by `π(i mod k)`.
pub fn check_turn_discipline(first_tx: &BTreeMap<Message, Symbol>, cfg: &GroupConfig) -> Verdict {
    first_tx
        .iter()
        .find_map(|(m, sender)| match m {
            Message::Ack(Ack::Seq(i)) if sender != cfg.pi(*i) => {
                Some(Violation::TurnOrder { seq: *i, sender: sender.clone(), expected: cfg.pi(*i).clone() })
            }
            _ => None,
        })
        .into()
}

/// The monitors evaluated after every step of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Monitor {
    NoSpurious,
    AckLemma,
    SimpleCommit,
    CyclicCommit,
    TurnDiscipline,
}

impl Monitor {
    pub fn name(&self) -> &'static str {
        match self {
            Monitor::NoSpurious => "no-spurious",
            Monitor::AckLemma => "ack-lemma",
            Monitor::SimpleCommit => "simple-commit",
            Monitor::CyclicCommit => "cyclic-commit",
            Monitor::TurnDiscipline => "turn-discipline",
        }
    }

    pub fn for_protocol(p: Protocol) -> &'static [Monitor] {
        match p {
            Protocol::None => &[Monitor::NoSpurious],
            Protocol::SimpleAck => &[Monitor::NoSpurious, Monitor::AckLemma, Monitor::SimpleCommit],
            Protocol::CyclicAck => &[Monitor::NoSpurious, Monitor::CyclicCommit, Monitor::TurnDiscipline],
        }
    }

    pub fn check(&self, st: &NetworkState, cfg: &GroupConfig) -> Verdict {
        match self {
            Monitor::NoSpurious => check_no_spurious(st),
            Monitor::AckLemma => check_ack_lemma(st),
            Monitor::SimpleCommit => check_simple_commit(st, cfg),
            Monitor::CyclicCommit => check_cyclic_soundness(st, cfg),
            Monitor::TurnDiscipline => check_turn_discipline(st.first_transmitters(), cfg),
        }
    }
}

/// A commit observed at a node: data id for the simple protocol, sequence
/// number for the cyclic one.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Commit {
    pub node: Symbol,
    pub message: u64,
}

pub fn commits(st: &NetworkState, protocol: Protocol, cfg: &GroupConfig) -> Vec<Commit> {
    let mut out = Vec::new();
    for (n, s) in st.states() {
        let ids: BTreeSet<u64> = match protocol {
            Protocol::None => BTreeSet::new(),
            Protocol::SimpleAck => s
                .r
                .iter()
                .filter_map(|m| match m {
                    Message::Ack(Ack::Of { data, .. }) => Some(*data),
                    _ => None,
                })
                .filter(|d| commit_simple(cfg, *d, &s.r))
                .collect(),
            Protocol::CyclicAck => s
                .r
                .iter()
                .filter_map(|m| match m {
                    Message::Ack(Ack::Seq(j)) if *j >= cfg.k() => Some(j - cfg.k()),
                    _ => None,
                })
                .collect(),
        };
        out.extend(ids.into_iter().map(|message| Commit { node: n.clone(), message }));
    }
    out
}
