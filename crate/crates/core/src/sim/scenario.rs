use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::net::{Behavior, DataPlanEntry, NetworkState, ScheduleEntry};
use crate::protocol::{FaultKind, GroupConfig, Monitor, Policy, Protocol, ProtocolBehavior, Rule};
use crate::value::Symbol;

fn half() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Delivery {
    Random {
        #[serde(default = "half")]
        p: f64,
    },
    Scripted {
        entries: Vec<ScheduleEntry>,
    },
}

impl Default for Delivery {
    fn default() -> Self {
        Delivery::Random { p: half() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub node: Symbol,
    pub kind: FaultKind,
}

/// A planned data message; `id` is drawn from the sequence allocator when absent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannedData {
    pub origin: Symbol,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    #[serde(default)]
    pub earliest: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub protocol: Protocol,
    pub nodes: Vec<Symbol>,
    /// Group members in turn order. Defaults to every node but the first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<Vec<Symbol>>,
    /// Required for random delivery; scripted runs stop when the entries do.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub delivery: Delivery,
    #[serde(default)]
    pub policy: Policy,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub faults: Vec<FaultSpec>,
    /// Defaults to a stream of data from the first node outside the group.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_plan: Option<Vec<PlannedData>>,
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> SimError {
    SimError::Invalid { field: field.into(), message: message.into() }
}

/// Hands out data ids: explicit ids are claimed first, the rest are filled
/// with the lowest unused numbers.
#[derive(Debug, Default)]
pub struct SequenceAllocator {
    used: BTreeSet<u64>,
    next: u64,
}

impl SequenceAllocator {
    pub fn claim(&mut self, id: u64) -> bool {
        self.used.insert(id)
    }

    pub fn fresh(&mut self) -> u64 {
        while self.used.contains(&self.next) {
            self.next += 1;
        }
        self.used.insert(self.next);
        self.next
    }
}

/// A validated scenario, ready to build networks from.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub scenario: Scenario,
    pub group: GroupConfig,
    pub plan: Vec<DataPlanEntry>,
    pub steps: u64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, SimError> {
        let sc: Scenario = serde_json::from_str(text)?;
        sc.prepare()?;
        Ok(sc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    fn known(&self, field: &str, n: &Symbol) -> Result<(), SimError> {
        if self.nodes.contains(n) {
            Ok(())
        } else {
            Err(invalid(field, format!("{n} is not a declared node")))
        }
    }

    fn group_config(&self) -> Result<GroupConfig, SimError> {
        let order = match &self.group {
            Some(g) => {
                for n in g {
                    self.known("group", n)?;
                }
                g.clone()
            }
            None if self.nodes.len() > 1 => self.nodes[1..].to_vec(),
            None => self.nodes.clone(),
        };
        GroupConfig::new(order).map_err(|e| invalid("group", e.to_string()))
    }

    fn default_plan(&self, group: &GroupConfig, steps: u64) -> Vec<DataPlanEntry> {
        let origin = self.nodes.iter().find(|n| !group.contains(n)).unwrap_or(&self.nodes[0]).clone();
        let count = 4 * group.k();
        let spacing = (steps / (2 * count)).max(1);
        (0..count).map(|id| DataPlanEntry { origin: origin.clone(), id, earliest: id * spacing }).collect()
    }

    fn plan(&self, group: &GroupConfig, steps: u64) -> Result<Vec<DataPlanEntry>, SimError> {
        let Some(planned) = &self.data_plan else { return Ok(self.default_plan(group, steps)) };
        let mut alloc = SequenceAllocator::default();
        for (i, p) in planned.iter().enumerate() {
            self.known(&format!("data_plan[{i}].origin"), &p.origin)?;
            if let Some(id) = p.id {
                if !alloc.claim(id) {
                    return Err(invalid(format!("data_plan[{i}].id"), format!("sequence number {id} is already used")));
                }
            }
        }
        Ok(planned
            .iter()
            .map(|p| DataPlanEntry { origin: p.origin.clone(), id: p.id.unwrap_or_else(|| alloc.fresh()), earliest: p.earliest })
            .collect())
    }

    /// Validate every field and resolve defaults.
    pub fn prepare(&self) -> Result<Prepared, SimError> {
        if self.nodes.is_empty() {
            return Err(invalid("nodes", "at least one node is required"));
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = self.nodes.iter().find(|n| !seen.insert(*n)) {
            return Err(invalid("nodes", format!("duplicate node name {dup}")));
        }
        let steps = match (&self.delivery, self.steps) {
            (Delivery::Random { p }, steps) => {
                if !(0.0..=1.0).contains(p) {
                    return Err(invalid("delivery.p", format!("{p} is not a probability")));
                }
                steps.ok_or_else(|| invalid("steps", "required for random delivery"))?
            }
            (Delivery::Scripted { entries }, steps) => {
                for (i, e) in entries.iter().enumerate() {
                    for n in e.local.iter().chain(&e.transmitter).chain(&e.receivers) {
                        self.known(&format!("delivery.entries[{i}]"), n)?;
                    }
                }
                steps.map_or(entries.len() as u64, |s| s.min(entries.len() as u64))
            }
        };
        let group = self.group_config()?;
        let mut faulty = BTreeSet::new();
        for (i, f) in self.faults.iter().enumerate() {
            self.known(&format!("faults[{i}].node"), &f.node)?;
            if !faulty.insert(&f.node) {
                return Err(invalid(format!("faults[{i}].node"), format!("{} already has a fault", f.node)));
            }
            self.rule(&group).and_then(|r| {
                ProtocolBehavior::faulty(r, self.policy, f.kind).map_err(|e| invalid(format!("faults[{i}].kind"), e.to_string()))
            })?;
        }
        let plan = self.plan(&group, steps)?;
        Ok(Prepared { scenario: self.clone(), group, plan, steps })
    }

    fn rule(&self, group: &GroupConfig) -> Result<Rule, SimError> {
        Ok(match self.protocol {
            Protocol::None => Rule::Plain,
            Protocol::SimpleAck => Rule::SimpleAck,
            Protocol::CyclicAck => Rule::CyclicAck(group.clone()),
        })
    }
}

impl Prepared {
    pub fn monitors(&self) -> &'static [Monitor] {
        Monitor::for_protocol(self.scenario.protocol)
    }

    pub fn rule(&self) -> Rule {
        self.scenario.rule(&self.group).expect("validated")
    }

    /// A fresh network for this scenario.
    pub fn network(&self) -> Result<NetworkState, SimError> {
        let sc = &self.scenario;
        let rule = self.rule();
        let behaviors = sc
            .nodes
            .iter()
            .map(|n| {
                let b = match sc.faults.iter().find(|f| &f.node == n) {
                    Some(f) => ProtocolBehavior::faulty(rule.clone(), sc.policy, f.kind).expect("validated"),
                    None => ProtocolBehavior::new(rule.clone(), sc.policy),
                };
                (n.clone(), Arc::new(b) as Arc<dyn Behavior>)
            })
            .collect();
        let net = NetworkState::new(behaviors).and_then(|n| n.with_plan(self.plan.clone()));
        net.map_err(|e| invalid("nodes", e.to_string()))
    }
}
