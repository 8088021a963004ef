use std::collections::BTreeMap;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_scenario, Delivery, FaultSpec, RunSummary, Scenario, SimError, Status};
use crate::protocol::{Policy, Protocol};
use crate::value::Symbol;

/// A family of random scenarios that differ only in seed.
#[derive(Clone, Debug, PartialEq)]
pub struct FuzzConfig {
    pub protocol: Protocol,
    pub nodes: usize,
    pub steps: u64,
    pub seeds: Range<u64>,
    pub p: f64,
    pub policy: Policy,
    pub faults: Vec<FaultSpec>,
}

impl FuzzConfig {
    pub fn new(protocol: Protocol, nodes: usize, steps: u64, seeds: Range<u64>) -> Self {
        FuzzConfig { protocol, nodes, steps, seeds, p: 0.5, policy: Policy::Eager, faults: Vec::new() }
    }

    /// Nodes are `N0, N1, ..`; the group is every node but `N0`.
    pub fn scenario(&self, seed: u64) -> Scenario {
        Scenario {
            protocol: self.protocol,
            nodes: (0..self.nodes).map(|i| Symbol::from(format!("N{i}"))).collect(),
            group: None,
            steps: Some(self.steps),
            seed,
            delivery: Delivery::Random { p: self.p },
            policy: self.policy,
            faults: self.faults.clone(),
            data_plan: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzReport {
    pub runs: Vec<RunSummary>,
    /// Failing runs per monitor.
    pub violations: BTreeMap<String, usize>,
    pub commits: usize,
}

impl FuzzReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// One run per seed, in parallel; the report lists runs in seed order.
pub fn fuzz(cfg: &FuzzConfig) -> Result<FuzzReport, SimError> {
    if cfg.seeds.is_empty() {
        return Err(SimError::Invalid { field: "seeds".into(), message: "empty seed range".into() });
    }
    cfg.scenario(cfg.seeds.start).prepare()?;
    let seeds: Vec<u64> = cfg.seeds.clone().collect();
    let runs = seeds
        .par_iter()
        .map(|&seed| run_scenario(&cfg.scenario(seed), None))
        .collect::<Result<Vec<_>, _>>()?;
    let mut violations = BTreeMap::new();
    for r in runs.iter().filter(|r| r.status == Status::Violation) {
        for name in r.violations.keys() {
            *violations.entry(name.clone()).or_insert(0) += 1;
        }
    }
    let commits = runs.iter().map(|r| r.commits).sum();
    Ok(FuzzReport { runs, violations, commits })
}
