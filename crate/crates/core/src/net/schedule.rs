use std::collections::BTreeSet;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NetworkState;
use crate::value::Symbol;

/// One network step: who takes a local action, who transmits, and who hears it.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub local: BTreeSet<Symbol>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transmitter: Option<Symbol>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub receivers: BTreeSet<Symbol>,
}

impl ScheduleEntry {
    pub fn local<'a>(nodes: impl IntoIterator<Item = &'a str>) -> Self {
        ScheduleEntry { local: nodes.into_iter().map(Symbol::from).collect(), ..Default::default() }
    }

    pub fn broadcast<'a>(from: &str, to: impl IntoIterator<Item = &'a str>) -> Self {
        ScheduleEntry {
            transmitter: Some(from.into()),
            receivers: to.into_iter().map(Symbol::from).collect(),
            ..Default::default()
        }
    }
}

/// ChaCha8 seeded with `seed_from_u64`. Integers in `0..n` come from
/// rejection sampling on whole 64-bit words; probabilities compare the top
/// 53 bits, scaled to `[0, 1)`, against `p`.
#[derive(Clone, Debug)]
pub struct ScheduleRng(ChaCha8Rng);

impl ScheduleRng {
    pub const ALGORITHM: &'static str = "chacha8";

    pub fn new(seed: u64) -> Self {
        ScheduleRng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn below(&mut self, n: u64) -> u64 {
        unbiased_below(n, || self.0.next_u64())
    }

    pub fn chance(&mut self, p: f64) -> bool {
        ((self.0.next_u64() >> 11) as f64) * (1.0 / (1u64 << 53) as f64) < p
    }
}

/// Uniform integer in `0..n` from a stream of uniform words.
pub fn unbiased_below(n: u64, mut next: impl FnMut() -> u64) -> u64 {
    assert!(n > 0, "empty range");
    // largest multiple of n that fits, as an exclusive bound
    let zone = u64::MAX - (u64::MAX - n + 1) % n;
    loop {
        let x = next();
        if x <= zone {
            return x % n;
        }
    }
}

/// Pick a transmitter uniformly among nodes holding a message (or none), each
/// other node hears it with probability `p`, and every node not on the
/// network this step takes a local action.
pub fn random_schedule(st: &NetworkState, rng: &mut ScheduleRng, p: f64) -> ScheduleEntry {
    let candidates: Vec<&Symbol> = st.names().filter(|n| st.node(n).is_some_and(|s| s.t.is_some())).collect();
    let pick = rng.below(candidates.len() as u64 + 1) as usize;
    let transmitter = candidates.get(pick).map(|n| (*n).clone());
    let mut receivers = BTreeSet::new();
    if let Some(tx) = &transmitter {
        for n in st.names().filter(|n| *n != tx) {
            if rng.chance(p) {
                receivers.insert(n.clone());
            }
        }
    }
    let local = st
        .names()
        .filter(|n| transmitter.as_ref() != Some(*n) && !receivers.contains(*n))
        .cloned()
        .collect();
    ScheduleEntry { local, transmitter, receivers }
}
