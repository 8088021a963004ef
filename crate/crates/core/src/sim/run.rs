use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Delivery, Prepared, Scenario, SimError};
use crate::net::{derived_sets, random_schedule, DerivedSets, Message, NodeEvent, ScheduleEntry, ScheduleRng, Verdict, Violation};
use crate::protocol::{commits, Commit, GroupConfig};
use crate::value::Symbol;

pub const TOOL: &str = "statevar";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    Violation,
}

/// One line of a trace log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "kebab-case")]
pub enum LogRecord {
    Header {
        tool: String,
        version: String,
        rng: String,
        seed: u64,
        scenario: Scenario,
    },
    Step {
        step: u64,
        schedule: ScheduleEntry,
        appended: BTreeMap<Symbol, NodeEvent>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sent: Option<Message>,
        verdicts: BTreeMap<String, Verdict>,
    },
    Footer {
        steps_run: u64,
        status: Status,
        derived: DerivedSets,
        commits: Vec<Commit>,
    },
}

/// What a run amounted to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub steps_run: u64,
    pub status: Status,
    /// Monitor name to witness, for every monitor that failed at the
    /// stopping step.
    pub violations: BTreeMap<String, Violation>,
    pub commits: usize,
}

enum Source<'a> {
    Random(Box<ScheduleRng>, f64),
    Scripted(&'a [ScheduleEntry]),
}

fn emit(sink: &mut Option<&mut dyn Write>, record: &LogRecord) -> Result<(), SimError> {
    if let Some(w) = sink {
        serde_json::to_writer(&mut **w, record)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn execute(prep: &Prepared, mut source: Source<'_>, steps: u64, mut sink: Option<&mut dyn Write>) -> Result<RunSummary, SimError> {
    let sc = &prep.scenario;
    emit(
        &mut sink,
        &LogRecord::Header {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            rng: ScheduleRng::ALGORITHM.into(),
            seed: sc.seed,
            scenario: sc.clone(),
        },
    )?;
    let mut net = prep.network()?;
    let mut violations = BTreeMap::new();
    let mut steps_run = 0;
    for step in 0..steps {
        let schedule = match &mut source {
            Source::Random(rng, p) => random_schedule(&net, rng, *p),
            Source::Scripted(entries) => entries[step as usize].clone(),
        };
        let outcome = net.apply(&schedule).map_err(|source| SimError::Step { step, source })?;
        steps_run += 1;
        let verdicts: BTreeMap<String, Verdict> =
            prep.monitors().iter().map(|m| (m.name().to_string(), m.check(&net, &prep.group))).collect();
        for (name, v) in &verdicts {
            if let Some(v) = v.violation() {
                violations.insert(name.clone(), v.clone());
            }
        }
        emit(&mut sink, &LogRecord::Step { step, schedule, appended: outcome.appended, sent: outcome.sent, verdicts })?;
        if !violations.is_empty() {
            break;
        }
    }
    let status = if violations.is_empty() { Status::Ok } else { Status::Violation };
    let commits = commits(&net, sc.protocol, &prep.group);
    let summary = RunSummary { seed: sc.seed, steps_run, status, violations, commits: commits.len() };
    if sink.is_some() {
        emit(&mut sink, &LogRecord::Footer { steps_run, status, derived: derived_sets(&net), commits })?;
    }
    Ok(summary)
}

/// Run a scenario, writing a JSON-lines trace log to `log` if given. Stops
/// after the first step at which any monitor fails.
pub fn run_scenario(sc: &Scenario, log: Option<&mut dyn Write>) -> Result<RunSummary, SimError> {
    let prep = sc.prepare()?;
    let source = match &sc.delivery {
        Delivery::Random { p } => Source::Random(Box::new(ScheduleRng::new(sc.seed)), *p),
        Delivery::Scripted { entries } => Source::Scripted(entries),
    };
    execute(&prep, source, prep.steps, log)
}

pub fn parse_log(text: &str) -> Result<Vec<LogRecord>, SimError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| SimError::Log(format!("line {}: {e}", i + 1))))
        .collect()
}

/// Re-execute a log's schedule entries and compare every regenerated line
/// with the original, byte for byte.
pub fn replay(text: &str) -> Result<RunSummary, SimError> {
    let records = parse_log(text)?;
    let Some(LogRecord::Header { scenario, .. }) = records.first() else {
        return Err(SimError::Log("first record is not a header".into()));
    };
    let entries: Vec<ScheduleEntry> = records
        .iter()
        .filter_map(|r| match r {
            LogRecord::Step { schedule, .. } => Some(schedule.clone()),
            _ => None,
        })
        .collect();
    let prep = scenario.prepare()?;
    let mut regenerated = Vec::new();
    let summary = execute(&prep, Source::Scripted(&entries), entries.len() as u64, Some(&mut regenerated))?;
    let regenerated = String::from_utf8(regenerated).expect("json is utf-8");
    let original = text.lines().filter(|l| !l.trim().is_empty());
    let mut fresh = regenerated.lines();
    for (i, expected) in original.enumerate() {
        let actual = fresh.next().unwrap_or("");
        if actual != expected {
            return Err(SimError::Replay { line: i + 1, expected: expected.into(), actual: actual.into() });
        }
    }
    if let Some(extra) = fresh.next() {
        return Err(SimError::Replay { line: text.lines().count() + 1, expected: String::new(), actual: extra.into() });
    }
    Ok(summary)
}

/// Every `rx[m]` in a step record is accompanied by a `tx` whose message is
/// `m`. Returns the first offending step and node.
pub fn log_pairing(records: &[LogRecord]) -> Result<(), (u64, Symbol)> {
    for r in records {
        if let LogRecord::Step { step, appended, sent, .. } = r {
            let has_tx = appended.values().any(|e| *e == NodeEvent::Tx);
            for (n, e) in appended {
                if let NodeEvent::Rx(m) = e {
                    if !has_tx || sent.as_ref() != Some(m) {
                        return Err((*step, n.clone()));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Turn discipline read off the log: the first `tx` of each `a_i` is by `π(i mod k)`.
pub fn log_turn_discipline(records: &[LogRecord], cfg: &GroupConfig) -> Verdict {
    let mut first = BTreeMap::new();
    for r in records {
        if let LogRecord::Step { schedule: ScheduleEntry { transmitter: Some(tx), .. }, sent: Some(m), .. } = r {
            first.entry(m.clone()).or_insert_with(|| tx.clone());
        }
    }
    crate::protocol::check_turn_discipline(&first, cfg)
}
