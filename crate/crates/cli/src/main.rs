//! `statevar`: run catalog examples, minimize and compare machines, and run,
//! fuzz, or replay broadcast-network scenarios.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 monitor violation,
//! 3 state bound exhausted.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use statevar_core::catalog::{build_example, parse_event, Example};
use statevar_core::minimize::{equivalent, minimize, Equivalence};
use statevar_core::protocol::{FaultKind, Policy, Protocol};
use statevar_core::sim::{self, Delivery, FaultSpec, FuzzConfig, Scenario, Status};
use statevar_core::{Error, Event, Trace};

const OK: u8 = 0;
const USAGE: u8 = 1;
const VIOLATION: u8 = 2;
const BOUND: u8 = 3;

#[derive(Parser)]
#[command(name = "statevar", version, about = "State variables, products, and broadcast commit protocols")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file, optionally writing a JSON-lines trace log.
    Run(RunArgs),
    /// Run one random scenario per seed and summarize the monitors.
    Fuzz(FuzzArgs),
    /// Evaluate a catalog example after each event of a trace.
    Example(ExampleArgs),
    /// Minimize a catalog example over a finite event basis.
    Minimize(MachineArgs),
    /// Decide whether two catalog examples agree on every trace over a basis.
    Equivalent(EquivalentArgs),
    /// Re-execute a trace log and check that every line is reproduced.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Where to write the trace log.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<u64>,
    /// Delivery probability; switches the scenario to random delivery.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    policy: Option<Policy>,
}

#[derive(Args)]
struct FuzzArgs {
    #[arg(long, default_value = "simple-ack")]
    protocol: Protocol,
    #[arg(long, default_value_t = 4)]
    nodes: usize,
    #[arg(long, default_value_t = 1000)]
    steps: u64,
    /// Half-open range `a..b`, or a single seed.
    #[arg(long, default_value = "0..10")]
    seeds: String,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, default_value = "eager")]
    policy: Policy,
    /// `node:kind`, e.g. `N1:ack-without-data`. Repeatable.
    #[arg(long)]
    fault: Vec<String>,
}

#[derive(Args)]
struct ExampleArgs {
    /// Example name, optionally with parameters: `mod-counter:c=3`.
    name: String,
    /// `key=value`. Repeatable.
    #[arg(long)]
    param: Vec<String>,
    /// Events such as `tick`, `enq:a`, `shift:-1:x`.
    events: Vec<String>,
}

#[derive(Args)]
struct MachineArgs {
    name: String,
    #[arg(long)]
    param: Vec<String>,
    /// Comma-separated events; defaults to the example's own basis.
    #[arg(long)]
    basis: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    bound: usize,
}

#[derive(Args)]
struct EquivalentArgs {
    left: String,
    right: String,
    #[arg(long)]
    param: Vec<String>,
    #[arg(long)]
    basis: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    bound: usize,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    log: PathBuf,
}

fn print(value: &serde_json::Value) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn parse_params(spec: &str, extra: &[String]) -> anyhow::Result<(String, BTreeMap<String, String>)> {
    let (name, inline) = spec.split_once(':').unwrap_or((spec, ""));
    let mut params = BTreeMap::new();
    for kv in inline.split(',').filter(|s| !s.is_empty()).chain(extra.iter().map(String::as_str)) {
        let (k, v) = kv.split_once('=').ok_or_else(|| anyhow!("parameter {kv:?} is not key=value"))?;
        params.insert(k.to_string(), v.to_string());
    }
    Ok((name.to_string(), params))
}

fn example(spec: &str, extra: &[String]) -> anyhow::Result<Example> {
    let (name, params) = parse_params(spec, extra)?;
    Ok(build_example(&name, &params)?)
}

fn events(tokens: impl IntoIterator<Item = impl AsRef<str>>) -> anyhow::Result<Vec<Event>> {
    tokens.into_iter().map(|t| parse_event(t.as_ref()).map_err(Into::into)).collect()
}

fn basis_for(ex: &Example, basis: &Option<String>) -> anyhow::Result<Vec<Event>> {
    match basis {
        Some(b) => events(b.split(',').filter(|s| !s.is_empty())),
        None => Ok(ex.basis.clone()),
    }
}

fn incomplete(bound: usize, explored: usize) -> anyhow::Result<u8> {
    print(&json!({ "complete": false, "bound": bound, "explored": explored }))?;
    Ok(BOUND)
}

fn cmd_example(a: ExampleArgs) -> anyhow::Result<u8> {
    let ex = example(&a.name, &a.param)?;
    let w: Trace = events(&a.events)?.into_iter().collect();
    let values = ex.variable.prefix_values(&w)?;
    for (i, v) in values.iter().enumerate() {
        let event = i.checked_sub(1).map(|j| w.events()[j].to_string());
        print(&json!({ "step": i, "event": event, "value": v, "text": v.to_string() }))?;
    }
    Ok(OK)
}

fn cmd_minimize(a: MachineArgs) -> anyhow::Result<u8> {
    let ex = example(&a.name, &a.param)?;
    let basis = basis_for(&ex, &a.basis)?;
    match minimize(&ex.variable.to_machine()?, &basis, a.bound) {
        Ok(m) => {
            print(&json!({
                "example": ex.name,
                "complete": true,
                "states": m.state_count(),
                "machine": m.table,
            }))?;
            Ok(OK)
        }
        Err(Error::Incomplete { bound, explored }) => incomplete(bound, explored),
        Err(e) => Err(e.into()),
    }
}

fn cmd_equivalent(a: EquivalentArgs) -> anyhow::Result<u8> {
    let left = example(&a.left, &a.param)?;
    let right = example(&a.right, &a.param)?;
    let basis = basis_for(&left, &a.basis)?;
    match equivalent(&left.variable.to_machine()?, &right.variable.to_machine()?, &basis, a.bound) {
        Ok(Equivalence::Equivalent) => print(&json!({ "equivalent": true }))?,
        Ok(Equivalence::Distinguished(w)) => {
            let witness: Vec<String> = w.iter().map(ToString::to_string).collect();
            print(&json!({ "equivalent": false, "witness": witness, "length": w.len() }))?
        }
        Err(Error::Incomplete { bound, explored }) => return incomplete(bound, explored),
        Err(e) => return Err(e.into()),
    }
    Ok(OK)
}

fn status_code(status: Status) -> u8 {
    match status {
        Status::Ok => OK,
        Status::Violation => VIOLATION,
    }
}

fn cmd_run(a: RunArgs) -> anyhow::Result<u8> {
    let text = fs::read_to_string(&a.scenario).with_context(|| format!("reading {}", a.scenario.display()))?;
    let mut sc: Scenario = serde_json::from_str(&text).with_context(|| format!("parsing {}", a.scenario.display()))?;
    if let Some(seed) = a.seed {
        sc.seed = seed;
    }
    if let Some(steps) = a.steps {
        sc.steps = Some(steps);
    }
    if let Some(p) = a.p {
        sc.delivery = Delivery::Random { p };
    }
    if let Some(policy) = a.policy {
        sc.policy = policy;
    }
    let summary = match &a.out {
        Some(path) => {
            let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = io::BufWriter::new(file);
            let s = sim::run_scenario(&sc, Some(&mut w))?;
            w.flush()?;
            s
        }
        None => sim::run_scenario(&sc, None)?,
    };
    print(&serde_json::to_value(&summary)?)?;
    Ok(status_code(summary.status))
}

fn parse_seeds(s: &str) -> anyhow::Result<std::ops::Range<u64>> {
    let range = match s.split_once("..") {
        Some((a, b)) => a.trim().parse()?..b.trim().parse()?,
        None => {
            let x: u64 = s.trim().parse()?;
            x..x + 1
        }
    };
    if range.is_empty() {
        bail!("seed range {s:?} is empty");
    }
    Ok(range)
}

fn cmd_fuzz(a: FuzzArgs) -> anyhow::Result<u8> {
    let seeds = parse_seeds(&a.seeds).with_context(|| format!("bad --seeds {:?}", a.seeds))?;
    let faults = a
        .fault
        .iter()
        .map(|f| {
            let (node, kind) = f.split_once(':').ok_or_else(|| anyhow!("--fault {f:?} is not node:kind"))?;
            Ok(FaultSpec { node: node.into(), kind: kind.parse::<FaultKind>().map_err(|e| anyhow!(e))? })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let cfg = FuzzConfig { p: a.p, policy: a.policy, faults, ..FuzzConfig::new(a.protocol, a.nodes, a.steps, seeds) };
    let report = sim::fuzz(&cfg)?;
    for r in &report.runs {
        print(&serde_json::to_value(r)?)?;
    }
    print(&json!({
        "runs": report.runs.len(),
        "violations": report.violations,
        "commits": report.commits,
    }))?;
    Ok(if report.is_clean() { OK } else { VIOLATION })
}

fn cmd_replay(a: ReplayArgs) -> anyhow::Result<u8> {
    let text = fs::read_to_string(&a.log).with_context(|| format!("reading {}", a.log.display()))?;
    let summary = sim::replay(&text)?;
    print(&json!({ "reproduced": true, "summary": summary }))?;
    Ok(status_code(summary.status))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { OK });
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Fuzz(a) => cmd_fuzz(a),
        Command::Example(a) => cmd_example(a),
        Command::Minimize(a) => cmd_minimize(a),
        Command::Equivalent(a) => cmd_equivalent(a),
        Command::Replay(a) => cmd_replay(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(USAGE)
        }
    }
}
