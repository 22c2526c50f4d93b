use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use sidelink::harness::{self, derive_rng, ExperimentSpec, OutputFormat, SolverKind, SweepValue, SweepVar};
use sidelink::model::{gen_instance, ProblemInstance};
use sidelink::protocol::{run_discovery, verify_trace, CollisionModel};
use sidelink::sched::{self, draw_arrival_rates, FairPolicy, PolicyKind};

#[derive(Parser)]
#[command(name = "sidelink", version, about = "Relay selection and fair scheduling for sidelink networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and print the rate report of each solver.
    Solve(Common),
    /// Monte Carlo sweep over n_o, alpha, r_max or policy.
    Sweep(Common),
    /// Fair-scheduling episodes.
    Simulate(Common),
    /// Distributed discovery emulation; writes the message log as JSON lines.
    Protocol(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment spec; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Instance JSON (solve/protocol); otherwise one is generated.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    slots: Option<u32>,
    #[arg(long)]
    cap: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    /// Comma-separated: exhaustive,greedy,random,best_channel
    #[arg(long, value_delimiter = ',')]
    solvers: Option<Vec<String>>,
    /// Comma-separated: GREEDY_STATIC,WAIT_TIME,QUEUE
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<String>>,
    /// <var>=<v1,v2,...>, var one of n_o, alpha, r_max, policy
    #[arg(long)]
    sweep: Option<String>,
    /// Outer UEs (and inner UEs unless --n-i is given).
    #[arg(long)]
    n_o: Option<usize>,
    #[arg(long)]
    n_i: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    r_max: Option<f64>,
    /// Discovery backoff window; omit for collision-free discovery.
    #[arg(long)]
    backoff: Option<u64>,
    /// Per-slot CSV trace of the first episode (simulate).
    #[arg(long)]
    trace: Option<PathBuf>,
}

impl Common {
    fn spec(&self) -> anyhow::Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(p) => ExperimentSpec::from_json_file(p).with_context(|| format!("reading {}", p.display()))?,
            None => ExperimentSpec::default(),
        };
        if let Some(v) = self.seed {
            spec.seed = v;
            spec.base.seed = v;
        }
        if let Some(v) = self.trials {
            spec.trials = v;
        }
        if let Some(v) = self.slots {
            spec.slots = v;
        }
        if let Some(v) = self.cap {
            spec.cap = v;
        }
        if let Some(v) = &self.solvers {
            spec.solvers = v.clone();
        }
        if let Some(v) = &self.policies {
            spec.policies = v.clone();
        }
        if let Some(n) = self.n_o {
            spec.base.n_o = n;
            spec.base.n_i = n;
        }
        if let Some(n) = self.n_i {
            spec.base.n_i = n;
        }
        if let Some(a) = self.alpha {
            spec.base.alpha = a;
        }
        if let Some(r) = self.r_max {
            spec.base.r_max = r;
        }
        if let Some(s) = &self.sweep {
            let (var, vals) = s.split_once('=').context("--sweep expects <var>=<v1,v2,...>")?;
            spec.sweep_variable = var.trim().parse::<SweepVar>()?;
            spec.values = vals.split(',').filter(|v| !v.trim().is_empty()).map(SweepValue::parse).collect();
        }
        Ok(spec)
    }

    fn format(&self) -> anyhow::Result<OutputFormat> {
        Ok(match &self.format {
            Some(f) => f.parse()?,
            None => OutputFormat::default(),
        })
    }

    fn output(&self) -> anyhow::Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            )),
            None => Box::new(io::stdout().lock()),
        })
    }

    fn instance(&self, spec: &ExperimentSpec) -> anyhow::Result<ProblemInstance> {
        match &self.instance {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Ok(ProblemInstance::from_json(&text)?)
            }
            None => Ok(gen_instance(&spec.base, &mut derive_rng(spec.seed, &[0, 0, 0]))?),
        }
    }
}

fn solve(c: &Common) -> anyhow::Result<()> {
    let spec = c.spec()?;
    let solvers = spec
        .solvers
        .iter()
        .map(|s| s.parse())
        .collect::<Result<Vec<SolverKind>, _>>()?;
    let inst = c.instance(&spec)?;
    let mut reports = serde_json::Map::new();
    for s in solvers {
        let res = s.solve(&inst, spec.cap, &mut derive_rng(spec.seed, &[0, 0, 1 + s as u64]));
        reports.insert(s.name().to_string(), serde_json::to_value(&res)?);
    }
    let mut out = c.output()?;
    serde_json::to_writer_pretty(&mut out, &reports)?;
    writeln!(out)?;
    Ok(())
}

fn sweep(c: &Common) -> anyhow::Result<()> {
    let spec = c.spec()?;
    let rows = harness::run_sweep(&spec)?;
    let format = c.format()?;
    match &c.out {
        Some(p) => harness::emit(&rows, format, p)?,
        None => harness::write_rows(&rows, format, io::stdout().lock())?,
    }
    Ok(())
}

fn simulate(c: &Common) -> anyhow::Result<()> {
    let mut spec = c.spec()?;
    if spec.policies.is_empty() {
        spec.policies = PolicyKind::ALL.iter().map(|p| p.name().to_string()).collect();
    }
    if c.sweep.is_none() && c.config.is_none() {
        spec.sweep_variable = SweepVar::Policy;
        spec.values = spec.policies.iter().map(|p| SweepValue::Name(p.clone())).collect();
    }
    if let Some(path) = &c.trace {
        let kind: PolicyKind = spec.policies[0].parse()?;
        let inst = c.instance(&spec)?;
        let policy = match kind {
            PolicyKind::GreedyStatic => FairPolicy::greedy_static(),
            PolicyKind::WaitTime => FairPolicy::wait_time(),
            PolicyKind::Queue => FairPolicy::queue(draw_arrival_rates(
                inst.n_outer(),
                spec.total_arrival_rate,
                &mut derive_rng(spec.seed, &[0, 0, 10]),
            )),
        };
        let mut rows = Vec::new();
        sched::simulate(&inst, &policy, spec.slots, &mut derive_rng(spec.seed, &[0, 0, 11]), Some(&mut rows))?;
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        sched::write_trace_csv(&rows, BufWriter::new(file))?;
    }
    let rows = harness::run_sweep(&spec)?;
    let format = c.format()?;
    match &c.out {
        Some(p) => harness::emit(&rows, format, p)?,
        None => harness::write_rows(&rows, format, io::stdout().lock())?,
    }
    Ok(())
}

fn protocol(c: &Common) -> anyhow::Result<()> {
    let spec = c.spec()?;
    let inst = c.instance(&spec)?;
    let model = match c.backoff {
        None => CollisionModel::None,
        Some(0) => bail!("--backoff window must be >= 1"),
        Some(w) => CollisionModel::SlottedBackoff { window: w },
    };
    let trace = run_discovery(&inst, model, &mut derive_rng(spec.seed, &[0, 0, 20]))?;
    if !verify_trace(&trace, &inst) {
        bail!("protocol trace failed verification");
    }
    trace.write_jsonl(c.output()?)?;
    eprintln!(
        "messages={} rounds={} bound={} schedule={}",
        trace.total_messages,
        trace.rounds,
        sidelink::protocol::message_bound(inst.n_outer() as u64),
        trace.final_schedule
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("{}", first.trim());
            return ExitCode::from(2);
        }
    };
    let res = match &cli.command {
        Command::Solve(c) => solve(c),
        Command::Sweep(c) => sweep(c),
        Command::Simulate(c) => simulate(c),
        Command::Protocol(c) => protocol(c),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
