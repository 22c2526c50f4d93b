//! Monte Carlo sweeps and result files.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{gen_instance, ModelConfig, ProblemInstance};
use crate::parallel::{map_indexed, Execution};
use crate::sched::{draw_arrival_rates, run_episode, FairPolicy, PolicyKind, DEFAULT_TOTAL_ARRIVAL_RATE};
use crate::solvers::{solve_best_channel, solve_exhaustive, solve_greedy, solve_random, SolveResult, DEFAULT_CAP};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Exhaustive,
    Greedy,
    Random,
    BestChannel,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [
        SolverKind::Exhaustive,
        SolverKind::Greedy,
        SolverKind::Random,
        SolverKind::BestChannel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Exhaustive => "exhaustive",
            SolverKind::Greedy => "greedy",
            SolverKind::Random => "random",
            SolverKind::BestChannel => "best_channel",
        }
    }

    fn stream_tag(self) -> u64 {
        match self {
            SolverKind::Exhaustive => 1,
            SolverKind::Greedy => 2,
            SolverKind::Random => 3,
            SolverKind::BestChannel => 4,
        }
    }

    pub fn solve(self, inst: &ProblemInstance, cap: u64, rng: &mut ChaCha8Rng) -> SolveResult {
        match self {
            SolverKind::Exhaustive => solve_exhaustive(inst, cap, rng),
            SolverKind::Greedy => solve_greedy(inst),
            SolverKind::Random => solve_random(inst, rng),
            SolverKind::BestChannel => solve_best_channel(inst),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "exhaustive" => Ok(SolverKind::Exhaustive),
            "greedy" => Ok(SolverKind::Greedy),
            "random" => Ok(SolverKind::Random),
            "best_channel" | "bestchannel" => Ok(SolverKind::BestChannel),
            _ => Err(Error::InvalidConfig(format!("unknown solver '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    #[serde(rename = "n_o")]
    NOuter,
    Alpha,
    RMax,
    Policy,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::NOuter => "n_o",
            SweepVar::Alpha => "alpha",
            SweepVar::RMax => "r_max",
            SweepVar::Policy => "policy",
        }
    }
}

impl FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n_o" | "n" => Ok(SweepVar::NOuter),
            "alpha" => Ok(SweepVar::Alpha),
            "r_max" => Ok(SweepVar::RMax),
            "policy" => Ok(SweepVar::Policy),
            _ => Err(Error::InvalidConfig(format!("unknown sweep variable '{s}'"))),
        }
    }
}

/// A sweep value: a number for model sweeps, a name for policy sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Number(f64),
    Name(String),
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Number(x) => write!(f, "{x}"),
            SweepValue::Name(s) => f.write_str(s),
        }
    }
}

impl SweepValue {
    /// Numbers where they parse, names otherwise.
    pub fn parse(s: &str) -> Self {
        match s.trim().parse::<f64>() {
            Ok(x) => SweepValue::Number(x),
            Err(_) => SweepValue::Name(s.trim().to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub sweep_variable: SweepVar,
    pub values: Vec<SweepValue>,
    pub trials: usize,
    pub slots: u32,
    pub cap: u64,
    pub base: ModelConfig,
    pub solvers: Vec<String>,
    pub policies: Vec<String>,
    /// Expected total arrival rate for the queue policy.
    pub total_arrival_rate: f64,
    pub seed: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            sweep_variable: SweepVar::NOuter,
            values: (1..=10).map(|n| SweepValue::Number(n as f64)).collect(),
            trials: 1000,
            slots: 500,
            cap: DEFAULT_CAP,
            base: ModelConfig::default(),
            solvers: vec!["greedy".into()],
            policies: Vec::new(),
            total_arrival_rate: DEFAULT_TOTAL_ARRIVAL_RATE,
            seed: 0,
        }
    }
}

/// A validated [`ExperimentSpec`].
#[derive(Debug, Clone)]
struct Plan {
    points: Vec<(String, ModelConfig, Vec<PolicyKind>)>,
    solvers: Vec<SolverKind>,
}

impl ExperimentSpec {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    fn plan(&self) -> Result<Plan> {
        if self.values.is_empty() {
            return Err(Error::InvalidConfig("sweep needs at least one value".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        if self.cap == 0 {
            return Err(Error::InvalidConfig("cap must be >= 1".into()));
        }
        if !(self.total_arrival_rate >= 0.0) {
            return Err(Error::InvalidConfig("total_arrival_rate must be >= 0".into()));
        }
        let solvers = self
            .solvers
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<SolverKind>>>()?;
        let policies = self
            .policies
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<PolicyKind>>>()?;
        let needs_slots = self.sweep_variable == SweepVar::Policy || !policies.is_empty();
        if needs_slots && self.slots == 0 {
            return Err(Error::InvalidConfig("slots must be >= 1".into()));
        }
        if self.sweep_variable != SweepVar::Policy && solvers.is_empty() && policies.is_empty() {
            return Err(Error::InvalidConfig("no solvers or policies requested".into()));
        }

        let number = |v: &SweepValue| match v {
            SweepValue::Number(x) => Ok(*x),
            SweepValue::Name(s) => Err(Error::InvalidConfig(format!(
                "sweep over {} needs numbers, got '{s}'",
                self.sweep_variable.name()
            ))),
        };
        let mut points = Vec::with_capacity(self.values.len());
        for v in &self.values {
            let mut cfg = self.base.clone();
            let mut pol = policies.clone();
            match self.sweep_variable {
                SweepVar::NOuter => {
                    let x = number(v)?;
                    if x < 0.0 || x.fract() != 0.0 {
                        return Err(Error::InvalidConfig(format!("n_o must be a non-negative integer, got {x}")));
                    }
                    cfg.n_o = x as usize;
                    cfg.n_i = x as usize;
                }
                SweepVar::Alpha => cfg.alpha = number(v)?,
                SweepVar::RMax => cfg.r_max = number(v)?,
                SweepVar::Policy => {
                    let name = match v {
                        SweepValue::Name(s) => s.clone(),
                        SweepValue::Number(x) => x.to_string(),
                    };
                    pol = vec![name.parse()?];
                }
            }
            cfg.validate()?;
            points.push((v.to_string(), cfg, pol));
        }
        let solvers = if self.sweep_variable == SweepVar::Policy {
            Vec::new()
        } else {
            solvers
        };
        Ok(Plan { points, solvers })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_var: String,
    pub sweep_value: String,
    pub method: String,
    pub metric: String,
    pub mean: f64,
    /// Population standard deviation across trials.
    pub std: f64,
    pub trials: usize,
}

/// Every per-trial value of one (sweep value, method, metric) cell, in
/// trial order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub sweep_value: String,
    pub method: String,
    pub metric: String,
    pub samples: Vec<f64>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Child generator keyed by the master seed and a path of counters.
pub fn derive_rng(master: u64, keys: &[u64]) -> ChaCha8Rng {
    let h = keys
        .iter()
        .fold(splitmix64(master), |h, &k| splitmix64(h ^ splitmix64(k)));
    ChaCha8Rng::seed_from_u64(h)
}

const TAG_INSTANCE: u64 = 0;
const TAG_ARRIVALS: u64 = 10;

fn policy_tag(kind: PolicyKind) -> u64 {
    match kind {
        PolicyKind::GreedyStatic => 11,
        PolicyKind::WaitTime => 12,
        PolicyKind::Queue => 13,
    }
}

type Measurement = (String, &'static str, Option<f64>);

fn run_trial(spec: &ExperimentSpec, plan: &Plan, point: usize, trial: usize) -> Result<Vec<Measurement>> {
    let (_, cfg, policies) = &plan.points[point];
    let key = [point as u64, trial as u64];
    let inst = gen_instance(cfg, &mut derive_rng(spec.seed, &[key[0], key[1], TAG_INSTANCE]))?;
    let mut out = Vec::new();
    for &solver in &plan.solvers {
        let mut rng = derive_rng(spec.seed, &[key[0], key[1], solver.stream_tag()]);
        let res = solver.solve(&inst, spec.cap, &mut rng);
        let method = solver.name().to_string();
        out.push((method.clone(), "sum_rate", Some(res.report.weighted_sum)));
        out.push((method, "active_links", Some(res.schedule.active_count() as f64)));
    }
    for &kind in policies {
        let policy = match kind {
            PolicyKind::GreedyStatic => FairPolicy::greedy_static(),
            PolicyKind::WaitTime => FairPolicy::wait_time(),
            PolicyKind::Queue => {
                let mut rng = derive_rng(spec.seed, &[key[0], key[1], TAG_ARRIVALS]);
                FairPolicy::queue(draw_arrival_rates(cfg.n_o, spec.total_arrival_rate, &mut rng))
            }
        };
        let mut rng = derive_rng(spec.seed, &[key[0], key[1], policy_tag(kind)]);
        let m = run_episode(&inst, &policy, spec.slots, &mut rng)?;
        let method = kind.name().to_string();
        out.push((method.clone(), "mean_admission", Some(m.mean_admission)));
        out.push((method.clone(), "var_admission", Some(m.var_admission)));
        out.push((method.clone(), "sum_rate", Some(m.sum_rate_time_avg)));
        out.push((method.clone(), "max_wait", m.max_wait.map(|w| w as f64)));
        if kind == PolicyKind::Queue {
            out.push((method, "avg_delay", m.avg_delay));
        }
    }
    Ok(out)
}

/// Per-trial samples of every metric. Undefined values (e.g. the wait of an
/// episode in which nobody was served) are left out of their cell.
pub fn run_sweep_samples(spec: &ExperimentSpec, exec: Execution) -> Result<Vec<SampleSet>> {
    let plan = spec.plan()?;
    let n_points = plan.points.len();
    let results = map_indexed(n_points * spec.trials, exec, |k| {
        run_trial(spec, &plan, k / spec.trials, k % spec.trials)
    });

    let mut sets: Vec<SampleSet> = Vec::new();
    let mut point_start = 0;
    for (k, res) in results.into_iter().enumerate() {
        let point = k / spec.trials;
        if k % spec.trials == 0 {
            point_start = sets.len();
        }
        for (method, metric, value) in res? {
            let pos = sets[point_start..]
                .iter()
                .position(|s| s.method == method && s.metric == metric);
            let set = match pos {
                Some(p) => &mut sets[point_start + p],
                None => {
                    sets.push(SampleSet {
                        sweep_value: plan.points[point].0.clone(),
                        method,
                        metric: metric.to_string(),
                        samples: Vec::with_capacity(spec.trials),
                    });
                    sets.last_mut().unwrap()
                }
            };
            if let Some(v) = value {
                set.samples.push(v);
            }
        }
    }
    Ok(sets)
}

pub fn summarize(spec: &ExperimentSpec, sets: &[SampleSet]) -> Vec<ResultRow> {
    sets.iter()
        .map(|s| ResultRow {
            sweep_var: spec.sweep_variable.name().to_string(),
            sweep_value: s.sweep_value.clone(),
            method: s.method.clone(),
            metric: s.metric.clone(),
            mean: if s.samples.is_empty() { f64::NAN } else { stats::mean(&s.samples) },
            std: if s.samples.is_empty() { f64::NAN } else { stats::pop_std(&s.samples) },
            trials: s.samples.len(),
        })
        .collect()
}

pub fn run_sweep_with(spec: &ExperimentSpec, exec: Execution) -> Result<Vec<ResultRow>> {
    let sets = run_sweep_samples(spec, exec)?;
    Ok(summarize(spec, &sets))
}

pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    run_sweep_with(spec, Execution::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::InvalidConfig(format!("unknown format '{s}'"))),
        }
    }
}

/// Nine significant digits, fixed notation for ordinary magnitudes.
pub fn format_sig9(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // Rounding can carry into a new digit (9.999999999 -> 10.00000000).
        let digits = s.chars().filter(|c| c.is_ascii_digit()).skip_while(|&c| c == '0').count();
        if digits > 9 && decimals > 0 {
            let d = decimals - 1;
            return format!("{x:.d$}");
        }
        s
    } else {
        format!("{x:.8e}")
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sweep_var", "sweep_value", "method", "metric", "mean", "std", "trials"])?;
    for r in rows {
        w.write_record([
            r.sweep_var.as_str(),
            r.sweep_value.as_str(),
            r.method.as_str(),
            r.metric.as_str(),
            &format_sig9(r.mean),
            &format_sig9(r.std),
            &r.trials.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, rows)?;
    Ok(())
}

pub fn read_json(text: &str) -> Result<Vec<ResultRow>> {
    Ok(serde_json::from_str(text)?)
}

pub fn write_rows<W: Write>(rows: &[ResultRow], format: OutputFormat, out: W) -> Result<()> {
    match format {
        OutputFormat::Csv => write_csv(rows, out),
        OutputFormat::Json => write_json(rows, out),
    }
}

pub fn emit(rows: &[ResultRow], format: OutputFormat, path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::InvalidConfig("no rows to emit".into()));
    }
    let mut out = BufWriter::new(File::create(path)?);
    write_rows(rows, format, &mut out)?;
    out.flush()?;
    Ok(())
}
