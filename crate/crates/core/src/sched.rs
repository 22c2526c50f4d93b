//! Slotted fair-scheduling simulator.
//!
//! Each slot the greedy solver runs on the episode's fixed channels with
//! per-UE weights set by the policy: constant (`GreedyStatic`), accrued
//! waiting time (`WaitTime`) or queue backlog (`Queue`).

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProblemInstance;
use crate::solvers::{solve_greedy, SolveResult};
use crate::stats;

/// Expected total arrival rate across outer UEs, in packets per slot.
pub const DEFAULT_TOTAL_ARRIVAL_RATE: f64 = 0.5;
pub const DEFAULT_SLOTS: u32 = 500;
pub const DEFAULT_EPISODES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PolicyKind {
    GreedyStatic,
    WaitTime,
    Queue,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::GreedyStatic, PolicyKind::WaitTime, PolicyKind::Queue];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::GreedyStatic => "GREEDY_STATIC",
            PolicyKind::WaitTime => "WAIT_TIME",
            PolicyKind::Queue => "QUEUE",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "greedy_static" | "greedy" | "static" => Ok(PolicyKind::GreedyStatic),
            "wait_time" | "wait" => Ok(PolicyKind::WaitTime),
            "queue" => Ok(PolicyKind::Queue),
            _ => Err(Error::InvalidConfig(format!("unknown policy '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairPolicy {
    pub kind: PolicyKind,
    /// Bernoulli arrival probability per slot for each outer UE (`Queue` only).
    pub arrival_rates: Vec<f64>,
}

impl FairPolicy {
    pub fn greedy_static() -> Self {
        Self {
            kind: PolicyKind::GreedyStatic,
            arrival_rates: Vec::new(),
        }
    }

    pub fn wait_time() -> Self {
        Self {
            kind: PolicyKind::WaitTime,
            arrival_rates: Vec::new(),
        }
    }

    pub fn queue(arrival_rates: Vec<f64>) -> Self {
        Self {
            kind: PolicyKind::Queue,
            arrival_rates,
        }
    }

    fn validate(&self, n_o: usize) -> Result<()> {
        if self.kind != PolicyKind::Queue {
            return Ok(());
        }
        if self.arrival_rates.len() != n_o {
            return Err(Error::DimensionMismatch(format!(
                "{} arrival rates for {n_o} outer UEs",
                self.arrival_rates.len()
            )));
        }
        if !self.arrival_rates.iter().all(|l| (0.0..=1.0).contains(l)) {
            return Err(Error::InvalidConfig("arrival rates must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Per-UE arrival rates drawn from `U[0, 2 * total / n_o]`, so their sum has
/// mean `total`. Values are capped at 1.
pub fn draw_arrival_rates<R: Rng + ?Sized>(n_o: usize, total: f64, rng: &mut R) -> Vec<f64> {
    if n_o == 0 {
        return Vec::new();
    }
    let hi = 2.0 * total / n_o as f64;
    (0..n_o).map(|_| (hi * rng.gen::<f64>()).min(1.0)).collect()
}

/// Wait-time rule: +1 while idle, -1 when served, never below 1.
pub fn update_weight_wait(w: f64, activated: bool) -> f64 {
    if activated {
        (w - 1.0).max(1.0)
    } else {
        w + 1.0
    }
}

/// Queue rule: backlog grows by `lambda`; when served it also drains by
/// `served`, never below 0.
pub fn update_weight_queue(w: f64, lambda: f64, activated: bool, served: f64) -> f64 {
    if activated {
        (w + lambda - served).max(0.0)
    } else {
        w + lambda
    }
}

/// Arrival and service record of one UE.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PacketLog {
    /// Slot of every unit-size packet arrival.
    pub arrivals: Vec<u32>,
    /// `(slot, amount)` of fluid drained from the queue.
    pub service: Vec<(u32, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeState {
    pub slot: u32,
    pub weights: Vec<f64>,
    pub queues: Vec<f64>,
    pub activation_history: Vec<Vec<u32>>,
    pub packet_log: Vec<PacketLog>,
    /// Sum over slots of the total backlog after arrivals, before service.
    pub queue_area: f64,
    pub total_arrivals: u64,
    /// Time-summed unweighted sum rate.
    pub rate_area: f64,
}

impl EpisodeState {
    fn new(n_o: usize) -> Self {
        Self {
            slot: 0,
            weights: vec![1.0; n_o],
            queues: vec![0.0; n_o],
            activation_history: vec![Vec::new(); n_o],
            packet_log: vec![PacketLog::default(); n_o],
            queue_area: 0.0,
            total_arrivals: 0,
            rate_area: 0.0,
        }
    }

    pub fn served(&self, ue: usize) -> f64 {
        stats::compensated_sum(self.packet_log[ue].service.iter().map(|s| s.1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub admission_ratio_per_ue: Vec<f64>,
    pub mean_admission: f64,
    pub var_admission: f64,
    pub sum_rate_time_avg: f64,
    /// Longest inter-activation gap in slots; `None` if nobody was served.
    pub max_wait: Option<u64>,
    /// Little's-law queueing delay in slots (`Queue` policy only).
    pub avg_delay: Option<f64>,
}

/// One row of an episode trace: the state of one UE in one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub slot: u32,
    pub ue: usize,
    pub activated: bool,
    pub rate: f64,
    /// Weight used for this slot's decision.
    pub weight: f64,
    /// Backlog at the end of the slot.
    pub queue: f64,
}

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub state: EpisodeState,
    pub metrics: EpisodeMetrics,
}

/// Runs one episode on fixed channels. Rows are appended to `trace` when
/// given.
pub fn simulate<R: Rng + ?Sized>(
    inst: &ProblemInstance,
    policy: &FairPolicy,
    slots: u32,
    rng: &mut R,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> Result<Episode> {
    if slots == 0 {
        return Err(Error::InvalidConfig("slots must be >= 1".into()));
    }
    inst.validate()?;
    let n_o = inst.n_outer();
    policy.validate(n_o)?;

    let mut work = inst.clone().with_weights(vec![1.0; n_o])?;
    let mut st = EpisodeState::new(n_o);
    let static_solution: Option<SolveResult> =
        (policy.kind == PolicyKind::GreedyStatic).then(|| solve_greedy(&work));

    let mut arrived = vec![0.0f64; n_o];
    for t in 0..slots {
        st.slot = t;
        if policy.kind == PolicyKind::Queue {
            for (i, &lambda) in policy.arrival_rates.iter().enumerate() {
                let a = rng.gen_bool(lambda);
                arrived[i] = if a { 1.0 } else { 0.0 };
                if a {
                    st.packet_log[i].arrivals.push(t);
                    st.total_arrivals += 1;
                }
            }
            // Backlog seen by the scheduler includes this slot's arrivals.
            for i in 0..n_o {
                st.weights[i] = st.queues[i] + arrived[i];
            }
            st.queue_area += stats::compensated_sum(st.weights.iter().copied());
        }

        let solved;
        let res = match &static_solution {
            Some(r) => r,
            None => {
                work.weights.copy_from_slice(&st.weights);
                solved = solve_greedy(&work);
                &solved
            }
        };

        st.rate_area += res.report.sum_rate();
        for i in 0..n_o {
            let activated = res.schedule.is_active(i);
            let rate = res.report.r1[i];
            let used_weight = st.weights[i];
            if activated {
                st.activation_history[i].push(t);
            }
            match policy.kind {
                PolicyKind::GreedyStatic => {}
                PolicyKind::WaitTime => {
                    st.weights[i] = update_weight_wait(st.weights[i], activated);
                    debug_assert!(st.weights[i] >= 1.0);
                }
                PolicyKind::Queue => {
                    let before = st.queues[i];
                    let after = update_weight_queue(before, arrived[i], activated, rate);
                    let drained = before + arrived[i] - after;
                    if activated && drained > 0.0 {
                        st.packet_log[i].service.push((t, drained));
                    }
                    st.queues[i] = after;
                    st.weights[i] = after;
                    debug_assert!(after >= 0.0);
                }
            }
            if let Some(rows) = trace.as_deref_mut() {
                rows.push(TraceRow {
                    slot: t,
                    ue: i,
                    activated,
                    rate,
                    weight: used_weight,
                    queue: st.queues[i],
                });
            }
        }
    }
    st.slot = slots;

    let admission_ratio_per_ue: Vec<f64> = st
        .activation_history
        .iter()
        .map(|h| h.len() as f64 / slots as f64)
        .collect();
    let (mean_admission, var_admission) = if n_o == 0 {
        (0.0, 0.0)
    } else {
        admission_stats(&st.activation_history, slots)?
    };
    let avg_delay = match policy.kind {
        PolicyKind::Queue => Some(avg_delay(&st, policy, slots)?),
        _ => None,
    };
    let metrics = EpisodeMetrics {
        admission_ratio_per_ue,
        mean_admission,
        var_admission,
        sum_rate_time_avg: st.rate_area / slots as f64,
        max_wait: max_wait(&st.activation_history, slots),
        avg_delay,
    };
    Ok(Episode { state: st, metrics })
}

pub fn run_episode<R: Rng + ?Sized>(
    inst: &ProblemInstance,
    policy: &FairPolicy,
    slots: u32,
    rng: &mut R,
) -> Result<EpisodeMetrics> {
    simulate(inst, policy, slots, rng, None).map(|e| e.metrics)
}

/// Mean and population variance of the per-UE admission ratio.
pub fn admission_stats(histories: &[Vec<u32>], slots: u32) -> Result<(f64, f64)> {
    if histories.is_empty() {
        return Err(Error::NoUes);
    }
    let ratios: Vec<f64> = histories
        .iter()
        .map(|h| h.len() as f64 / slots as f64)
        .collect();
    Ok((stats::mean(&ratios), stats::pop_variance(&ratios)))
}

/// Longest wait between activations over UEs that were activated at least
/// once. Gaps include the lead-in `first + 1` and the tail `slots - last`.
pub fn max_wait(histories: &[Vec<u32>], slots: u32) -> Option<u64> {
    histories
        .iter()
        .filter_map(|h| {
            let (first, last) = (*h.first()?, *h.last()?);
            let inner = h.windows(2).map(|w| u64::from(w[1] - w[0])).max().unwrap_or(0);
            Some(inner.max(u64::from(first) + 1).max(u64::from(slots - last)))
        })
        .max()
}

/// Little's law: mean backlog divided by mean arrival rate.
pub fn little_delay(queue_area: f64, arrivals: u64, slots: u32) -> f64 {
    if arrivals == 0 {
        return 0.0;
    }
    (queue_area / slots as f64) / (arrivals as f64 / slots as f64)
}

pub fn avg_delay(state: &EpisodeState, policy: &FairPolicy, slots: u32) -> Result<f64> {
    if policy.kind != PolicyKind::Queue {
        return Err(Error::WrongPolicy(format!(
            "queueing delay is only defined for QUEUE, not {}",
            policy.kind
        )));
    }
    Ok(little_delay(state.queue_area, state.total_arrivals, slots))
}
