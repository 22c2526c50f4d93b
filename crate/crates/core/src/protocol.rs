//! Emulation of the distributed discovery and relay-assignment exchange.
//!
//! 1. Outer UEs broadcast `I_AM_HERE`.
//! 2. One inner UE acknowledges each heard outer UE with `I_HEAR_YOU_ACK`.
//! 3. Every inner UE reports the gains it measured to the gNodeB.
//! 4. The gNodeB runs the greedy solver on the reported gains.
//! 5. The gNodeB broadcasts the assignment.
//! 6. Each outer UE receives a second ACK carrying its assignment.
//!
//! Without collisions this takes `4 n_o + 1` messages when `n_i = n_o`.

use std::fmt;
use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::ProblemInstance;
use crate::rate::Schedule;
use crate::solvers::solve_greedy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MessageKind {
    IAmHere,
    IHearYouAck,
    CsiReport,
    AssignmentBroadcast,
    ActivationAck,
}

impl MessageKind {
    /// Position of the kind in the exchange.
    pub fn step(self) -> u8 {
        match self {
            MessageKind::IAmHere => 1,
            MessageKind::IHearYouAck => 2,
            MessageKind::CsiReport => 3,
            MessageKind::AssignmentBroadcast => 5,
            MessageKind::ActivationAck => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeId {
    Outer(usize),
    Inner(usize),
    Gnb,
    Broadcast,
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Outer(i) => write!(f, "outer:{i}"),
            NodeId::Inner(j) => write!(f, "inner:{j}"),
            NodeId::Gnb => f.write_str("gnb"),
            NodeId::Broadcast => f.write_str("broadcast"),
        }
    }
}

impl std::str::FromStr for NodeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("bad node id '{s}'"));
        match s {
            "gnb" => Ok(NodeId::Gnb),
            "broadcast" => Ok(NodeId::Broadcast),
            _ => {
                let (role, idx) = s.split_once(':').ok_or_else(bad)?;
                let idx: usize = idx.parse().map_err(|_| bad())?;
                match role {
                    "outer" => Ok(NodeId::Outer(idx)),
                    "inner" => Ok(NodeId::Inner(idx)),
                    _ => Err(bad()),
                }
            }
        }
    }
}

impl Serialize for NodeId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    None,
    /// `(outer, gain)` pairs measured at the reporting inner UE.
    Csi(Vec<(usize, f64)>),
    Assignment(Schedule),
    /// Relay the receiving outer UE must use, if any.
    Activation(Option<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub kind: MessageKind,
    pub src: NodeId,
    pub dst: NodeId,
    pub slot: u64,
    pub payload: Payload,
}

/// JSON-lines record of a message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageLine {
    pub slot: u64,
    pub kind: MessageKind,
    pub src: NodeId,
    pub dst: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionModel {
    /// Every discovery is heard by every inner UE.
    None,
    /// Slotted random access: each pending outer UE picks a uniform slot in
    /// the current window; slots with two or more senders collide and the
    /// window doubles for the next round.
    SlottedBackoff { window: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTrace {
    pub messages: Vec<Message>,
    /// Contention rounds used by discovery.
    pub rounds: u32,
    pub final_schedule: Schedule,
    pub total_messages: usize,
}

impl ProtocolTrace {
    pub fn count(&self, kind: MessageKind) -> usize {
        self.messages.iter().filter(|m| m.kind == kind).count()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for m in &self.messages {
            let line = MessageLine {
                slot: m.slot,
                kind: m.kind,
                src: m.src,
                dst: m.dst,
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<MessageLine>> {
    input
        .lines()
        .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()))
        .map(|l| Ok(serde_json::from_str(&l?)?))
        .collect()
}

pub fn message_bound(n_o: u64) -> u64 {
    4 * n_o + 1
}

/// Messages of a collision-free run: `3 n_o + n_i + 1`, which is
/// [`message_bound`] for `n_i = n_o`.
pub fn collision_free_count(n_o: usize, n_i: usize) -> usize {
    if n_o == 0 || n_i == 0 {
        return n_o;
    }
    3 * n_o + n_i + 1
}

/// Inner UE that acknowledges outer `i`: the one with the strongest gain.
fn ack_responder(inst: &ProblemInstance, i: usize) -> usize {
    let row = &inst.gains.h1[i];
    let mut best = 0;
    for j in 1..row.len() {
        if row[j] > row[best] {
            best = j;
        }
    }
    best
}

pub fn run_discovery<R: Rng + ?Sized>(
    inst: &ProblemInstance,
    collision_model: CollisionModel,
    rng: &mut R,
) -> Result<ProtocolTrace> {
    inst.validate()?;
    let (n_o, n_i) = (inst.n_outer(), inst.n_inner());
    let mut messages = Vec::new();
    if n_o == 0 {
        return Ok(ProtocolTrace {
            messages,
            rounds: 0,
            final_schedule: Schedule::empty(0),
            total_messages: 0,
        });
    }

    // Steps 1 and 2: discovery with optional contention, ACK in the same slot.
    let mut heard = vec![false; n_o];
    let mut clock = 0u64;
    let mut rounds = 0u32;
    match collision_model {
        CollisionModel::None => {
            rounds = 1;
            for i in 0..n_o {
                messages.push(Message {
                    kind: MessageKind::IAmHere,
                    src: NodeId::Outer(i),
                    dst: NodeId::Broadcast,
                    slot: 0,
                    payload: Payload::None,
                });
            }
            heard.fill(n_i > 0);
            clock = 1;
        }
        CollisionModel::SlottedBackoff { window } => {
            if window == 0 {
                return Err(Error::InvalidConfig("backoff window must be >= 1".into()));
            }
            let mut pending: Vec<usize> = (0..n_o).collect();
            let mut w = window;
            while !pending.is_empty() {
                rounds += 1;
                let mut picks: Vec<(u64, usize)> =
                    pending.iter().map(|&i| (rng.gen_range(0..w), i)).collect();
                picks.sort_unstable();
                let mut next = Vec::new();
                let mut k = 0;
                while k < picks.len() {
                    let slot = picks[k].0;
                    let end = picks[k..].iter().take_while(|p| p.0 == slot).count() + k;
                    for &(_, i) in &picks[k..end] {
                        messages.push(Message {
                            kind: MessageKind::IAmHere,
                            src: NodeId::Outer(i),
                            dst: NodeId::Broadcast,
                            slot: clock + slot,
                            payload: Payload::None,
                        });
                    }
                    if end - k == 1 && n_i > 0 {
                        let i = picks[k].1;
                        heard[i] = true;
                        messages.push(Message {
                            kind: MessageKind::IHearYouAck,
                            src: NodeId::Inner(ack_responder(inst, i)),
                            dst: NodeId::Outer(i),
                            slot: clock + slot,
                            payload: Payload::None,
                        });
                    } else {
                        next.extend(picks[k..end].iter().map(|p| p.1));
                    }
                    k = end;
                }
                clock += w;
                next.sort_unstable();
                pending = next;
                if n_i == 0 {
                    break;
                }
                w = w.saturating_mul(2);
            }
        }
    }
    if collision_model == CollisionModel::None && n_i > 0 {
        for i in 0..n_o {
            messages.push(Message {
                kind: MessageKind::IHearYouAck,
                src: NodeId::Inner(ack_responder(inst, i)),
                dst: NodeId::Outer(i),
                slot: 0,
                payload: Payload::None,
            });
        }
    }
    if n_i == 0 {
        return finish(messages, rounds, Schedule::empty(n_o));
    }

    // Step 3: CSI reports.
    let csi_slot = clock;
    for j in 0..n_i {
        let gains = (0..n_o)
            .filter(|&i| heard[i])
            .map(|i| (i, inst.gains.h1[i][j]))
            .collect();
        messages.push(Message {
            kind: MessageKind::CsiReport,
            src: NodeId::Inner(j),
            dst: NodeId::Gnb,
            slot: csi_slot,
            payload: Payload::Csi(gains),
        });
    }

    // Step 4: the gNodeB solves on what it was told.
    let assembled = assemble_instance(inst, &messages)?;
    let schedule = solve_greedy(&assembled).schedule;

    // Step 5.
    messages.push(Message {
        kind: MessageKind::AssignmentBroadcast,
        src: NodeId::Gnb,
        dst: NodeId::Broadcast,
        slot: csi_slot + 1,
        payload: Payload::Assignment(schedule.clone()),
    });

    // Step 6: assigned relays activate their outer UE; the acknowledging
    // relay tells unassigned ones to stay silent.
    for i in 0..n_o {
        let relay = schedule.assign[i];
        messages.push(Message {
            kind: MessageKind::ActivationAck,
            src: NodeId::Inner(relay.unwrap_or_else(|| ack_responder(inst, i))),
            dst: NodeId::Outer(i),
            slot: csi_slot + 2,
            payload: Payload::Activation(relay),
        });
    }
    finish(messages, rounds, schedule)
}

fn finish(messages: Vec<Message>, rounds: u32, final_schedule: Schedule) -> Result<ProtocolTrace> {
    Ok(ProtocolTrace {
        total_messages: messages.len(),
        messages,
        rounds,
        final_schedule,
    })
}

/// Rebuilds the hop-1 gain matrix from CSI reports. Hop-2 gains, powers,
/// relay traffic and weights are known to the gNodeB already. Links never
/// reported get a vanishing gain.
fn assemble_instance(inst: &ProblemInstance, messages: &[Message]) -> Result<ProblemInstance> {
    let mut out = inst.clone();
    for row in &mut out.gains.h1 {
        row.fill(f64::MIN_POSITIVE);
    }
    let mut heard = vec![false; inst.n_outer()];
    for m in messages {
        if let (MessageKind::CsiReport, NodeId::Inner(j), Payload::Csi(gains)) = (m.kind, m.src, &m.payload) {
            for &(i, g) in gains {
                out.gains.h1[i][j] = g;
                heard[i] = true;
            }
        }
    }
    for (w, h) in out.weights.iter_mut().zip(heard) {
        if !h {
            *w = 0.0;
        }
    }
    out.validate()?;
    Ok(out)
}

/// Checks step ordering per flow, the outcome against centralized greedy,
/// and the collision-free message count.
pub fn verify_trace(trace: &ProtocolTrace, inst: &ProblemInstance) -> bool {
    let n_o = inst.n_outer();
    if trace.total_messages != trace.messages.len() {
        return false;
    }
    if trace.final_schedule.len() != n_o || trace.final_schedule.validate(inst.n_inner()).is_err() {
        return false;
    }
    if trace.final_schedule != solve_greedy(inst).schedule {
        return false;
    }
    if !ordering_ok(trace, n_o) {
        return false;
    }
    let discoveries = trace.count(MessageKind::IAmHere);
    let collision_free = discoveries == n_o;
    if collision_free && n_o > 0 && trace.total_messages != collision_free_count(n_o, inst.n_inner()) {
        return false;
    }
    true
}

fn ordering_ok(trace: &ProtocolTrace, n_o: usize) -> bool {
    let mut discovered = vec![false; n_o];
    let mut acked = vec![false; n_o];
    let mut activated = vec![false; n_o];
    let mut csi_seen = false;
    let mut broadcast_seen = false;
    let mut last_step = 0u8;
    for m in &trace.messages {
        let outer = |id: NodeId| match id {
            NodeId::Outer(i) if i < n_o => Some(i),
            _ => None,
        };
        match m.kind {
            MessageKind::IAmHere => {
                let Some(i) = outer(m.src) else { return false };
                if csi_seen || acked[i] {
                    return false;
                }
                discovered[i] = true;
            }
            MessageKind::IHearYouAck => {
                let Some(i) = outer(m.dst) else { return false };
                if !discovered[i] || acked[i] || csi_seen {
                    return false;
                }
                acked[i] = true;
            }
            MessageKind::CsiReport => {
                if broadcast_seen || m.dst != NodeId::Gnb {
                    return false;
                }
                csi_seen = true;
            }
            MessageKind::AssignmentBroadcast => {
                if !csi_seen || broadcast_seen || m.src != NodeId::Gnb {
                    return false;
                }
                broadcast_seen = true;
            }
            MessageKind::ActivationAck => {
                let Some(i) = outer(m.dst) else { return false };
                if !broadcast_seen || !acked[i] || activated[i] {
                    return false;
                }
                activated[i] = true;
            }
        }
        // Steps 3, 5 and 6 are global phases and may not interleave backwards.
        let step = m.kind.step();
        if step >= 3 && step < last_step {
            return false;
        }
        last_step = last_step.max(step);
    }
    true
}
