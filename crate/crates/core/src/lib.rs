//! Relay selection for two-hop sidelink networks.
//!
//! Outer UEs cannot reach the gNodeB directly and must be assigned to inner
//! (relay) UEs. This crate evaluates the weighted sum rate of such
//! assignments under SINR-limited hop-1 links and relay-traffic-limited
//! hop-2 links, searches for good assignments (capped exhaustive search,
//! greedy link addition, random and best-channel baselines), simulates
//! fairness-oriented slotted schedulers, and emulates the distributed
//! discovery/assignment message exchange.

pub mod error;
pub mod harness;
pub mod model;
pub mod parallel;
pub mod protocol;
pub mod rate;
pub mod sched;
pub mod solvers;
pub mod stats;

pub use error::{Error, Result};
pub use model::{GainTable, ModelConfig, Point, ProblemInstance, Topology};
pub use rate::{RateReport, Schedule};
pub use solvers::SolveResult;
