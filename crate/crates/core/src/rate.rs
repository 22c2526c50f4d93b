//! Link capacities and the weighted sum-rate objective.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProblemInstance;

/// Partial injective assignment of outer UEs to inner UEs.
///
/// `assign[i] == None` leaves outer UE `i` silent.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule {
    pub assign: Vec<Option<usize>>,
}

impl Schedule {
    pub fn empty(n_o: usize) -> Self {
        Self {
            assign: vec![None; n_o],
        }
    }

    pub fn from_assign(assign: Vec<Option<usize>>) -> Self {
        Self { assign }
    }

    pub fn len(&self) -> usize {
        self.assign.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assign.is_empty()
    }

    pub fn active_count(&self) -> usize {
        self.assign.iter().filter(|a| a.is_some()).count()
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.assign[i].is_some()
    }

    /// Outer UEs currently assigned, in index order, with their relay.
    pub fn links(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.assign
            .iter()
            .enumerate()
            .filter_map(|(i, a)| a.map(|j| (i, j)))
    }

    /// Checks relay indices are in range and no relay serves two outer UEs.
    pub fn validate(&self, n_i: usize) -> Result<()> {
        let mut used = vec![false; n_i];
        for (i, j) in self.links() {
            if j >= n_i {
                return Err(Error::InvalidSchedule(format!(
                    "outer {i} assigned to inner {j}, only {n_i} inner UEs"
                )));
            }
            if std::mem::replace(&mut used[j], true) {
                return Err(Error::InvalidSchedule(format!(
                    "inner {j} assigned to more than one outer UE"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (n, a) in self.assign.iter().enumerate() {
            if n > 0 {
                write!(f, ", ")?;
            }
            match a {
                Some(j) => write!(f, "{j}")?,
                None => write!(f, "-")?,
            }
        }
        write!(f, "]")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// Hop-1 capacities `c1[i][j]` under the schedule's interference.
    pub c1: Vec<Vec<f64>>,
    /// Hop-2 (inner to gNodeB) capacities.
    pub c2: Vec<f64>,
    /// Feasible traffic rate of each outer UE.
    pub r1: Vec<f64>,
    pub weighted_sum: f64,
}

impl RateReport {
    /// Unweighted sum of the feasible rates.
    pub fn sum_rate(&self) -> f64 {
        self.r1.iter().sum()
    }
}

#[inline]
pub(crate) fn shannon(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

/// SINR-based hop-1 capacities. Every active outer UE interferes at every
/// inner UE, whichever relay it is assigned to.
pub fn hop1_capacities(inst: &ProblemInstance, sched: &Schedule) -> Vec<Vec<f64>> {
    let g = &inst.gains;
    let n_i = inst.n_inner();
    (0..inst.n_outer())
        .map(|i| {
            if !sched.is_active(i) {
                return vec![0.0; n_i];
            }
            (0..n_i)
                .map(|j| {
                    let interference: f64 = sched
                        .links()
                        .filter(|&(k, _)| k != i)
                        .map(|(k, _)| g.p_outer[k] * g.h1[k][j])
                        .sum();
                    shannon(g.p_outer[i] * g.h1[i][j] / (g.noise + interference))
                })
                .collect()
        })
        .collect()
}

/// Interference-free inner-to-gNodeB capacities.
pub fn hop2_capacities(inst: &ProblemInstance) -> Vec<f64> {
    let g = &inst.gains;
    g.h2.iter()
        .zip(&g.p_inner)
        .map(|(h, p)| shannon(p * h / g.noise))
        .collect()
}

/// Largest outer rate allowed by both hops, floored at zero.
#[inline]
pub fn feasible_rate(c1_ij: f64, c2_j: f64, relay_r: f64) -> f64 {
    c1_ij.min(c2_j - relay_r).max(0.0)
}

pub fn evaluate(inst: &ProblemInstance, sched: &Schedule) -> Result<RateReport> {
    if sched.len() != inst.n_outer() {
        return Err(Error::DimensionMismatch(format!(
            "schedule covers {} outer UEs, instance has {}",
            sched.len(),
            inst.n_outer()
        )));
    }
    sched.validate(inst.n_inner())?;
    let c1 = hop1_capacities(inst, sched);
    let c2 = hop2_capacities(inst);
    let r1: Vec<f64> = sched
        .assign
        .iter()
        .enumerate()
        .map(|(i, a)| match *a {
            Some(j) => feasible_rate(c1[i][j], c2[j], inst.relay_traffic[j]),
            None => 0.0,
        })
        .collect();
    let weighted_sum = r1.iter().zip(&inst.weights).map(|(r, w)| w * r).sum();
    Ok(RateReport {
        c1,
        c2,
        r1,
        weighted_sum,
    })
}

/// Objective-only evaluation used inside the search loops. Computes just
/// the capacities of assigned links.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    inst: &'a ProblemInstance,
    /// `c2[j] - relay_traffic[j]`: residual hop-2 capacity.
    residual: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    pub fn new(inst: &'a ProblemInstance) -> Self {
        let residual = hop2_capacities(inst)
            .into_iter()
            .zip(&inst.relay_traffic)
            .map(|(c, r)| c - r)
            .collect();
        Self { inst, residual }
    }

    pub fn instance(&self) -> &'a ProblemInstance {
        self.inst
    }

    pub fn residual(&self, j: usize) -> f64 {
        self.residual[j]
    }

    /// Weighted sum rate of a C3-valid assignment vector.
    pub fn weighted_sum(&self, assign: &[Option<usize>]) -> f64 {
        let g = &self.inst.gains;
        let mut total = 0.0;
        for (i, a) in assign.iter().enumerate() {
            let Some(j) = *a else { continue };
            let w = self.inst.weights[i];
            if w == 0.0 {
                continue;
            }
            let mut interference = 0.0;
            for (k, b) in assign.iter().enumerate() {
                if k != i && b.is_some() {
                    interference += g.p_outer[k] * g.h1[k][j];
                }
            }
            let c1 = shannon(g.p_outer[i] * g.h1[i][j] / (g.noise + interference));
            total += w * c1.min(self.residual[j]).max(0.0);
        }
        total
    }
}
