//! Schedule search: capped exhaustive search, greedy link addition and the
//! random / best-channel baselines.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::ProblemInstance;
use crate::rate::{evaluate, shannon, Evaluator, RateReport, Schedule};

/// Default number of schedules examined by the exhaustive search.
pub const DEFAULT_CAP: u64 = 50_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub schedule: Schedule,
    pub report: RateReport,
    /// Candidate schedules evaluated.
    pub searched: u64,
    /// True iff the whole search space was enumerated.
    pub exhaustive_complete: bool,
    /// Links added (greedy) or 0 for one-shot solvers.
    pub steps: usize,
}

impl SolveResult {
    fn new(inst: &ProblemInstance, schedule: Schedule, searched: u64, complete: bool, steps: usize) -> Self {
        let report = evaluate(inst, &schedule).expect("solver produced an invalid schedule");
        Self {
            schedule,
            report,
            searched,
            exhaustive_complete: complete,
            steps,
        }
    }

    pub fn weighted_sum(&self) -> f64 {
        self.report.weighted_sum
    }
}

/// Size of the raw assignment space `(n_i + 1)^n_o`, saturating.
pub fn raw_space_size(n_o: usize, n_i: usize) -> u128 {
    let base = n_i as u128 + 1;
    (0..n_o).try_fold(1u128, |acc, _| acc.checked_mul(base)).unwrap_or(u128::MAX)
}

/// Number of assignments that use each inner UE at most once, saturating.
pub fn valid_schedule_count(n_o: usize, n_i: usize) -> u128 {
    // sum_k C(n_o, k) * n_i! / (n_i - k)!
    let mut total: u128 = 0;
    let mut choose: u128 = 1;
    let mut perm: u128 = 1;
    for k in 0..=n_o.min(n_i) {
        if k > 0 {
            choose = match choose.checked_mul((n_o - k + 1) as u128) {
                Some(v) => v / k as u128,
                None => return u128::MAX,
            };
            perm = match perm.checked_mul((n_i - k + 1) as u128) {
                Some(v) => v,
                None => return u128::MAX,
            };
        }
        let term = match choose.checked_mul(perm) {
            Some(v) => v,
            None => return u128::MAX,
        };
        total = total.saturating_add(term);
    }
    total
}

/// Stream of candidate schedules for the exhaustive search.
///
/// When the raw space `(n_i+1)^n_o` fits within `cap`, every valid schedule
/// is yielded once in lexicographic order (`None` before relay `0`).
/// Otherwise the all-`None` schedule is followed by `cap - 1` schedules
/// drawn uniformly from the valid set, with replacement.
pub struct ScheduleStream<'r, R: Rng + ?Sized> {
    inner: StreamKind<'r, R>,
}

enum StreamKind<'r, R: Rng + ?Sized> {
    Full(Odometer),
    Sampled {
        sampler: UniformSchedules,
        rng: &'r mut R,
        remaining: u64,
        emitted_empty: bool,
    },
}

impl<R: Rng + ?Sized> ScheduleStream<'_, R> {
    pub fn is_exhaustive(&self) -> bool {
        matches!(self.inner, StreamKind::Full(_))
    }
}

impl<R: Rng + ?Sized> Iterator for ScheduleStream<'_, R> {
    type Item = Schedule;

    fn next(&mut self) -> Option<Schedule> {
        match &mut self.inner {
            StreamKind::Full(odo) => odo.next(),
            StreamKind::Sampled {
                sampler,
                rng,
                remaining,
                emitted_empty,
            } => {
                if *remaining == 0 {
                    return None;
                }
                *remaining -= 1;
                if !*emitted_empty {
                    *emitted_empty = true;
                    return Some(Schedule::empty(sampler.n_o));
                }
                Some(sampler.sample(*rng))
            }
        }
    }
}

pub fn enumerate_schedules<R: Rng + ?Sized>(n_o: usize, n_i: usize, cap: u64, rng: &mut R) -> ScheduleStream<'_, R> {
    assert!(cap >= 1, "cap must be at least 1");
    let inner = if raw_space_size(n_o, n_i) <= cap as u128 {
        StreamKind::Full(Odometer::new(n_o, n_i))
    } else {
        StreamKind::Sampled {
            sampler: UniformSchedules::new(n_o, n_i),
            rng,
            remaining: cap,
            emitted_empty: false,
        }
    };
    ScheduleStream { inner }
}

/// Lexicographic walk over `{None, 0..n_i}^n_o` that skips vectors reusing
/// an inner UE.
struct Odometer {
    n_i: usize,
    digits: Vec<usize>,
    started: bool,
    done: bool,
}

impl Odometer {
    fn new(n_o: usize, n_i: usize) -> Self {
        Self {
            n_i,
            digits: vec![0; n_o],
            started: false,
            done: false,
        }
    }

    fn advance(&mut self) -> bool {
        for d in self.digits.iter_mut().rev() {
            if *d < self.n_i {
                *d += 1;
                return true;
            }
            *d = 0;
        }
        false
    }

    fn current_valid(&self) -> bool {
        let mut used = vec![false; self.n_i + 1];
        self.digits
            .iter()
            .filter(|&&d| d > 0)
            .all(|&d| !std::mem::replace(&mut used[d], true))
    }
}

impl Iterator for Odometer {
    type Item = Schedule;

    fn next(&mut self) -> Option<Schedule> {
        if self.done {
            return None;
        }
        if self.started {
            loop {
                if !self.advance() {
                    self.done = true;
                    return None;
                }
                if self.current_valid() {
                    break;
                }
            }
        }
        self.started = true;
        Some(Schedule::from_assign(
            self.digits.iter().map(|&d| d.checked_sub(1)).collect(),
        ))
    }
}

/// Uniform sampler over valid schedules: draw the number of active links
/// `k` with probability proportional to `C(n_o,k) * n_i!/(n_i-k)!`, then a
/// uniform `k`-subset of outer UEs and a uniform injective relay map.
struct UniformSchedules {
    n_o: usize,
    n_i: usize,
    cdf: Vec<f64>,
}

impl UniformSchedules {
    fn new(n_o: usize, n_i: usize) -> Self {
        let n = n_o.max(n_i);
        let mut ln_fact = vec![0.0f64; n + 1];
        for m in 1..=n {
            ln_fact[m] = ln_fact[m - 1] + (m as f64).ln();
        }
        let kmax = n_o.min(n_i);
        let log_w: Vec<f64> = (0..=kmax)
            .map(|k| ln_fact[n_o] - ln_fact[k] - ln_fact[n_o - k] + ln_fact[n_i] - ln_fact[n_i - k])
            .collect();
        let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = log_w
            .iter()
            .map(|lw| {
                acc += (lw - top).exp();
                acc
            })
            .collect();
        for c in &mut cdf {
            *c /= acc;
        }
        Self { n_o, n_i, cdf }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Schedule {
        let u: f64 = rng.gen();
        let k = self.cdf.iter().position(|&c| u < c).unwrap_or(self.cdf.len() - 1);
        let mut assign = vec![None; self.n_o];
        let outers = index::sample(rng, self.n_o, k);
        let mut inners = index::sample(rng, self.n_i, k).into_vec();
        inners.shuffle(rng);
        for (i, j) in outers.iter().zip(inners) {
            assign[i] = Some(j);
        }
        Schedule::from_assign(assign)
    }
}

/// Best schedule among those produced by [`enumerate_schedules`]. Ties go to
/// the lexicographically smallest assignment vector.
pub fn solve_exhaustive<R: Rng + ?Sized>(inst: &ProblemInstance, cap: u64, rng: &mut R) -> SolveResult {
    let ev = Evaluator::new(inst);
    let stream = enumerate_schedules(inst.n_outer(), inst.n_inner(), cap, rng);
    let complete = stream.is_exhaustive();
    let mut searched = 0u64;
    let mut best: Option<(f64, Schedule)> = None;
    for cand in stream {
        searched += 1;
        let v = ev.weighted_sum(&cand.assign);
        let better = match &best {
            None => true,
            Some((bv, bs)) => v > *bv || (v == *bv && cand < *bs),
        };
        if better {
            best = Some((v, cand));
        }
    }
    let (_, schedule) = best.unwrap_or_else(|| (0.0, Schedule::empty(inst.n_outer())));
    SolveResult::new(inst, schedule, searched, complete, 0)
}

/// Incremental state for greedy link addition: the active links, the
/// interference each one sees and the total received power at every inner
/// UE.
struct GreedyState<'a> {
    ev: Evaluator<'a>,
    assign: Vec<Option<usize>>,
    relay_used: Vec<bool>,
    /// (outer, inner, interference at the inner UE from other active links)
    links: Vec<(usize, usize, f64)>,
    rx_power: Vec<f64>,
}

impl<'a> GreedyState<'a> {
    fn new(inst: &'a ProblemInstance) -> Self {
        Self {
            ev: Evaluator::new(inst),
            assign: vec![None; inst.n_outer()],
            relay_used: vec![false; inst.n_inner()],
            links: Vec::new(),
            rx_power: vec![0.0; inst.n_inner()],
        }
    }

    fn link_value(&self, i: usize, j: usize, interference: f64) -> f64 {
        let inst = self.ev.instance();
        let g = &inst.gains;
        let c1 = shannon(g.p_outer[i] * g.h1[i][j] / (g.noise + interference));
        inst.weights[i] * c1.min(self.ev.residual(j)).max(0.0)
    }

    fn current_sum(&self) -> f64 {
        self.links
            .iter()
            .map(|&(i, j, intf)| self.link_value(i, j, intf))
            .sum()
    }

    /// Weighted sum if `(i, j)` were added, all existing links re-rated.
    fn sum_with(&self, i: usize, j: usize) -> f64 {
        let g = &self.ev.instance().gains;
        let p = g.p_outer[i];
        let existing: f64 = self
            .links
            .iter()
            .map(|&(k, r, intf)| self.link_value(k, r, intf + p * g.h1[i][r]))
            .sum();
        existing + self.link_value(i, j, self.rx_power[j])
    }

    fn add(&mut self, i: usize, j: usize) {
        let g = &self.ev.instance().gains;
        let p = g.p_outer[i];
        for (_, r, intf) in &mut self.links {
            *intf += p * g.h1[i][*r];
        }
        self.links.push((i, j, self.rx_power[j]));
        for (rx, h) in self.rx_power.iter_mut().zip(&g.h1[i]) {
            *rx += p * h;
        }
        self.assign[i] = Some(j);
        self.relay_used[j] = true;
    }
}

/// Greedy link addition: from the empty schedule, repeatedly add the
/// (outer, inner) pair giving the largest weighted sum once every active
/// link is re-rated under the new interference; stop when no pair strictly
/// improves on the current sum. Ties go to the smallest `(i, j)`.
///
/// Outer UEs with zero weight are never candidates.
pub fn solve_greedy(inst: &ProblemInstance) -> SolveResult {
    let mut st = GreedyState::new(inst);
    let mut searched = 0u64;
    let mut steps = 0usize;
    let mut current = 0.0;
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..inst.n_outer() {
            if st.assign[i].is_some() || inst.weights[i] == 0.0 {
                continue;
            }
            for j in 0..inst.n_inner() {
                if st.relay_used[j] {
                    continue;
                }
                searched += 1;
                let v = st.sum_with(i, j);
                if best.map_or(true, |(bv, _, _)| v > bv) {
                    best = Some((v, i, j));
                }
            }
        }
        match best {
            Some((v, i, j)) if v > current => {
                st.add(i, j);
                steps += 1;
                current = st.current_sum();
            }
            _ => break,
        }
    }
    let schedule = Schedule::from_assign(st.assign);
    SolveResult::new(inst, schedule, searched.max(1), false, steps)
}

/// Each outer UE, in index order, takes a uniformly random unused inner UE.
pub fn solve_random<R: Rng + ?Sized>(inst: &ProblemInstance, rng: &mut R) -> SolveResult {
    let mut free: Vec<usize> = (0..inst.n_inner()).collect();
    let assign = (0..inst.n_outer())
        .map(|_| {
            if free.is_empty() {
                None
            } else {
                Some(free.remove(rng.gen_range(0..free.len())))
            }
        })
        .collect();
    SolveResult::new(inst, Schedule::from_assign(assign), 1, false, 0)
}

/// Each outer UE, in index order, takes the unused inner UE with the
/// strongest received power. Interference is ignored while choosing.
pub fn solve_best_channel(inst: &ProblemInstance) -> SolveResult {
    let g = &inst.gains;
    let mut used = vec![false; inst.n_inner()];
    let assign = (0..inst.n_outer())
        .map(|i| {
            let mut best: Option<(f64, usize)> = None;
            for j in (0..inst.n_inner()).filter(|&j| !used[j]) {
                let rx = g.p_outer[i] * g.h1[i][j];
                if best.map_or(true, |(b, _)| rx > b) {
                    best = Some((rx, j));
                }
            }
            best.map(|(_, j)| {
                used[j] = true;
                j
            })
        })
        .collect();
    SolveResult::new(inst, Schedule::from_assign(assign), 1, false, 0)
}
