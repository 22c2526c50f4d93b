//! Network geometry, channel gains and problem instances.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.dist(&Point::ORIGIN)
    }
}

/// gNodeB at the origin, inner UEs on one annulus, outer UEs on a wider one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub gnb: Point,
    pub inner: Vec<Point>,
    pub outer: Vec<Point>,
}

/// Optional small-scale fading applied on top of path loss.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fading {
    #[default]
    None,
    /// Unit-mean exponential power gain per link.
    Rayleigh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub n_o: usize,
    pub n_i: usize,
    pub r_in_min: f64,
    pub r_in_max: f64,
    pub r_out_min: f64,
    pub r_out_max: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    pub noise: f64,
    /// Transmit power shared by every UE.
    pub power: f64,
    /// Relay traffic is drawn from `[0, r_max]`.
    pub r_max: f64,
    pub fading: Fading,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_o: 4,
            n_i: 4,
            r_in_min: 1.5,
            r_in_max: 2.5,
            r_out_min: 3.5,
            r_out_max: 4.5,
            alpha: 2.0,
            noise: 1.0,
            power: 1.0,
            r_max: 0.0,
            fading: Fading::None,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Square configuration (`n_i = n_o`) with every other field at its default.
    pub fn square(n: usize) -> Self {
        Self {
            n_o: n,
            n_i: n,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.r_in_min,
            self.r_in_max,
            self.r_out_min,
            self.r_out_max,
            self.alpha,
            self.noise,
            self.power,
            self.r_max,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("non-finite parameter".into()));
        }
        if self.alpha < 0.0 {
            return Err(Error::InvalidConfig(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if self.noise <= 0.0 {
            return Err(Error::InvalidConfig(format!("noise must be > 0, got {}", self.noise)));
        }
        if self.power <= 0.0 {
            return Err(Error::InvalidConfig(format!("power must be > 0, got {}", self.power)));
        }
        if self.r_max < 0.0 {
            return Err(Error::InvalidConfig(format!("r_max must be >= 0, got {}", self.r_max)));
        }
        if !(0.0 <= self.r_in_min
            && self.r_in_min <= self.r_in_max
            && self.r_in_max < self.r_out_min
            && self.r_out_min <= self.r_out_max)
        {
            return Err(Error::InvalidConfig(format!(
                "radii must satisfy 0 <= {} <= {} < {} <= {}",
                self.r_in_min, self.r_in_max, self.r_out_min, self.r_out_max
            )));
        }
        Ok(())
    }
}

/// Channel gains, powers and noise: everything the rate formulas consume.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTable {
    /// `h1[i][j]`: outer `i` to inner `j`.
    pub h1: Vec<Vec<f64>>,
    /// `h2[j]`: inner `j` to its serving gNodeB.
    pub h2: Vec<f64>,
    pub p_outer: Vec<f64>,
    pub p_inner: Vec<f64>,
    pub noise: f64,
}

impl GainTable {
    pub fn n_outer(&self) -> usize {
        self.h1.len()
    }

    pub fn n_inner(&self) -> usize {
        self.h2.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (n_o, n_i) = (self.n_outer(), self.n_inner());
        if let Some(row) = self.h1.iter().position(|r| r.len() != n_i) {
            return Err(Error::DimensionMismatch(format!(
                "h1 row {row} has {} entries, expected {n_i}",
                self.h1[row].len()
            )));
        }
        if self.p_outer.len() != n_o || self.p_inner.len() != n_i {
            return Err(Error::DimensionMismatch(format!(
                "power vectors have lengths {}/{}, expected {n_o}/{n_i}",
                self.p_outer.len(),
                self.p_inner.len()
            )));
        }
        let positive = |v: &f64| v.is_finite() && *v > 0.0;
        if !self.h1.iter().flatten().all(positive) || !self.h2.iter().all(positive) {
            return Err(Error::InvalidInstance("gains must be finite and > 0".into()));
        }
        if !self.p_outer.iter().chain(&self.p_inner).all(positive) {
            return Err(Error::InvalidInstance("powers must be finite and > 0".into()));
        }
        if !positive(&self.noise) {
            return Err(Error::InvalidInstance("noise must be finite and > 0".into()));
        }
        Ok(())
    }
}

/// One relay-selection problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceDoc", into = "InstanceDoc")]
pub struct ProblemInstance {
    pub gains: GainTable,
    /// Own traffic of each inner UE, consuming part of its gNodeB link.
    pub relay_traffic: Vec<f64>,
    pub weights: Vec<f64>,
    /// Serving gNodeB of each inner UE.
    pub gnb_of: Vec<usize>,
}

impl ProblemInstance {
    /// Instance with unit weights, zero relay traffic and a single gNodeB.
    pub fn new(gains: GainTable) -> Result<Self> {
        let (n_o, n_i) = (gains.n_outer(), gains.n_inner());
        let inst = Self {
            gains,
            relay_traffic: vec![0.0; n_i],
            weights: vec![1.0; n_o],
            gnb_of: vec![0; n_i],
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn n_outer(&self) -> usize {
        self.gains.n_outer()
    }

    pub fn n_inner(&self) -> usize {
        self.gains.n_inner()
    }

    /// Weights may be zero here; the fair scheduler drives empty queues to
    /// zero weight. Serialized instances require strictly positive weights.
    pub fn validate(&self) -> Result<()> {
        self.gains.validate()?;
        let (n_o, n_i) = (self.n_outer(), self.n_inner());
        if self.relay_traffic.len() != n_i || self.gnb_of.len() != n_i {
            return Err(Error::DimensionMismatch(format!(
                "relay_traffic/gnb_of lengths {}/{}, expected {n_i}",
                self.relay_traffic.len(),
                self.gnb_of.len()
            )));
        }
        if self.weights.len() != n_o {
            return Err(Error::DimensionMismatch(format!(
                "weights has {} entries, expected {n_o}",
                self.weights.len()
            )));
        }
        if !self.relay_traffic.iter().all(|r| r.is_finite() && *r >= 0.0) {
            return Err(Error::InvalidInstance("relay traffic must be finite and >= 0".into()));
        }
        if !self.weights.iter().all(|w| w.is_finite() && *w >= 0.0) {
            return Err(Error::InvalidInstance("weights must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        self.weights = weights;
        self.validate()?;
        Ok(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Flat on-disk layout of a [`ProblemInstance`].
#[derive(Serialize, Deserialize)]
struct InstanceDoc {
    n_o: usize,
    n_i: usize,
    h1: Vec<Vec<f64>>,
    h2: Vec<f64>,
    p_outer: Vec<f64>,
    p_inner: Vec<f64>,
    noise: f64,
    relay_traffic: Vec<f64>,
    weights: Vec<f64>,
    gnb_of: Vec<usize>,
}

impl TryFrom<InstanceDoc> for ProblemInstance {
    type Error = Error;

    fn try_from(doc: InstanceDoc) -> Result<Self> {
        if doc.h1.len() != doc.n_o || doc.h2.len() != doc.n_i {
            return Err(Error::DimensionMismatch(format!(
                "declared n_o={} n_i={} but h1 has {} rows and h2 {} entries",
                doc.n_o,
                doc.n_i,
                doc.h1.len(),
                doc.h2.len()
            )));
        }
        if !doc.weights.iter().all(|w| *w > 0.0) {
            return Err(Error::InvalidInstance("weights must be > 0".into()));
        }
        let inst = ProblemInstance {
            gains: GainTable {
                h1: doc.h1,
                h2: doc.h2,
                p_outer: doc.p_outer,
                p_inner: doc.p_inner,
                noise: doc.noise,
            },
            relay_traffic: doc.relay_traffic,
            weights: doc.weights,
            gnb_of: doc.gnb_of,
        };
        inst.validate()?;
        Ok(inst)
    }
}

impl From<ProblemInstance> for InstanceDoc {
    fn from(p: ProblemInstance) -> Self {
        InstanceDoc {
            n_o: p.n_outer(),
            n_i: p.n_inner(),
            h1: p.gains.h1,
            h2: p.gains.h2,
            p_outer: p.gains.p_outer,
            p_inner: p.gains.p_inner,
            noise: p.gains.noise,
            relay_traffic: p.relay_traffic,
            weights: p.weights,
            gnb_of: p.gnb_of,
        }
    }
}

/// Uniform-in-area sample from the annulus `r_min <= |p| <= r_max`.
fn sample_annulus<R: Rng + ?Sized>(rng: &mut R, r_min: f64, r_max: f64) -> Point {
    let (a, b) = (r_min * r_min, r_max * r_max);
    let u: f64 = rng.gen();
    let r = (a + u * (b - a)).sqrt().clamp(r_min, r_max);
    let theta = 2.0 * PI * rng.gen::<f64>();
    Point::new(r * theta.cos(), r * theta.sin())
}

pub fn gen_topology<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Topology {
    let inner = (0..cfg.n_i)
        .map(|_| sample_annulus(rng, cfg.r_in_min, cfg.r_in_max))
        .collect();
    let outer = (0..cfg.n_o)
        .map(|_| sample_annulus(rng, cfg.r_out_min, cfg.r_out_max))
        .collect();
    Topology {
        gnb: Point::ORIGIN,
        inner,
        outer,
    }
}

/// Distance-based gain `d^-alpha`.
pub fn path_gain(d: f64, alpha: f64) -> Result<f64> {
    if d <= 0.0 || !d.is_finite() {
        return Err(Error::DegenerateGeometry(format!("distance {d}")));
    }
    let g = d.powf(-alpha);
    if !(g.is_finite() && g > 0.0) {
        return Err(Error::DegenerateGeometry(format!("gain {g} at distance {d}")));
    }
    Ok(g)
}

pub fn gains_from_topology(topo: &Topology, cfg: &ModelConfig) -> Result<GainTable> {
    let h1 = topo
        .outer
        .iter()
        .map(|o| {
            topo.inner
                .iter()
                .map(|i| path_gain(o.dist(i), cfg.alpha))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let h2 = topo
        .inner
        .iter()
        .map(|i| path_gain(i.dist(&topo.gnb), cfg.alpha))
        .collect::<Result<Vec<_>>>()?;
    Ok(GainTable {
        h1,
        h2,
        p_outer: vec![cfg.power; topo.outer.len()],
        p_inner: vec![cfg.power; topo.inner.len()],
        noise: cfg.noise,
    })
}

/// Random instance: topology, path-loss gains, optional fading, relay
/// traffic uniform on `[0, r_max]` and unit weights.
///
/// Relay traffic is drawn as `r_max * u` with `u ~ U[0,1)` regardless of
/// `r_max`, so instances that differ only in `r_max` share geometry.
pub fn gen_instance<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Result<ProblemInstance> {
    cfg.validate()?;
    let topo = gen_topology(cfg, rng);
    let mut gains = gains_from_topology(&topo, cfg)?;
    if cfg.fading == Fading::Rayleigh {
        for g in gains.h1.iter_mut().flatten().chain(gains.h2.iter_mut()) {
            let f: f64 = Exp1.sample(rng);
            *g *= f.max(f64::MIN_POSITIVE);
        }
    }
    let relay_traffic = (0..cfg.n_i).map(|_| cfg.r_max * rng.gen::<f64>()).collect();
    let inst = ProblemInstance {
        gains,
        relay_traffic,
        weights: vec![1.0; cfg.n_o],
        gnb_of: vec![0; cfg.n_i],
    };
    inst.validate()?;
    Ok(inst)
}
