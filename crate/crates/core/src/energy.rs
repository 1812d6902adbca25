//! Environment chain, harvest distributions and battery dynamics.

use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on probability rows summing to one.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// Environment condition driving the harvester.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "G")]
    Good,
    #[serde(rename = "B")]
    Bad,
}

impl Condition {
    pub const ALL: [Condition; 2] = [Condition::Good, Condition::Bad];

    /// `0` for good, `1` for bad.
    pub fn index(self) -> usize {
        match self {
            Condition::Good => 0,
            Condition::Bad => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Condition::Good
        } else {
            Condition::Bad
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Condition::Good => 'G',
            Condition::Bad => 'B',
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// Two-state Markov chain over [`Condition`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvironmentChain {
    pub p_gg: f64,
    pub p_gb: f64,
    pub p_bg: f64,
    pub p_bb: f64,
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(name, format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

impl EnvironmentChain {
    pub fn new(p_gg: f64, p_gb: f64, p_bg: f64, p_bb: f64) -> Result<Self> {
        for (name, p) in [("p_gg", p_gg), ("p_gb", p_gb), ("p_bg", p_bg), ("p_bb", p_bb)] {
            check_probability(name, p)?;
        }
        if (p_gg + p_gb - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::param("p_gg + p_gb", format!("row sums to {}", p_gg + p_gb)));
        }
        if (p_bg + p_bb - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::param("p_bg + p_bb", format!("row sums to {}", p_bg + p_bb)));
        }
        Ok(Self { p_gg, p_gb, p_bg, p_bb })
    }

    /// Chain from the two probabilities of moving to (or staying in) `G`.
    pub fn from_good_entries(p_gg: f64, p_bg: f64) -> Result<Self> {
        Self::new(p_gg, 1.0 - p_gg, p_bg, 1.0 - p_bg)
    }

    pub fn transition(&self, from: Condition, to: Condition) -> f64 {
        match (from, to) {
            (Condition::Good, Condition::Good) => self.p_gg,
            (Condition::Good, Condition::Bad) => self.p_gb,
            (Condition::Bad, Condition::Good) => self.p_bg,
            (Condition::Bad, Condition::Bad) => self.p_bb,
        }
    }

    /// Next condition from one uniform draw.
    pub fn step<R: Rng + ?Sized>(&self, e: Condition, rng: &mut R) -> Condition {
        let u: f64 = rng.random();
        if u < self.transition(e, Condition::Good) {
            Condition::Good
        } else {
            Condition::Bad
        }
    }

    /// Long-run occupancy `(q_G, q_B)`, starting from `G` when the chain
    /// never leaves its initial state.
    pub fn stationary(&self) -> (f64, f64) {
        self.stationary_from(Condition::Good)
    }

    pub fn stationary_from(&self, start: Condition) -> (f64, f64) {
        let out = self.p_gb + self.p_bg;
        if out == 0.0 {
            return match start {
                Condition::Good => (1.0, 0.0),
                Condition::Bad => (0.0, 1.0),
            };
        }
        let q_g = self.p_bg / out;
        (q_g, 1.0 - q_g)
    }
}

/// Harvest law per condition, supported on `{0, …, b_max}`.
#[derive(Debug, Clone)]
pub struct HarvestDistribution {
    good: Vec<f64>,
    bad: Vec<f64>,
    samplers: [WeightedIndex<f64>; 2],
}

impl PartialEq for HarvestDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.good == other.good && self.bad == other.bad
    }
}

fn check_distribution(name: &str, probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::param(name, "distribution is empty"));
    }
    for (i, &p) in probs.iter().enumerate() {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::param(name, format!("entry {i} is {p}")));
        }
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(Error::param(name, format!("probabilities sum to {total}, expected 1")));
    }
    Ok(())
}

impl HarvestDistribution {
    /// Both vectors must have length `b_max + 1`; mass above the battery
    /// capacity has to be folded into the last entry by the caller.
    pub fn new(good: Vec<f64>, bad: Vec<f64>) -> Result<Self> {
        check_distribution("good", &good)?;
        check_distribution("bad", &bad)?;
        if good.len() != bad.len() {
            return Err(Error::param(
                "bad",
                format!("length {} differs from good length {}", bad.len(), good.len()),
            ));
        }
        let sampler = |p: &[f64]| {
            WeightedIndex::new(p.iter().copied())
                .map_err(|e| Error::param("harvest distribution", e.to_string()))
        };
        let samplers = [sampler(&good)?, sampler(&bad)?];
        Ok(Self { good, bad, samplers })
    }

    pub fn capacity(&self) -> u32 {
        (self.good.len() - 1) as u32
    }

    pub fn probabilities(&self, e: Condition) -> &[f64] {
        match e {
            Condition::Good => &self.good,
            Condition::Bad => &self.bad,
        }
    }

    pub fn prob(&self, e: Condition, r: u32) -> f64 {
        self.probabilities(e).get(r as usize).copied().unwrap_or(0.0)
    }

    pub fn mean(&self, e: Condition) -> f64 {
        self.probabilities(e)
            .iter()
            .enumerate()
            .map(|(i, p)| i as f64 * p)
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, e: Condition, rng: &mut R) -> u32 {
        self.samplers[e.index()].sample(rng) as u32
    }
}

/// Battery level with its capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatteryState {
    level: u32,
    capacity: u32,
}

impl BatteryState {
    pub fn new(level: u32, capacity: u32) -> Result<Self> {
        if level > capacity {
            return Err(Error::param(
                "battery level",
                format!("{level} exceeds capacity {capacity}"),
            ));
        }
        Ok(Self { level, capacity })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    /// Stores the harvest and then spends `power`; returns the energy that
    /// was available for the transmission.
    pub fn harvest_and_spend(&mut self, harvest: u32, power: u32) -> Result<u32> {
        let available = battery_after_harvest(self.level, harvest, self.capacity);
        self.level = battery_next(available, power)?;
        Ok(available)
    }
}

/// `min(b + r, capacity)`.
pub fn battery_after_harvest(b: u32, r: u32, capacity: u32) -> u32 {
    b.saturating_add(r).min(capacity)
}

/// Battery at the start of the next step once `power` has been spent.
pub fn battery_next(available: u32, power: u32) -> Result<u32> {
    available.checked_sub(power).ok_or_else(|| {
        Error::param(
            "power",
            format!("spending {power} exceeds available energy {available}"),
        )
    })
}

/// Everything about energy supply: environment, harvest, battery size and
/// the initial condition / battery level.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    pub chain: EnvironmentChain,
    pub harvest: HarvestDistribution,
    pub initial_battery: u32,
    pub initial_condition: Condition,
}

impl EnergyModel {
    pub fn new(
        chain: EnvironmentChain,
        harvest: HarvestDistribution,
        initial_battery: u32,
        initial_condition: Condition,
    ) -> Result<Self> {
        if initial_battery > harvest.capacity() {
            return Err(Error::param(
                "b0",
                format!(
                    "initial battery {initial_battery} exceeds capacity {}",
                    harvest.capacity()
                ),
            ));
        }
        Ok(Self {
            chain,
            harvest,
            initial_battery,
            initial_condition,
        })
    }

    pub fn b_max(&self) -> u32 {
        self.harvest.capacity()
    }
}
