use crate::energy::Condition;
use crate::threshold::ThresholdPolicy;

use super::{MdpState, StateSpace};

/// What the sensor knows when it picks a transmission power.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    /// Battery level before harvesting.
    pub battery: u32,
    pub harvest: u32,
    /// `min(battery + harvest, b_max)`, the most that may be spent.
    pub available: u32,
    pub condition: Condition,
    /// Ladder index of the previous remote covariance (not truncated).
    pub rung: usize,
}

/// Table of actions indexed by flat MDP state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LookupPolicy {
    space: StateSpace,
    actions: Vec<u32>,
}

impl LookupPolicy {
    pub fn new(space: StateSpace, actions: Vec<u32>) -> crate::Result<Self> {
        if actions.len() != space.len() {
            return Err(crate::Error::param(
                "lookup policy",
                format!("{} actions for {} states", actions.len(), space.len()),
            ));
        }
        for s in space.states() {
            if actions[s.flat_index] > s.m {
                return Err(crate::Error::InfeasibleAction {
                    action: actions[s.flat_index],
                    available: s.m,
                    condition: s.n.symbol(),
                    rung: s.l,
                });
            }
        }
        Ok(Self { space, actions })
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn actions(&self) -> &[u32] {
        &self.actions
    }

    pub fn action(&self, state: &MdpState) -> u32 {
        self.actions[state.flat_index]
    }
}

/// A stationary transmission-power rule.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// Arbitrary function of `(battery after harvest, condition, rung)`;
    /// rungs beyond the truncation reuse the top rung's action.
    Lookup(LookupPolicy),
    /// `min(available, R_condition)`.
    Threshold(ThresholdPolicy),
    /// Spend exactly what was just harvested.
    Greedy,
}

impl Policy {
    pub fn greedy() -> Self {
        Policy::Greedy
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Policy::Lookup(_) => "lookup",
            Policy::Threshold(_) => "threshold",
            Policy::Greedy => "greedy",
        }
    }

    pub fn decide(&self, d: &Decision) -> u32 {
        match self {
            Policy::Lookup(table) => {
                let space = table.space;
                let l = d.rung.min(space.n_trunc());
                table.actions[space.index(d.available, d.condition, l)]
            }
            Policy::Threshold(t) => t.action(d.available, d.condition),
            Policy::Greedy => d.harvest,
        }
    }

    /// Refuses rules built for a different battery capacity.
    pub fn check_battery(&self, b_max: u32) -> crate::Result<()> {
        let fits = match self {
            Policy::Lookup(table) => table.space.b_max() == b_max,
            Policy::Threshold(t) => t.r_good() <= b_max && t.r_bad() <= b_max,
            Policy::Greedy => true,
        };
        if !fits {
            return Err(crate::Error::param(
                "policy",
                format!("{} policy does not match battery capacity {b_max}", self.kind()),
            ));
        }
        Ok(())
    }

    /// Action as a function of the MDP state alone; `None` for rules that
    /// also look at the fresh harvest.
    pub fn action_at(&self, state: &MdpState) -> Option<u32> {
        match self {
            Policy::Lookup(table) => Some(table.action(state)),
            Policy::Threshold(t) => Some(t.action(state.m, state.n)),
            Policy::Greedy => None,
        }
    }
}
