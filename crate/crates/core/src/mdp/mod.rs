//! Average-cost MDP over `(battery after harvest m, condition n, rung l)`.
//!
//! The covariance component lives on the ladder `h^l(P̄)`; it is truncated at
//! rung `n_trunc`, where a drop keeps the chain on the top rung.

mod evaluate;
mod policy;
mod rvi;

use std::io::Write;

pub use evaluate::PolicyEvaluation;
pub use policy::{Decision, LookupPolicy, Policy};
pub use rvi::{SolveResult, RVI_DEFAULT_MAX_ITER, RVI_DEFAULT_TOL};

use crate::energy::{battery_after_harvest, Condition};
use crate::error::{Error, Result};
use crate::kalman::CovarianceLadder;
use crate::scenario::Scenario;

pub const DEFAULT_N_TRUNC: usize = 30;

/// Largest number of deterministic stationary policies [`MdpProblem::brute_force_average_cost`] will enumerate.
pub const BRUTE_FORCE_LIMIT: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MdpState {
    pub m: u32,
    pub n: Condition,
    pub l: usize,
    pub flat_index: usize,
}

/// Indexing of the truncated state space: `m` slowest, then `n`, then `l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    b_max: u32,
    n_trunc: usize,
}

impl StateSpace {
    pub fn new(b_max: u32, n_trunc: usize) -> Self {
        Self { b_max, n_trunc }
    }

    pub fn b_max(&self) -> u32 {
        self.b_max
    }

    pub fn n_trunc(&self) -> usize {
        self.n_trunc
    }

    pub fn len(&self) -> usize {
        (self.b_max as usize + 1) * 2 * (self.n_trunc + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, m: u32, n: Condition, l: usize) -> usize {
        debug_assert!(m <= self.b_max && l <= self.n_trunc);
        ((m as usize) * 2 + n.index()) * (self.n_trunc + 1) + l
    }

    pub fn state(&self, flat_index: usize) -> MdpState {
        let rungs = self.n_trunc + 1;
        let l = flat_index % rungs;
        let mn = flat_index / rungs;
        MdpState {
            m: (mn / 2) as u32,
            n: Condition::from_index(mn % 2),
            l,
            flat_index,
        }
    }

    pub fn states(&self) -> impl Iterator<Item = MdpState> + '_ {
        (0..self.len()).map(|i| self.state(i))
    }
}

/// Truncated MDP with its kernel and stage costs tabulated for every
/// feasible `(state, action)` pair.
#[derive(Debug, Clone)]
pub struct MdpProblem {
    scenario: Scenario,
    ladder: CovarianceLadder,
    space: StateSpace,
    kernels: Vec<Vec<Vec<(usize, f64)>>>,
    costs: Vec<Vec<f64>>,
}

impl MdpProblem {
    pub fn new(scenario: &Scenario, n_trunc: usize) -> Result<Self> {
        if n_trunc == 0 {
            return Err(Error::param("n_trunc", "truncation depth must be at least 1"));
        }
        let ladder = scenario.ladder(n_trunc)?;
        let space = StateSpace::new(scenario.b_max(), n_trunc);
        let mut problem = Self {
            scenario: scenario.clone(),
            ladder,
            space,
            kernels: Vec::new(),
            costs: Vec::new(),
        };
        let mut kernels = Vec::with_capacity(space.len());
        let mut costs = Vec::with_capacity(space.len());
        for s in space.states() {
            let actions = 0..=s.m;
            kernels.push(actions.clone().map(|a| problem.kernel_row(&s, a)).collect());
            costs.push(actions.map(|a| problem.cost_of(&s, a)).collect());
        }
        problem.kernels = kernels;
        problem.costs = costs;
        Ok(problem)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn ladder(&self) -> &CovarianceLadder {
        &self.ladder
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn n_trunc(&self) -> usize {
        self.space.n_trunc
    }

    pub fn state(&self, flat_index: usize) -> MdpState {
        self.space.state(flat_index)
    }

    pub fn states(&self) -> impl Iterator<Item = MdpState> + '_ {
        self.space.states()
    }

    /// Feasible powers at a state: `0..=m`.
    pub fn actions(&self, state: &MdpState) -> std::ops::RangeInclusive<u32> {
        0..=state.m
    }

    fn check_action(&self, state: &MdpState, action: u32) -> Result<()> {
        if action > state.m {
            return Err(Error::InfeasibleAction {
                action,
                available: state.m,
                condition: state.n.symbol(),
                rung: state.l,
            });
        }
        Ok(())
    }

    fn next_rung(&self, l: usize) -> usize {
        (l + 1).min(self.space.n_trunc)
    }

    fn kernel_row(&self, state: &MdpState, action: u32) -> Vec<(usize, f64)> {
        let energy = &self.scenario.energy;
        let b_max = self.space.b_max;
        let drop = self.scenario.channel.drop_probability(action);
        let residual = state.m - action;
        let up = self.next_rung(state.l);

        let mut row = vec![0.0; self.space.len()];
        for next_cond in Condition::ALL {
            let pe = energy.chain.transition(state.n, next_cond);
            if pe == 0.0 {
                continue;
            }
            for (r, &pr) in energy.harvest.probabilities(next_cond).iter().enumerate() {
                if pr == 0.0 {
                    continue;
                }
                let m_next = battery_after_harvest(residual, r as u32, b_max);
                let mass = pe * pr;
                row[self.space.index(m_next, next_cond, up)] += mass * drop;
                row[self.space.index(m_next, next_cond, 0)] += mass * (1.0 - drop);
            }
        }
        row.into_iter()
            .enumerate()
            .filter(|&(_, p)| p > 0.0)
            .collect()
    }

    fn cost_of(&self, state: &MdpState, action: u32) -> f64 {
        let drop = self.scenario.channel.drop_probability(action);
        drop * self.ladder.trace(self.next_rung(state.l)) + (1.0 - drop) * self.ladder.trace(0)
    }

    /// Sparse one-step law of the next state.
    pub fn transition_kernel(&self, state: &MdpState, action: u32) -> Result<Vec<(MdpState, f64)>> {
        self.check_action(state, action)?;
        Ok(self.kernels[state.flat_index][action as usize]
            .iter()
            .map(|&(j, p)| (self.space.state(j), p))
            .collect())
    }

    /// Expected trace of the remote covariance produced by spending `action`.
    pub fn stage_cost(&self, state: &MdpState, action: u32) -> Result<f64> {
        self.check_action(state, action)?;
        Ok(self.costs[state.flat_index][action as usize])
    }

    pub(crate) fn kernel_unchecked(&self, s: usize, a: u32) -> &[(usize, f64)] {
        &self.kernels[s][a as usize]
    }

    pub(crate) fn cost_unchecked(&self, s: usize, a: u32) -> f64 {
        self.costs[s][a as usize]
    }

    /// Law of the first MDP state given the configured `b₀`, `e₀` and
    /// `P₀ = P̄`: the environment moves once, then the harvest is stored.
    pub fn initial_distribution(&self) -> Vec<f64> {
        let energy = &self.scenario.energy;
        let mut mu = vec![0.0; self.space.len()];
        for cond in Condition::ALL {
            let pe = energy.chain.transition(energy.initial_condition, cond);
            for (r, &pr) in energy.harvest.probabilities(cond).iter().enumerate() {
                let m = battery_after_harvest(energy.initial_battery, r as u32, self.space.b_max);
                mu[self.space.index(m, cond, 0)] += pe * pr;
            }
        }
        mu
    }

    /// Writes `(flat_index, m, n, l, action, h)` rows for a solved policy.
    pub fn write_policy_csv<W: Write>(&self, result: &SolveResult, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["flat_index", "m", "n", "l", "action", "h"])?;
        for s in self.states() {
            w.write_record([
                s.flat_index.to_string(),
                s.m.to_string(),
                s.n.symbol().to_string(),
                s.l.to_string(),
                result.policy.action(&s).to_string(),
                crate::csvio::fmt_f64(result.relative_values[s.flat_index]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Minimum average cost over all deterministic stationary policies by
    /// exhaustive enumeration. Only for tiny instances.
    pub fn brute_force_average_cost(&self) -> Result<(f64, LookupPolicy)> {
        let radices: Vec<u32> = self.states().map(|s| s.m + 1).collect();
        let count: f64 = radices.iter().map(|&r| r as f64).product();
        if count > BRUTE_FORCE_LIMIT as f64 {
            return Err(Error::TooLarge {
                count,
                limit: BRUTE_FORCE_LIMIT,
            });
        }
        let mut digits = vec![0u32; radices.len()];
        let mut best: Option<(f64, Vec<u32>)> = None;
        loop {
            let policy = Policy::Lookup(LookupPolicy::new(self.space, digits.clone())?);
            let cost = self.evaluate(&policy)?.average_cost;
            if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                best = Some((cost, digits.clone()));
            }
            // mixed-radix increment
            let mut i = 0;
            loop {
                if i == digits.len() {
                    let (cost, actions) = best.expect("at least one policy");
                    return Ok((cost, LookupPolicy::new(self.space, actions)?));
                }
                digits[i] += 1;
                if digits[i] < radices[i] {
                    break;
                }
                digits[i] = 0;
                i += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> MdpProblem {
        MdpProblem::new(&Scenario::scalar_reference(), 30).unwrap()
    }

    #[test]
    fn flat_index_is_a_bijection() {
        let space = StateSpace::new(3, 5);
        assert_eq!(space.len(), 4 * 2 * 6);
        for (i, s) in space.states().enumerate() {
            assert_eq!(s.flat_index, i);
            assert_eq!(space.index(s.m, s.n, s.l), i);
        }
    }

    #[test]
    fn kernel_entry_matches_product_formula() {
        let p = reference();
        let s = p.state(p.space().index(3, Condition::Good, 0));
        let kernel = p.transition_kernel(&s, 1).unwrap();
        let target = p.space().index(2, Condition::Good, 1);
        let prob = kernel.iter().find(|(t, _)| t.flat_index == target).unwrap().1;
        assert!((prob - 0.3 * 0.7 * 0.1).abs() < 1e-15);
    }

    #[test]
    fn zero_power_always_climbs() {
        let p = reference();
        for s in p.states() {
            let kernel = p.transition_kernel(&s, 0).unwrap();
            let up = (s.l + 1).min(p.n_trunc());
            let mass: f64 = kernel.iter().filter(|(t, _)| t.l == up).map(|(_, p)| p).sum();
            assert!((mass - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_rows_sum_to_one_and_respect_battery() {
        let p = reference();
        for s in p.states() {
            for a in p.actions(&s) {
                let kernel = p.transition_kernel(&s, a).unwrap();
                let total: f64 = kernel.iter().map(|(_, p)| p).sum();
                assert!((total - 1.0).abs() < 1e-12);
                for (t, _) in &kernel {
                    assert!(t.m >= s.m - a);
                    assert!(t.l == 0 || t.l == (s.l + 1).min(p.n_trunc()));
                }
            }
        }
    }

    #[test]
    fn saturation_tail_collects_on_full_battery() {
        // From m=3 spending 1, residual 2: m'=3 gathers r ∈ {1,2,3}.
        let p = reference();
        let s = p.state(p.space().index(3, Condition::Bad, 4));
        let kernel = p.transition_kernel(&s, 1).unwrap();
        let full: f64 = kernel
            .iter()
            .filter(|(t, _)| t.m == 3 && t.n == Condition::Bad)
            .map(|(_, p)| p)
            .sum();
        assert!((full - 0.8 * (0.3 + 0.2 + 0.1)).abs() < 1e-15);
    }

    #[test]
    fn infeasible_action_rejected() {
        let p = reference();
        let s = p.state(p.space().index(1, Condition::Good, 0));
        assert!(matches!(p.transition_kernel(&s, 2), Err(Error::InfeasibleAction { .. })));
        assert!(p.stage_cost(&s, 2).is_err());
    }

    #[test]
    fn stage_cost_values() {
        let p = reference();
        let s = p.state(p.space().index(3, Condition::Good, 0));
        let c0 = p.stage_cost(&s, 0).unwrap();
        assert!((c0 - p.ladder().trace(1)).abs() < 1e-15);
        assert!((c0 - 1.413700).abs() < 1e-6);
        let c3 = p.stage_cost(&s, 3).unwrap();
        assert!(c3 < p.stage_cost(&s, 2).unwrap());
        assert!(c3 > p.ladder().trace(0));
    }

    #[test]
    fn stage_cost_ignores_power_when_channel_is_dead() {
        let mut sc = Scenario::scalar_reference();
        sc.channel = crate::channel::ChannelModel::from_lambda(f64::MIN_POSITIVE).unwrap();
        let p = MdpProblem::new(&sc, 4).unwrap();
        let s = p.state(p.space().index(3, Condition::Bad, 2));
        let c0 = p.stage_cost(&s, 0).unwrap();
        for a in 1..=3 {
            assert_eq!(p.stage_cost(&s, a).unwrap(), c0);
        }
    }

    #[test]
    fn initial_distribution_sums_to_one() {
        let mu = reference().initial_distribution();
        assert!((mu.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn brute_force_refuses_large_instances() {
        assert!(matches!(reference().brute_force_average_cost(), Err(Error::TooLarge { .. })));
    }
}
