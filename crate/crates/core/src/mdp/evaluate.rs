use super::{Decision, MdpProblem, Policy};
use crate::energy::{battery_after_harvest, Condition};
use crate::error::{Error, Result};
use crate::markov::SparseChain;

/// Exact long-run behaviour of a stationary policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEvaluation {
    pub average_cost: f64,
    /// Long-run fraction of steps whose previous covariance sits on the top rung.
    pub top_rung_occupancy: f64,
    /// Number of closed classes of the induced chain.
    pub closed_classes: usize,
    /// Long-run occupancy over the chain the policy was evaluated on.
    pub occupancy: Vec<f64>,
}

impl PolicyEvaluation {
    pub fn is_unichain(&self) -> bool {
        self.closed_classes == 1
    }
}

impl MdpProblem {
    /// Exact average cost of a stationary policy.
    ///
    /// Rules that depend only on the MDP state are evaluated on the chain
    /// they induce over MDP states. Greedy also looks at the fresh harvest,
    /// so it goes through [`MdpProblem::evaluate_pre_harvest`].
    pub fn evaluate(&self, policy: &Policy) -> Result<PolicyEvaluation> {
        if matches!(policy, Policy::Greedy) {
            return self.evaluate_pre_harvest(policy);
        }
        let n = self.space.len();
        let mut rows = Vec::with_capacity(n);
        let mut costs = Vec::with_capacity(n);
        for s in self.states() {
            let a = policy.action_at(&s).expect("state-feedback policy");
            if a > s.m {
                return Err(Error::InfeasibleAction {
                    action: a,
                    available: s.m,
                    condition: s.n.symbol(),
                    rung: s.l,
                });
            }
            rows.push(self.kernel_unchecked(s.flat_index, a).to_vec());
            costs.push(self.cost_unchecked(s.flat_index, a));
        }
        let chain = SparseChain::new(rows)?;
        let long_run = chain.long_run(&self.initial_distribution())?;
        let top = self.n_trunc();
        let top_rung_occupancy = self
            .states()
            .filter(|s| s.l == top)
            .map(|s| long_run.distribution[s.flat_index])
            .sum();
        Ok(PolicyEvaluation {
            average_cost: dot(&long_run.distribution, &costs),
            top_rung_occupancy,
            closed_classes: long_run.closed_classes.len(),
            occupancy: long_run.distribution,
        })
    }

    /// Exact average cost on the chain observed before harvesting, with
    /// states `(battery b, previous condition, rung)` indexed like the MDP
    /// space. Works for any [`Policy`], since the harvest is enumerated
    /// inside each transition.
    pub fn evaluate_pre_harvest(&self, policy: &Policy) -> Result<PolicyEvaluation> {
        let space = self.space;
        let energy = &self.scenario.energy;
        let channel = &self.scenario.channel;
        let b_max = space.b_max();
        let top = space.n_trunc();

        let mut rows = Vec::with_capacity(space.len());
        let mut costs = Vec::with_capacity(space.len());
        let mut scratch = vec![0.0; space.len()];
        for s in space.states() {
            let (battery, prev, rung) = (s.m, s.n, s.l);
            let up = (rung + 1).min(top);
            let mut cost = 0.0;
            for cond in Condition::ALL {
                let pe = energy.chain.transition(prev, cond);
                if pe == 0.0 {
                    continue;
                }
                for (r, &pr) in energy.harvest.probabilities(cond).iter().enumerate() {
                    if pr == 0.0 {
                        continue;
                    }
                    let available = battery_after_harvest(battery, r as u32, b_max);
                    let decision = Decision {
                        battery,
                        harvest: r as u32,
                        available,
                        condition: cond,
                        rung,
                    };
                    let power = policy.decide(&decision);
                    if power > available {
                        return Err(Error::InfeasibleAction {
                            action: power,
                            available,
                            condition: cond.symbol(),
                            rung,
                        });
                    }
                    let w = pe * pr;
                    let drop = channel.drop_probability(power);
                    let left = available - power;
                    cost += w
                        * (drop * self.ladder.trace(up) + (1.0 - drop) * self.ladder.trace(0));
                    scratch[space.index(left, cond, up)] += w * drop;
                    scratch[space.index(left, cond, 0)] += w * (1.0 - drop);
                }
            }
            let row: Vec<(usize, f64)> = scratch
                .iter()
                .enumerate()
                .filter(|&(_, &p)| p > 0.0)
                .map(|(j, &p)| (j, p))
                .collect();
            for &(j, _) in &row {
                scratch[j] = 0.0;
            }
            rows.push(row);
            costs.push(cost);
        }

        let chain = SparseChain::new(rows)?;
        let mut init = vec![0.0; space.len()];
        init[space.index(energy.initial_battery, energy.initial_condition, 0)] = 1.0;
        let long_run = chain.long_run(&init)?;
        let top_rung_occupancy = space
            .states()
            .filter(|s| s.l == top)
            .map(|s| long_run.distribution[s.flat_index])
            .sum();
        Ok(PolicyEvaluation {
            average_cost: dot(&long_run.distribution, &costs),
            top_rung_occupancy,
            closed_classes: long_run.closed_classes.len(),
            occupancy: long_run.distribution,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::LookupPolicy;
    use crate::scenario::Scenario;
    use crate::threshold::ThresholdPolicy;

    fn reference() -> MdpProblem {
        MdpProblem::new(&Scenario::scalar_reference(), 30).unwrap()
    }

    #[test]
    fn single_action_problem_costs_its_only_action() {
        let mut sc = Scenario::scalar_reference();
        sc.energy.harvest =
            crate::energy::HarvestDistribution::new(vec![1.0], vec![1.0]).unwrap();
        let p = MdpProblem::new(&sc, 1).unwrap();
        let policy = Policy::Lookup(LookupPolicy::new(p.space(), vec![0; p.space().len()]).unwrap());
        let ev = p.evaluate(&policy).unwrap();
        // absorbed on rung 1; every stage costs Tr(h(P̄))
        assert!((ev.average_cost - p.ladder().trace(1)).abs() < 1e-12);
        assert!((ev.top_rung_occupancy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn both_routes_agree_for_state_feedback_policies() {
        let p = reference();
        for (r0, r1) in [(0, 0), (1, 2), (2, 1), (3, 3), (0, 3)] {
            let policy = Policy::Threshold(ThresholdPolicy::new(r0, r1, 3).unwrap());
            let lifted = p.evaluate(&policy).unwrap().average_cost;
            let pre = p.evaluate_pre_harvest(&policy).unwrap().average_cost;
            assert!((lifted - pre).abs() < 1e-11, "({r0},{r1}): {lifted} vs {pre}");
        }
    }

    #[test]
    fn every_policy_costs_at_least_the_floor() {
        let p = reference();
        let floor = p.ladder().trace(0);
        for policy in [
            Policy::Greedy,
            Policy::Threshold(ThresholdPolicy::new(3, 3, 3).unwrap()),
            Policy::Threshold(ThresholdPolicy::new(1, 0, 3).unwrap()),
        ] {
            let ev = p.evaluate(&policy).unwrap();
            assert!(ev.average_cost >= floor);
            assert!((ev.occupancy.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn greedy_equals_spend_all_when_battery_starts_empty() {
        // With b₀ = 0 greedy never carries energy over, so it coincides with
        // spending the whole available battery.
        let p = reference();
        let greedy = p.evaluate(&Policy::Greedy).unwrap().average_cost;
        let spend_all = p
            .evaluate(&Policy::Threshold(ThresholdPolicy::new(3, 3, 3).unwrap()))
            .unwrap()
            .average_cost;
        assert!((greedy - spend_all).abs() < 1e-11);
    }
}
