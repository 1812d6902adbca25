//! Condition-dependent threshold rule `ω = min(b', R_e)` and the Markov chain
//! it induces on `(battery after harvest b', condition e)`.
//!
//! Index convention for `Ψ` and `q*`: state `(b', e)` sits at `2·b' + e`
//! with `e = 0` for good and `1` for bad (0-based, condition fastest).

use std::io::Write;

use nalgebra::DMatrix;

use crate::csvio::fmt_f64;
use crate::energy::{battery_after_harvest, battery_next, Condition, EnergyModel};
use crate::error::{Error, Result};
use crate::markov::SparseChain;
use crate::mdp::{MdpProblem, Policy};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThresholdPolicy {
    r_good: u32,
    r_bad: u32,
}

impl ThresholdPolicy {
    pub fn new(r_good: u32, r_bad: u32, b_max: u32) -> Result<Self> {
        if r_good > b_max {
            return Err(Error::param("r_good", format!("{r_good} exceeds b_max {b_max}")));
        }
        if r_bad > b_max {
            return Err(Error::param("r_bad", format!("{r_bad} exceeds b_max {b_max}")));
        }
        Ok(Self { r_good, r_bad })
    }

    pub fn r_good(&self) -> u32 {
        self.r_good
    }

    pub fn r_bad(&self) -> u32 {
        self.r_bad
    }

    pub fn cap(&self, e: Condition) -> u32 {
        match e {
            Condition::Good => self.r_good,
            Condition::Bad => self.r_bad,
        }
    }

    pub fn action(&self, available: u32, e: Condition) -> u32 {
        available.min(self.cap(e))
    }
}

pub fn psi_index(battery: u32, e: Condition) -> usize {
    2 * battery as usize + e.index()
}

/// Transition matrix of `(b', e)` under a threshold policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiMatrix {
    b_max: u32,
    entries: DMatrix<f64>,
}

impl PsiMatrix {
    pub fn b_max(&self) -> u32 {
        self.b_max
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, from: (u32, Condition), to: (u32, Condition)) -> f64 {
        self.entries[(psi_index(from.0, from.1), psi_index(to.0, to.1))]
    }

    /// CSV with a header naming each column's `(b', e)` state.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["from".to_string()];
        header.extend((0..self.len()).map(state_label));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![state_label(i)];
            rec.extend(self.entries.row(i).iter().map(|&v| fmt_f64(v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `b<level><G|B>`, e.g. `b2B` for index 5.
pub fn state_label(i: usize) -> String {
    format!("b{}{}", i / 2, Condition::from_index(i % 2).symbol())
}

/// Builds `Ψ` by pushing each `(b', e)` through the threshold action, the
/// battery recursion, the environment chain and the next harvest.
pub fn build_psi(policy: &ThresholdPolicy, energy: &EnergyModel) -> Result<PsiMatrix> {
    let b_max = energy.b_max();
    ThresholdPolicy::new(policy.r_good, policy.r_bad, b_max)?;
    let size = 2 * (b_max as usize + 1);
    let mut entries = DMatrix::zeros(size, size);
    for battery in 0..=b_max {
        for cond in Condition::ALL {
            let from = psi_index(battery, cond);
            let residual = battery_next(battery, policy.action(battery, cond))?;
            for next in Condition::ALL {
                let pe = energy.chain.transition(cond, next);
                for (r, &pr) in energy.harvest.probabilities(next).iter().enumerate() {
                    let to = psi_index(battery_after_harvest(residual, r as u32, b_max), next);
                    entries[(from, to)] += pe * pr;
                }
            }
        }
    }
    Ok(PsiMatrix { b_max, entries })
}

/// Long-run law `q*` of the `(b', e)` chain. Reducible chains return the
/// Cesàro limit from `init`, by default all mass on `(0, G)`.
pub fn stationary_distribution(psi: &PsiMatrix, init: Option<&[f64]>) -> Result<Vec<f64>> {
    stationary_of(psi.entries(), init)
}

pub(crate) fn stationary_of(matrix: &DMatrix<f64>, init: Option<&[f64]>) -> Result<Vec<f64>> {
    let chain = SparseChain::from_dense(matrix)?;
    let default;
    let init = match init {
        Some(mu) => mu,
        None => {
            let mut mu = vec![0.0; chain.len()];
            mu[0] = 1.0;
            default = mu;
            &default
        }
    };
    Ok(chain.long_run(init)?.distribution)
}

/// Stationary law of the transmission power: the `q` mass of every
/// `(b', e)` pushed through the threshold action.
pub fn omega_distribution(q: &[f64], policy: &ThresholdPolicy) -> Result<Vec<f64>> {
    if !q.len().is_multiple_of(2) || q.is_empty() {
        return Err(Error::param("q", format!("length {} is not 2·(b_max+1)", q.len())));
    }
    let b_max = (q.len() / 2 - 1) as u32;
    let mut out = vec![0.0; b_max as usize + 1];
    for battery in 0..=b_max {
        for cond in Condition::ALL {
            out[policy.action(battery, cond) as usize] += q[psi_index(battery, cond)];
        }
    }
    Ok(out)
}

pub fn write_distribution_csv<W: Write>(label: &str, values: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", label])?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([i.to_string(), fmt_f64(*v)])?;
    }
    w.flush()?;
    Ok(())
}

/// Exact cost of every threshold pair on the full MDP.
pub fn threshold_costs(problem: &MdpProblem) -> Result<Vec<(ThresholdPolicy, f64)>> {
    let b_max = problem.space().b_max();
    let mut out = Vec::with_capacity((b_max as usize + 1).pow(2));
    for r_good in 0..=b_max {
        for r_bad in 0..=b_max {
            let t = ThresholdPolicy::new(r_good, r_bad, b_max)?;
            let cost = problem.evaluate(&Policy::Threshold(t))?.average_cost;
            out.push((t, cost));
        }
    }
    Ok(out)
}

/// Best threshold pair (first in `(R_G, R_B)` order on ties) and its cost.
pub fn threshold_grid_search(problem: &MdpProblem) -> Result<(ThresholdPolicy, f64)> {
    let costs = threshold_costs(problem)?;
    let mut best = costs[0];
    for &(t, c) in &costs[1..] {
        if c < best.1 {
            best = (t, c);
        }
    }
    Ok(best)
}
