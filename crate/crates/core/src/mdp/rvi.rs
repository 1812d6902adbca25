use log::{debug, warn};

use super::{LookupPolicy, MdpProblem, Policy, PolicyEvaluation};
use crate::error::{Error, Result};

pub const RVI_DEFAULT_TOL: f64 = 1e-10;
pub const RVI_DEFAULT_MAX_ITER: usize = 1_000_000;

/// Sweeps without a new minimum of the span before damping kicks in.
const OSCILLATION_WINDOW: usize = 100;
/// Self-loop weight of the aperiodicity transform `τ I + (1 − τ) P`.
const DAMPING: f64 = 0.5;
/// Reference state whose relative value is pinned to zero.
const REFERENCE_STATE: usize = 0;

/// Output of relative value iteration.
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Optimal average cost `J*`, midpoint of the final gain bracket.
    pub avg_cost: f64,
    /// Relative values `H` with `H[0] = 0`.
    pub relative_values: Vec<f64>,
    pub policy: LookupPolicy,
    /// Span of the last Bellman update; `J*` lies within this of `avg_cost`.
    pub residual: f64,
    pub iterations: usize,
    pub damped: bool,
    /// Exact long-run analysis of the extracted policy.
    pub evaluation: PolicyEvaluation,
    /// Top-rung occupancy times the gap between the two highest rung traces.
    pub truncation_bound: f64,
}

impl MdpProblem {
    /// Relative value iteration with synchronous sweeps.
    ///
    /// Stops when `span(T h − h) ≤ tol`. If the span fails to reach a new
    /// minimum for a full oscillation window the iteration switches to the
    /// damped operator, which has the same gain and optimal actions.
    pub fn relative_value_iteration(&self, tol: f64, max_iter: usize) -> Result<SolveResult> {
        if !(tol > 0.0) {
            return Err(Error::param("tol", "must be positive"));
        }
        let n = self.space.len();
        let mut h = vec![0.0; n];
        let mut next = vec![0.0; n];
        let mut tau = 0.0;
        let mut best_span = f64::INFINITY;
        let mut stale = 0usize;
        let mut span = f64::INFINITY;

        for iter in 1..=max_iter {
            for (s, v) in next.iter_mut().enumerate() {
                *v = self.backup(s, &h, tau).1;
            }
            let (lo, hi) = next
                .iter()
                .zip(&h)
                .map(|(a, b)| a - b)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
            span = hi - lo;
            let bracket = (lo, hi);
            let pin = next[REFERENCE_STATE];
            for (dst, src) in h.iter_mut().zip(&next) {
                *dst = src - pin;
            }
            if !span.is_finite() {
                break;
            }
            if span <= tol {
                return self.finish(h, bracket, span, iter, tau > 0.0);
            }
            if span < best_span {
                best_span = span;
                stale = 0;
            } else {
                stale += 1;
                if stale >= OSCILLATION_WINDOW && tau == 0.0 {
                    debug!("span stalled at {span:e} after {iter} sweeps; damping engaged");
                    tau = DAMPING;
                    best_span = f64::INFINITY;
                    stale = 0;
                }
            }
        }
        Err(Error::NoConvergence {
            what: "relative value iteration",
            iterations: max_iter,
            residual: span,
        })
    }

    /// Minimising action (smallest on ties) and its backed-up value.
    fn backup(&self, s: usize, h: &[f64], tau: f64) -> (u32, f64) {
        let m = self.space.state(s).m;
        let mut best = (0u32, f64::INFINITY);
        for a in 0..=m {
            let expected: f64 = self
                .kernel_unchecked(s, a)
                .iter()
                .map(|&(j, p)| p * h[j])
                .sum();
            let q = self.cost_unchecked(s, a) + (1.0 - tau) * expected + tau * h[s];
            if a == 0 || q < best.1 - 1e-12 * (1.0 + best.1.abs()) {
                best = (a, q);
            }
        }
        best
    }

    /// Greedy actions with respect to `h`, smallest power among minimisers.
    pub fn greedy_policy_for(&self, h: &[f64]) -> Result<LookupPolicy> {
        let actions = (0..self.space.len()).map(|s| self.backup(s, h, 0.0).0).collect();
        LookupPolicy::new(self.space, actions)
    }

    fn finish(
        &self,
        h: Vec<f64>,
        bracket: (f64, f64),
        span: f64,
        iterations: usize,
        damped: bool,
    ) -> Result<SolveResult> {
        // Under damping h estimates H / (1 − τ); rescale so H solves the
        // undamped optimality equation.
        let h: Vec<f64> = if damped {
            h.iter().map(|v| v * (1.0 - DAMPING)).collect()
        } else {
            h
        };
        let policy = self.greedy_policy_for(&h)?;
        let evaluation = self.evaluate(&Policy::Lookup(policy.clone()))?;
        if !evaluation.is_unichain() {
            warn!(
                "optimal policy induces {} closed classes; average cost may depend on the initial state",
                evaluation.closed_classes
            );
        }
        let top = self.n_trunc();
        let gap = self.ladder.trace(top) - self.ladder.trace(top - 1);
        Ok(SolveResult {
            avg_cost: 0.5 * (bracket.0 + bracket.1),
            relative_values: h,
            truncation_bound: evaluation.top_rung_occupancy * gap,
            policy,
            residual: span,
            iterations,
            damped,
            evaluation,
        })
    }
}
