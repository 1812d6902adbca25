//! Seeded Monte Carlo of the closed loop: environment, harvest, battery,
//! policy, lossy channel and remote covariance.
//!
//! # Random streams
//!
//! Replication `i` draws from four ChaCha8 streams sharing the key derived
//! from `master_seed` (`ChaCha8Rng::seed_from_u64`) and using stream ids
//! `4·i + 0` (environment), `4·i + 1` (harvest), `4·i + 2` (channel) and
//! `4·i + 3` (plant and sensor noise). The environment and harvest draws
//! never depend on the policy and the channel consumes exactly one uniform
//! per step, so policies run with the same seed see common random numbers.
//!
//! The remote covariance is tracked exactly through its ladder index; no
//! truncation is applied here.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::csvio::fmt_f64;
use crate::energy::{battery_after_harvest, Condition};
use crate::error::{Error, Result};
use crate::kalman::RemoteEstimator;
use crate::linalg::psd_sqrt;
use crate::mdp::{Decision, Policy};
use crate::scenario::Scenario;

pub const DEFAULT_HORIZON: usize = 10_000;
pub const DEFAULT_REPLICATIONS: usize = 1_000;

/// Replications simulated in parallel before being folded in index order.
const CHUNK: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub horizon: usize,
    pub replications: usize,
    pub master_seed: u64,
    pub initial_battery: u32,
    pub initial_condition: Condition,
    pub record_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            replications: DEFAULT_REPLICATIONS,
            master_seed: 0,
            initial_battery: 0,
            initial_condition: Condition::Good,
            record_stride: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, b_max: u32) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::param("horizon", "must be at least 1"));
        }
        if self.replications == 0 {
            return Err(Error::param("replications", "must be at least 1"));
        }
        if self.record_stride == 0 {
            return Err(Error::param("record_stride", "must be at least 1"));
        }
        if self.initial_battery > b_max {
            return Err(Error::param(
                "b0",
                format!("initial battery {} exceeds b_max {b_max}", self.initial_battery),
            ));
        }
        Ok(())
    }

    /// Time steps at which `J_k` is recorded: multiples of the stride plus the horizon.
    pub fn recorded_steps(&self) -> Vec<usize> {
        let mut steps: Vec<usize> = (1..=self.horizon)
            .filter(|k| k % self.record_stride == 0)
            .collect();
        if steps.last() != Some(&self.horizon) {
            steps.push(self.horizon);
        }
        steps
    }
}

#[derive(Debug, Clone, Copy)]
enum Stream {
    Environment = 0,
    Harvest = 1,
    Channel = 2,
    Plant = 3,
}

fn stream(master_seed: u64, replication: usize, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(4 * replication as u64 + which as u64);
    rng
}

/// Spend exactly the energy harvested in the current step.
pub fn greedy_policy() -> Policy {
    Policy::Greedy
}

/// One simulated time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub condition: Condition,
    pub harvest: u32,
    pub available: u32,
    pub power: u32,
    pub arrival: bool,
    /// Ladder index of `P_k`.
    pub rung: usize,
    pub trace: f64,
    /// `J_k = (1/k) Σ_{i≤k} Tr(P_i)` along this replication.
    pub running_cost: f64,
}

/// Per-step log of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationTrace {
    pub replication: usize,
    pub records: Vec<StepRecord>,
}

impl ReplicationTrace {
    pub fn final_cost(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.running_cost)
    }
}

/// Monte Carlo summary over all replications of one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub steps: Vec<usize>,
    /// Mean of `J_k` across replications at each recorded step.
    pub mean_cost: Vec<f64>,
    pub stderr_cost: Vec<f64>,
    /// `J_T` of every replication, in replication order.
    pub final_costs: Vec<f64>,
    /// Fraction of steps spending each power level.
    pub power_histogram: Vec<f64>,
    /// Fraction of steps with `P_k` on each rung.
    pub rung_occupancy: Vec<f64>,
    pub arrival_rate: f64,
}

impl SimTrace {
    pub fn final_mean(&self) -> f64 {
        *self.mean_cost.last().expect("non-empty trace")
    }

    pub fn final_stderr(&self) -> f64 {
        *self.stderr_cost.last().expect("non-empty trace")
    }

    /// Fraction of steps whose covariance climbed above rung `n`.
    pub fn fraction_above(&self, n: usize) -> f64 {
        self.rung_occupancy.iter().skip(n + 1).sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "mean_Jk", "stderr_Jk"])?;
        for ((k, m), s) in self.steps.iter().zip(&self.mean_cost).zip(&self.stderr_cost) {
            w.write_record([k.to_string(), fmt_f64(*m), fmt_f64(*s)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Traces `Tr(h^t(P̄))` for `t = 0..=depth` without keeping the matrices.
fn ladder_traces(scenario: &Scenario, depth: usize) -> Vec<f64> {
    let a = scenario.system.a();
    let q = scenario.system.q();
    let mut x = scenario.steady().clone();
    let mut traces = Vec::with_capacity(depth + 1);
    traces.push(x.trace());
    for _ in 0..depth {
        x = crate::linalg::symmetrize(&(a * &x * a.transpose() + q));
        traces.push(x.trace());
    }
    traces
}

struct Outcome {
    costs: Vec<f64>,
    power_counts: Vec<u64>,
    rung_counts: Vec<u64>,
    arrivals: u64,
    records: Option<Vec<StepRecord>>,
}

fn run_replication(
    policy: &Policy,
    scenario: &Scenario,
    traces: &[f64],
    cfg: &SimConfig,
    replication: usize,
    keep_records: bool,
) -> Result<Outcome> {
    let energy = &scenario.energy;
    let b_max = energy.b_max();
    let mut env_rng = stream(cfg.master_seed, replication, Stream::Environment);
    let mut harvest_rng = stream(cfg.master_seed, replication, Stream::Harvest);
    let mut channel_rng = stream(cfg.master_seed, replication, Stream::Channel);

    let mut condition = cfg.initial_condition;
    let mut battery = cfg.initial_battery;
    let mut rung = 0usize;
    let mut total = 0.0;
    let mut out = Outcome {
        costs: Vec::with_capacity(cfg.horizon / cfg.record_stride + 1),
        power_counts: vec![0; b_max as usize + 1],
        rung_counts: Vec::new(),
        arrivals: 0,
        records: keep_records.then(|| Vec::with_capacity(cfg.horizon)),
    };

    for k in 1..=cfg.horizon {
        condition = energy.chain.step(condition, &mut env_rng);
        let harvest = energy.harvest.sample(condition, &mut harvest_rng);
        let available = battery_after_harvest(battery, harvest, b_max);
        let decision = Decision {
            battery,
            harvest,
            available,
            condition,
            rung,
        };
        let power = policy.decide(&decision);
        if power > available {
            return Err(Error::InfeasibleAction {
                action: power,
                available,
                condition: condition.symbol(),
                rung,
            });
        }
        let arrival = scenario.channel.sample_arrival(power, &mut channel_rng);
        rung = if arrival { 0 } else { rung + 1 };
        battery = available - power;

        let trace = traces[rung];
        total += trace;
        let running_cost = total / k as f64;

        out.power_counts[power as usize] += 1;
        out.arrivals += arrival as u64;
        if out.rung_counts.len() <= rung {
            out.rung_counts.resize(rung + 1, 0);
        }
        out.rung_counts[rung] += 1;
        if k % cfg.record_stride == 0 || k == cfg.horizon {
            out.costs.push(running_cost);
        }
        if let Some(records) = out.records.as_mut() {
            records.push(StepRecord {
                k,
                condition,
                harvest,
                available,
                power,
                arrival,
                rung,
                trace,
                running_cost,
            });
        }
    }
    Ok(out)
}

/// Full per-step log of a single replication.
pub fn simulate_replication(
    policy: &Policy,
    scenario: &Scenario,
    cfg: &SimConfig,
    replication: usize,
) -> Result<ReplicationTrace> {
    cfg.validate(scenario.b_max())?;
    policy.check_battery(scenario.b_max())?;
    let traces = ladder_traces(scenario, cfg.horizon);
    let out = run_replication(policy, scenario, &traces, cfg, replication, true)?;
    Ok(ReplicationTrace {
        replication,
        records: out.records.unwrap_or_default(),
    })
}

/// Monte Carlo estimate of the `J_k` curve of a policy.
pub fn simulate(policy: &Policy, scenario: &Scenario, cfg: &SimConfig) -> Result<SimTrace> {
    cfg.validate(scenario.b_max())?;
    policy.check_battery(scenario.b_max())?;
    let traces = ladder_traces(scenario, cfg.horizon);
    let steps = cfg.recorded_steps();
    let n_steps = steps.len();

    let mut mean = vec![0.0; n_steps];
    let mut m2 = vec![0.0; n_steps];
    let mut final_costs = Vec::with_capacity(cfg.replications);
    let mut power_counts = vec![0u64; scenario.b_max() as usize + 1];
    let mut rung_counts: Vec<u64> = Vec::new();
    let mut arrivals = 0u64;
    let mut seen = 0usize;

    let reps: Vec<usize> = (0..cfg.replications).collect();
    for chunk in reps.chunks(CHUNK) {
        let outcomes: Vec<Result<Outcome>> = chunk
            .par_iter()
            .map(|&i| run_replication(policy, scenario, &traces, cfg, i, false))
            .collect();
        // fold in replication order so results do not depend on scheduling
        for outcome in outcomes {
            let outcome = outcome?;
            seen += 1;
            for (j, &c) in outcome.costs.iter().enumerate() {
                let delta = c - mean[j];
                mean[j] += delta / seen as f64;
                m2[j] += delta * (c - mean[j]);
            }
            final_costs.push(*outcome.costs.last().expect("horizon >= 1"));
            for (acc, c) in power_counts.iter_mut().zip(&outcome.power_counts) {
                *acc += c;
            }
            if rung_counts.len() < outcome.rung_counts.len() {
                rung_counts.resize(outcome.rung_counts.len(), 0);
            }
            for (acc, c) in rung_counts.iter_mut().zip(&outcome.rung_counts) {
                *acc += c;
            }
            arrivals += outcome.arrivals;
        }
    }

    let total_steps = (cfg.horizon * cfg.replications) as f64;
    let stderr = m2
        .iter()
        .map(|&v| {
            if seen > 1 {
                (v / (seen - 1) as f64 / seen as f64).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    Ok(SimTrace {
        steps,
        mean_cost: mean,
        stderr_cost: stderr,
        final_costs,
        power_histogram: power_counts.iter().map(|&c| c as f64 / total_steps).collect(),
        rung_occupancy: rung_counts.iter().map(|&c| c as f64 / total_steps).collect(),
        arrival_rate: arrivals as f64 / total_steps,
    })
}

/// Several policies simulated under common random numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub names: Vec<String>,
    pub traces: Vec<SimTrace>,
}

/// Paired difference of final costs between two policies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedDifference {
    /// Mean of `J_T(first) − J_T(second)` across replications.
    pub mean: f64,
    pub stderr: f64,
}

impl PairedDifference {
    /// How many standard errors the difference is away from zero.
    pub fn z_score(&self) -> f64 {
        if self.stderr == 0.0 {
            if self.mean == 0.0 {
                0.0
            } else {
                self.mean.signum() * f64::INFINITY
            }
        } else {
            self.mean / self.stderr
        }
    }
}

impl Comparison {
    pub fn trace(&self, name: &str) -> Option<&SimTrace> {
        self.names.iter().position(|n| n == name).map(|i| &self.traces[i])
    }

    pub fn paired_difference(&self, first: usize, second: usize) -> PairedDifference {
        let a = &self.traces[first].final_costs;
        let b = &self.traces[second].final_costs;
        let n = a.len();
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for (k, (x, y)) in a.iter().zip(b).enumerate() {
            let d = x - y;
            let delta = d - mean;
            mean += delta / (k + 1) as f64;
            m2 += delta * (d - mean);
        }
        let stderr = if n > 1 {
            (m2 / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        PairedDifference { mean, stderr }
    }

    /// `(policy, J_T mean, J_T stderr)` rows followed by pairwise differences.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["policy", "other", "mean_JT", "stderr_JT"])?;
        for (name, trace) in self.names.iter().zip(&self.traces) {
            w.write_record([
                name.as_str(),
                "",
                &fmt_f64(trace.final_mean()),
                &fmt_f64(trace.final_stderr()),
            ])?;
        }
        for i in 0..self.names.len() {
            for j in i + 1..self.names.len() {
                let d = self.paired_difference(i, j);
                w.write_record([
                    self.names[i].as_str(),
                    self.names[j].as_str(),
                    &fmt_f64(d.mean),
                    &fmt_f64(d.stderr),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs every policy with the same configuration, hence the same streams.
pub fn compare(
    policies: &[(String, Policy)],
    scenario: &Scenario,
    cfg: &SimConfig,
) -> Result<Comparison> {
    if policies.is_empty() {
        return Err(Error::param("policies", "nothing to compare"));
    }
    let mut names = Vec::with_capacity(policies.len());
    let mut traces = Vec::with_capacity(policies.len());
    for (name, policy) in policies {
        names.push(name.clone());
        traces.push(simulate(policy, scenario, cfg)?);
    }
    Ok(Comparison { names, traces })
}

/// One step of a replication that also simulates the plant, the local
/// filter and the remote estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationRecord {
    pub k: usize,
    pub state: DVector<f64>,
    pub remote_estimate: DVector<f64>,
    pub squared_error: f64,
    /// `Tr(P_k)` of the remote estimator.
    pub trace: f64,
    pub arrival: bool,
    pub power: u32,
}

/// Simulates the plant and both estimators for one replication. The local
/// filter starts in steady state: `x̂₀ = 0` and `x₀ ~ N(0, P̄)`.
pub fn simulate_estimation(
    policy: &Policy,
    scenario: &Scenario,
    cfg: &SimConfig,
    replication: usize,
) -> Result<Vec<EstimationRecord>> {
    cfg.validate(scenario.b_max())?;
    policy.check_battery(scenario.b_max())?;
    let energy = &scenario.energy;
    let system = &scenario.system;
    let steady = scenario.steady();
    let b_max = energy.b_max();
    let n = system.state_dim();
    let p = system.output_dim();
    let mut env_rng = stream(cfg.master_seed, replication, Stream::Environment);
    let mut harvest_rng = stream(cfg.master_seed, replication, Stream::Harvest);
    let mut channel_rng = stream(cfg.master_seed, replication, Stream::Channel);
    let mut plant_rng = stream(cfg.master_seed, replication, Stream::Plant);

    let q_half = psd_sqrt(system.q());
    let r_half = psd_sqrt(system.r());
    let p_half = psd_sqrt(steady);
    let mut gaussian = |dim: usize, factor: &DMatrix<f64>| {
        let z = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut plant_rng));
        factor * z
    };

    let mut state = gaussian(n, &p_half);
    let mut local = DVector::zeros(n);
    let mut local_cov = steady.clone();
    let mut remote = RemoteEstimator::new(DVector::zeros(n), steady.clone());
    let mut condition = cfg.initial_condition;
    let mut battery = cfg.initial_battery;
    let mut rung = 0usize;
    let mut out = Vec::with_capacity(cfg.horizon);

    for k in 1..=cfg.horizon {
        state = system.a() * &state + gaussian(n, &q_half);
        let measurement = system.c() * &state + gaussian(p, &r_half);
        let (est, cov) = system.local_filter_step(&local, &local_cov, &measurement)?;
        local = est;
        local_cov = cov;

        condition = energy.chain.step(condition, &mut env_rng);
        let harvest = energy.harvest.sample(condition, &mut harvest_rng);
        let available = battery_after_harvest(battery, harvest, b_max);
        let power = policy.decide(&Decision {
            battery,
            harvest,
            available,
            condition,
            rung,
        });
        if power > available {
            return Err(Error::InfeasibleAction {
                action: power,
                available,
                condition: condition.symbol(),
                rung,
            });
        }
        let arrival = scenario.channel.sample_arrival(power, &mut channel_rng);
        rung = if arrival { 0 } else { rung + 1 };
        battery = available - power;
        remote.update(system, steady, &local, arrival)?;

        let err = &state - &remote.estimate;
        out.push(EstimationRecord {
            k,
            squared_error: err.norm_squared(),
            state: state.clone(),
            remote_estimate: remote.estimate.clone(),
            trace: remote.covariance.trace(),
            arrival,
            power,
        });
    }
    Ok(out)
}
