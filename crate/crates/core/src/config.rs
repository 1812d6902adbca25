//! Experiment files: one TOML document per experiment.
//!
//! ```toml
//! [system]
//! a = [[0.9]]
//! c = [[0.7]]
//! q = [[0.8]]
//! r = [[0.8]]
//! pi0 = [[1.0]]
//!
//! [channel]
//! lambda = 0.7            # or beta / n0 / w, or both (must agree)
//!
//! [energy]
//! p_gg = 0.7
//! p_bg = 0.2
//! good = [0.1, 0.2, 0.3, 0.4]
//! bad = [0.4, 0.3, 0.2, 0.1]
//! b_max = 3
//! b0 = 0
//! e0 = "G"
//!
//! [mdp]
//! n_trunc = 30
//!
//! [thresholds]
//! r_good = 1
//! r_bad = 2
//!
//! [sim]
//! horizon = 10000
//! replications = 1000
//! master_seed = 2024
//! ```

use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::channel::{ChannelModel, LinkParams};
use crate::energy::{Condition, EnergyModel, EnvironmentChain, HarvestDistribution};
use crate::error::{Error, Result};
use crate::kalman::SystemModel;
use crate::mdp::{DEFAULT_N_TRUNC, RVI_DEFAULT_MAX_ITER, RVI_DEFAULT_TOL};
use crate::scenario::Scenario;
use crate::sim::SimConfig;
use crate::threshold::ThresholdPolicy;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSection,
    pub channel: ChannelSection,
    pub energy: EnergySection,
    #[serde(default)]
    pub mdp: MdpSection,
    pub thresholds: Option<ThresholdSection>,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub compare: CompareSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub a: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub pi0: Vec<Vec<f64>>,
    /// Skip the observability / controllability rank tests.
    #[serde(default)]
    pub relaxed: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub lambda: Option<f64>,
    pub beta: Option<f64>,
    pub n0: Option<f64>,
    pub w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySection {
    pub p_gg: f64,
    pub p_bg: f64,
    pub p_gb: Option<f64>,
    pub p_bb: Option<f64>,
    pub good: Vec<f64>,
    pub bad: Vec<f64>,
    pub b_max: u32,
    #[serde(default)]
    pub b0: u32,
    #[serde(default = "default_condition")]
    pub e0: Condition,
}

fn default_condition() -> Condition {
    Condition::Good
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpSection {
    #[serde(default = "default_n_trunc")]
    pub n_trunc: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_n_trunc() -> usize {
    DEFAULT_N_TRUNC
}
fn default_tol() -> f64 {
    RVI_DEFAULT_TOL
}
fn default_max_iter() -> usize {
    RVI_DEFAULT_MAX_ITER
}

impl Default for MdpSection {
    fn default() -> Self {
        Self {
            n_trunc: DEFAULT_N_TRUNC,
            tol: RVI_DEFAULT_TOL,
            max_iter: RVI_DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    pub r_good: u32,
    pub r_bad: u32,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
}

fn default_horizon() -> usize {
    crate::sim::DEFAULT_HORIZON
}
fn default_replications() -> usize {
    crate::sim::DEFAULT_REPLICATIONS
}
fn default_stride() -> usize {
    1
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            horizon: default_horizon(),
            replications: default_replications(),
            master_seed: 0,
            record_stride: 1,
        }
    }
}

/// Which policies `compare` runs; defaults to all that are available.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub policies: Option<Vec<PolicyName>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyName {
    Optimal,
    Threshold,
    Greedy,
}

impl PolicyName {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyName::Optimal => "optimal",
            PolicyName::Threshold => "threshold",
            PolicyName::Greedy => "greedy",
        }
    }
}

impl std::str::FromStr for PolicyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimal" => Ok(PolicyName::Optimal),
            "threshold" => Ok(PolicyName::Threshold),
            "greedy" => Ok(PolicyName::Greedy),
            other => Err(Error::param("policy", format!("unknown policy `{other}`"))),
        }
    }
}

/// Validated experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub scenario: Scenario,
    pub mdp: MdpSection,
    pub thresholds: Option<ThresholdPolicy>,
    pub sim: SimConfig,
    pub policies: Vec<PolicyName>,
}

fn matrix(field: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::config(field, "matrix has no rows"));
    }
    let m = rows[0].len();
    if m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(Error::config(field, "rows must be non-empty and of equal length"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::config(field, "entries must be finite"));
    }
    Ok(DMatrix::from_row_iterator(n, m, rows.iter().flatten().copied()))
}

/// Prefixes parameter errors raised by a model constructor with a section name.
fn in_section(section: &str, err: Error) -> Error {
    match err {
        Error::InvalidParameter { name, reason } => Error::config(format!("{section}.{name}"), reason),
        Error::NotPsd { name, min_eigenvalue } | Error::NotPd { name, min_eigenvalue } => Error::config(
            format!("{section}.{}", name.to_lowercase()),
            format!("not positive (semi-)definite, min eigenvalue {min_eigenvalue:e}"),
        ),
        Error::DimensionMismatch { context, expected, actual } => Error::config(
            format!("{section}.{}", context.to_lowercase()),
            format!("expected shape {expected:?}, got {actual:?}"),
        ),
        Error::NotObservable { .. } | Error::NotControllable { .. } => {
            Error::config(format!("{section}.a"), err.to_string())
        }
        other => other,
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| format!("bytes {}..{}", s.start, s.end))
                .unwrap_or_else(|| "<document>".to_string());
            Error::config(field, e.message().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Re-validates every model invariant and assembles the experiment.
    pub fn build(&self) -> Result<Experiment> {
        let s = &self.system;
        let (a, c, q, r, pi0) = (
            matrix("system.a", &s.a)?,
            matrix("system.c", &s.c)?,
            matrix("system.q", &s.q)?,
            matrix("system.r", &s.r)?,
            matrix("system.pi0", &s.pi0)?,
        );
        let system = if s.relaxed {
            SystemModel::new_relaxed(a, c, q, r, pi0)
        } else {
            SystemModel::new(a, c, q, r, pi0)
        }
        .map_err(|e| in_section("system", e))?;

        let ch = &self.channel;
        let link = match (ch.beta, ch.n0, ch.w) {
            (Some(beta), Some(n0), Some(w)) => Some(LinkParams { beta, n0, w }),
            (None, None, None) => None,
            _ => {
                return Err(Error::config(
                    "channel",
                    "beta, n0 and w must be given together",
                ))
            }
        };
        let channel = match (ch.lambda, link) {
            (Some(l), Some(link)) => ChannelModel::from_lambda_and_link(l, link),
            (Some(l), None) => ChannelModel::from_lambda(l),
            (None, Some(link)) => ChannelModel::from_link(link),
            (None, None) => return Err(Error::config("channel", "give lambda or beta/n0/w")),
        }
        .map_err(|e| in_section("channel", e))?;

        let en = &self.energy;
        let p_gb = en.p_gb.unwrap_or(1.0 - en.p_gg);
        let p_bb = en.p_bb.unwrap_or(1.0 - en.p_bg);
        let chain = EnvironmentChain::new(en.p_gg, p_gb, en.p_bg, p_bb)
            .map_err(|e| in_section("energy", e))?;
        let support = en.b_max as usize + 1;
        for (name, v) in [("good", &en.good), ("bad", &en.bad)] {
            if v.len() != support {
                return Err(Error::config(
                    format!("energy.{name}"),
                    format!(
                        "needs exactly b_max + 1 = {support} entries, got {}; fold mass above b_max into the last entry",
                        v.len()
                    ),
                ));
            }
        }
        let harvest = HarvestDistribution::new(en.good.clone(), en.bad.clone())
            .map_err(|e| in_section("energy", e))?;
        let energy =
            EnergyModel::new(chain, harvest, en.b0, en.e0).map_err(|e| in_section("energy", e))?;

        if self.mdp.n_trunc == 0 {
            return Err(Error::config("mdp.n_trunc", "must be at least 1"));
        }
        if !(self.mdp.tol > 0.0) {
            return Err(Error::config("mdp.tol", "must be positive"));
        }
        let thresholds = self
            .thresholds
            .map(|t| ThresholdPolicy::new(t.r_good, t.r_bad, en.b_max))
            .transpose()
            .map_err(|e| in_section("thresholds", e))?;

        let sim = SimConfig {
            horizon: self.sim.horizon,
            replications: self.sim.replications,
            master_seed: self.sim.master_seed,
            initial_battery: en.b0,
            initial_condition: en.e0,
            record_stride: self.sim.record_stride,
        };
        sim.validate(en.b_max).map_err(|e| in_section("sim", e))?;

        let policies = match &self.compare.policies {
            Some(list) if list.is_empty() => {
                return Err(Error::config("compare.policies", "list is empty"))
            }
            Some(list) => {
                if list.contains(&PolicyName::Threshold) && thresholds.is_none() {
                    return Err(Error::config(
                        "compare.policies",
                        "threshold requested but [thresholds] is missing",
                    ));
                }
                list.clone()
            }
            None => {
                let mut all = vec![PolicyName::Optimal];
                if thresholds.is_some() {
                    all.push(PolicyName::Threshold);
                }
                all.push(PolicyName::Greedy);
                all
            }
        };

        let scenario =
            Scenario::new(system, channel, energy).map_err(|e| in_section("system", e))?;
        Ok(Experiment {
            scenario,
            mdp: self.mdp.clone(),
            thresholds,
            sim,
            policies,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const REFERENCE: &str = r#"
[system]
a = [[0.9]]
c = [[0.7]]
q = [[0.8]]
r = [[0.8]]
pi0 = [[1.0]]

[channel]
lambda = 0.7

[energy]
p_gg = 0.7
p_bg = 0.2
good = [0.1, 0.2, 0.3, 0.4]
bad = [0.4, 0.3, 0.2, 0.1]
b_max = 3

[thresholds]
r_good = 1
r_bad = 2

[sim]
horizon = 100
replications = 10
master_seed = 1
"#;

    fn field_of(err: Error) -> String {
        match err {
            Error::Config { field, .. } => field,
            other => panic!("expected config error, got {other}"),
        }
    }

    #[test]
    fn reference_config_builds() {
        let exp = ExperimentConfig::from_toml(REFERENCE).unwrap().build().unwrap();
        assert_eq!(exp.scenario.b_max(), 3);
        assert!((exp.scenario.steady()[(0, 0)] - 0.757654).abs() < 1e-6);
        assert_eq!(exp.mdp.n_trunc, 30);
        assert_eq!(
            exp.policies,
            vec![PolicyName::Optimal, PolicyName::Threshold, PolicyName::Greedy]
        );
    }

    #[test]
    fn bad_harvest_row_names_the_field() {
        let text = REFERENCE.replace("good = [0.1, 0.2, 0.3, 0.4]", "good = [0.1, 0.2, 0.3, 0.3]");
        let err = ExperimentConfig::from_toml(&text).unwrap().build().unwrap_err();
        assert_eq!(field_of(err), "energy.good");
    }

    #[test]
    fn long_harvest_support_is_rejected() {
        let text = REFERENCE.replace("good = [0.1, 0.2, 0.3, 0.4]", "good = [0.1, 0.2, 0.3, 0.2, 0.2]");
        let err = ExperimentConfig::from_toml(&text).unwrap().build().unwrap_err();
        assert_eq!(field_of(err), "energy.good");
    }

    #[test]
    fn inconsistent_environment_row() {
        let text = REFERENCE.replace("p_bg = 0.2", "p_bg = 0.2\np_bb = 0.7");
        let err = ExperimentConfig::from_toml(&text).unwrap().build().unwrap_err();
        assert_eq!(field_of(err), "energy.p_bg + p_bb");
    }

    #[test]
    fn channel_parameterisations() {
        let text = REFERENCE.replace(
            "lambda = 0.7",
            "lambda = 0.7\nbeta = 1.2039728043259361\nn0 = 1.0\nw = 1.0",
        );
        assert!(ExperimentConfig::from_toml(&text).unwrap().build().is_ok());
        let text = REFERENCE.replace("lambda = 0.7", "lambda = 0.7\nbeta = 2.0\nn0 = 1.0\nw = 1.0");
        let err = ExperimentConfig::from_toml(&text).unwrap().build().unwrap_err();
        assert_eq!(field_of(err), "channel.lambda");
        let text = REFERENCE.replace("lambda = 0.7", "beta = 2.0");
        assert_eq!(field_of(ExperimentConfig::from_toml(&text).unwrap().build().unwrap_err()), "channel");
    }

    #[test]
    fn system_errors_point_at_system() {
        let text = REFERENCE.replace("r = [[0.8]]", "r = [[-0.8]]");
        let err = ExperimentConfig::from_toml(&text).unwrap().build().unwrap_err();
        assert_eq!(field_of(err), "system.r");
        let text = REFERENCE.replace("q = [[0.8]]", "q = [[0.0]]");
        let err = ExperimentConfig::from_toml(&text).unwrap().build().unwrap_err();
        assert_eq!(field_of(err), "system.a");
    }

    #[test]
    fn thresholds_and_battery_bounds() {
        let text = REFERENCE.replace("r_bad = 2", "r_bad = 4");
        let err = ExperimentConfig::from_toml(&text).unwrap().build().unwrap_err();
        assert_eq!(field_of(err), "thresholds.r_bad");
        let text = REFERENCE.replace("b_max = 3", "b_max = 3\nb0 = 5");
        let err = ExperimentConfig::from_toml(&text).unwrap().build().unwrap_err();
        assert_eq!(field_of(err), "energy.b0");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = REFERENCE.replace("[sim]", "[sim]\nbogus = 3");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn threshold_policy_requires_thresholds() {
        let text = REFERENCE
            .replace("[thresholds]\nr_good = 1\nr_bad = 2\n", "")
            + "\n[compare]\npolicies = [\"threshold\"]\n";
        let err = ExperimentConfig::from_toml(&text).unwrap().build().unwrap_err();
        assert_eq!(field_of(err), "compare.policies");
    }
}
