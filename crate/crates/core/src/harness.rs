//! Batch commands behind the `eh-estimation` binary.
//!
//! Every command loads one experiment file, writes its artifacts under the
//! output directory and records `out/manifest.txt`:
//!
//! ```text
//! out/
//!   manifest.txt          key=value: tool, version, command, config hash, seed
//!   solve/policy.csv      flat_index,m,n,l,action,h
//!   solve/summary.txt     J*, residual, iterations, truncation diagnostic
//!   psi/psi.csv           Ψ with labelled rows and columns
//!   psi/stationary.csv    q*
//!   psi/omega.csv         stationary law of the transmission power
//!   sim/<policy>.csv      k,mean_Jk,stderr_Jk
//!   sim/summary.csv       final costs and paired differences
//!   sweep/thresholds.csv  r_good,r_bad,avg_cost for every pair
//!   sweep/summary.txt     best pair and J*
//! ```
//!
//! Output bytes depend only on the config file and the seed.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::{Experiment, ExperimentConfig, PolicyName};
use crate::csvio::fmt_f64;
use crate::error::{Error, Result};
use crate::mdp::{MdpProblem, Policy, SolveResult};
use crate::sim::{self, Comparison, SimTrace};
use crate::threshold::{self, PsiMatrix, ThresholdPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Psi,
    Simulate(PolicyName),
    Compare,
    Sweep,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Psi => "psi",
            Command::Simulate(_) => "simulate",
            Command::Compare => "compare",
            Command::Sweep => "sweep",
        }
    }
}

/// Inputs shared by every command.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: PathBuf,
    /// Replaces `sim.master_seed` when set.
    pub seed: Option<u64>,
}

/// Key/value lines a command reports back, in the order they were produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub entries: Vec<(String, String)>,
    pub files: Vec<PathBuf>,
}

impl Report {
    fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

/// Loads the config, runs `command` and writes the manifest.
pub fn run(command: Command, opts: &RunOptions) -> Result<Report> {
    let text = fs::read_to_string(&opts.config).map_err(|e| {
        Error::config("--config", format!("cannot read {}: {e}", opts.config.display()))
    })?;
    let mut experiment = ExperimentConfig::from_toml(&text)?.build()?;
    if let Some(seed) = opts.seed {
        experiment.sim.master_seed = seed;
    }
    fs::create_dir_all(&opts.out)?;
    let mut report = match command {
        Command::Solve => cmd_solve(&experiment, &opts.out)?,
        Command::Psi => cmd_psi(&experiment, &opts.out)?,
        Command::Simulate(p) => cmd_simulate(&experiment, p, &opts.out)?,
        Command::Compare => cmd_compare(&experiment, &opts.out)?,
        Command::Sweep => cmd_sweep(&experiment, &opts.out)?,
    };
    let manifest = opts.out.join("manifest.txt");
    let mut m = Report::default();
    m.push("tool", env!("CARGO_PKG_NAME"));
    m.push("version", env!("CARGO_PKG_VERSION"));
    m.push("command", command.name());
    if let Command::Simulate(p) = command {
        m.push("policy", p.as_str());
    }
    m.push("config", opts.config.display());
    m.push("config_sha256", hex::encode(Sha256::digest(text.as_bytes())));
    m.push("master_seed", experiment.sim.master_seed);
    m.push("seed_override", opts.seed.is_some());
    fs::write(&manifest, m.render())?;
    report.files.push(manifest);
    Ok(report)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn solve(experiment: &Experiment) -> Result<(MdpProblem, SolveResult)> {
    let problem = MdpProblem::new(&experiment.scenario, experiment.mdp.n_trunc)?;
    let result = problem.relative_value_iteration(experiment.mdp.tol, experiment.mdp.max_iter)?;
    Ok((problem, result))
}

/// Optimal policy table, relative values and the truncation diagnostic.
pub fn cmd_solve(experiment: &Experiment, out: &Path) -> Result<Report> {
    let (problem, result) = solve(experiment)?;
    let mut report = Report::default();
    let policy_path = out.join("solve").join("policy.csv");
    problem.write_policy_csv(&result, create(&policy_path)?)?;
    report.files.push(policy_path);

    report.push("avg_cost", fmt_f64(result.avg_cost));
    report.push("steady_trace", fmt_f64(experiment.scenario.steady().trace()));
    report.push("residual", fmt_f64(result.residual));
    report.push("iterations", result.iterations);
    report.push("damped", result.damped);
    report.push("n_trunc", problem.n_trunc());
    report.push("top_rung_occupancy", fmt_f64(result.evaluation.top_rung_occupancy));
    report.push("truncation_bound", fmt_f64(result.truncation_bound));
    report.push("closed_classes", result.evaluation.closed_classes);
    report.push("unichain", result.evaluation.is_unichain());
    let summary = out.join("solve").join("summary.txt");
    fs::write(&summary, report.render())?;
    report.files.push(summary);
    Ok(report)
}

fn thresholds(experiment: &Experiment) -> Result<ThresholdPolicy> {
    experiment
        .thresholds
        .ok_or_else(|| Error::config("thresholds", "section is required for this command"))
}

/// `Ψ`, its long-run law `q*` and the induced power distribution.
pub fn cmd_psi(experiment: &Experiment, out: &Path) -> Result<Report> {
    let policy = thresholds(experiment)?;
    let energy = &experiment.scenario.energy;
    let psi: PsiMatrix = threshold::build_psi(&policy, energy)?;
    let mut init = vec![0.0; psi.len()];
    init[threshold::psi_index(energy.initial_battery, energy.initial_condition)] = 1.0;
    let q = threshold::stationary_distribution(&psi, Some(&init))?;
    let omega = threshold::omega_distribution(&q, &policy)?;

    let dir = out.join("psi");
    let mut report = Report::default();
    let path = dir.join("psi.csv");
    psi.write_csv(create(&path)?)?;
    report.files.push(path);
    let path = dir.join("stationary.csv");
    threshold::write_distribution_csv("q", &q, create(&path)?)?;
    report.files.push(path);
    let path = dir.join("omega.csv");
    threshold::write_distribution_csv("p_omega", &omega, create(&path)?)?;
    report.files.push(path);

    report.push("r_good", policy.r_good());
    report.push("r_bad", policy.r_bad());
    let max_row_error = (0..psi.len())
        .map(|i| (psi.entries().row(i).sum() - 1.0).abs())
        .fold(0.0, f64::max);
    report.push("max_row_sum_error", fmt_f64(max_row_error));
    let mean_power: f64 = omega.iter().enumerate().map(|(w, p)| w as f64 * p).sum();
    report.push("mean_power", fmt_f64(mean_power));
    Ok(report)
}

/// Resolves a policy name, solving the MDP when the optimal rule is asked for.
fn resolve(experiment: &Experiment, name: PolicyName, solved: &mut Option<SolveResult>) -> Result<Policy> {
    Ok(match name {
        PolicyName::Greedy => sim::greedy_policy(),
        PolicyName::Threshold => Policy::Threshold(thresholds(experiment)?),
        PolicyName::Optimal => {
            if solved.is_none() {
                *solved = Some(solve(experiment)?.1);
            }
            Policy::Lookup(solved.as_ref().expect("solved above").policy.clone())
        }
    })
}

fn write_trace(out: &Path, name: &str, trace: &SimTrace, report: &mut Report) -> Result<()> {
    let path = out.join("sim").join(format!("{name}.csv"));
    trace.write_csv(create(&path)?)?;
    report.files.push(path);
    report.push(format!("{name}.mean_JT"), fmt_f64(trace.final_mean()));
    report.push(format!("{name}.stderr_JT"), fmt_f64(trace.final_stderr()));
    Ok(())
}

/// Monte Carlo cost curve of one policy.
pub fn cmd_simulate(experiment: &Experiment, name: PolicyName, out: &Path) -> Result<Report> {
    let mut solved = None;
    let policy = resolve(experiment, name, &mut solved)?;
    let trace = sim::simulate(&policy, &experiment.scenario, &experiment.sim)?;
    let mut report = Report::default();
    write_trace(out, name.as_str(), &trace, &mut report)?;
    report.push(format!("{}.arrival_rate", name.as_str()), fmt_f64(trace.arrival_rate));
    Ok(report)
}

/// Every configured policy under common random numbers.
pub fn cmd_compare(experiment: &Experiment, out: &Path) -> Result<Report> {
    let mut solved = None;
    let mut policies = Vec::with_capacity(experiment.policies.len());
    for &name in &experiment.policies {
        policies.push((name.as_str().to_string(), resolve(experiment, name, &mut solved)?));
    }
    let comparison: Comparison = sim::compare(&policies, &experiment.scenario, &experiment.sim)?;
    let mut report = Report::default();
    for (name, trace) in comparison.names.iter().zip(&comparison.traces) {
        write_trace(out, name, trace, &mut report)?;
    }
    for i in 0..comparison.names.len() {
        for j in i + 1..comparison.names.len() {
            let d = comparison.paired_difference(i, j);
            let key = format!("{}-{}", comparison.names[i], comparison.names[j]);
            report.push(format!("{key}.mean"), fmt_f64(d.mean));
            report.push(format!("{key}.stderr"), fmt_f64(d.stderr));
        }
    }
    if let Some(s) = &solved {
        report.push("optimal.exact", fmt_f64(s.avg_cost));
    }
    let path = out.join("sim").join("summary.csv");
    comparison.write_summary_csv(create(&path)?)?;
    report.files.push(path);
    Ok(report)
}

/// Exact cost of every threshold pair, next to `J*`.
pub fn cmd_sweep(experiment: &Experiment, out: &Path) -> Result<Report> {
    let (problem, result) = solve(experiment)?;
    let costs = threshold::threshold_costs(&problem)?;
    let path = out.join("sweep").join("thresholds.csv");
    {
        let mut w = csv::Writer::from_writer(create(&path)?);
        w.write_record(["r_good", "r_bad", "avg_cost"])?;
        for (t, c) in &costs {
            w.write_record([t.r_good().to_string(), t.r_bad().to_string(), fmt_f64(*c)])?;
        }
        w.flush()?;
    }
    let (best, best_cost) = threshold::threshold_grid_search(&problem)?;
    let mut report = Report::default();
    report.files.push(path);
    report.push("best_r_good", best.r_good());
    report.push("best_r_bad", best.r_bad());
    report.push("best_cost", fmt_f64(best_cost));
    report.push("optimal_cost", fmt_f64(result.avg_cost));
    report.push("gap", fmt_f64(best_cost - result.avg_cost));
    let summary = out.join("sweep").join("summary.txt");
    fs::write(&summary, report.render())?;
    report.files.push(summary);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &Path, text: &str) -> PathBuf {
        let p = dir.join("exp.toml");
        fs::write(&p, text).unwrap();
        p
    }

    const SMALL: &str = r#"
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

[mdp]
n_trunc = 10

[thresholds]
r_good = 2
r_bad = 1

[sim]
horizon = 50
replications = 8
master_seed = 3
"#;

    #[test]
    fn every_command_writes_its_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let config = write_config(dir.path(), SMALL);
        let opts = RunOptions {
            config,
            out: dir.path().join("out"),
            seed: Some(11),
        };
        for cmd in [
            Command::Solve,
            Command::Psi,
            Command::Simulate(PolicyName::Greedy),
            Command::Compare,
            Command::Sweep,
        ] {
            let report = run(cmd, &opts).unwrap();
            assert!(report.files.iter().all(|f| f.exists()), "{cmd:?}");
        }
        let manifest = fs::read_to_string(opts.out.join("manifest.txt")).unwrap();
        assert!(manifest.contains("command=sweep\n"));
        assert!(manifest.contains("master_seed=11\n"));
        for f in ["solve/policy.csv", "psi/omega.csv", "sim/optimal.csv", "sim/summary.csv", "sweep/thresholds.csv"] {
            assert!(opts.out.join(f).exists(), "{f}");
        }
    }

    #[test]
    fn psi_without_thresholds_fails() {
        let dir = tempfile::tempdir().unwrap();
        let text = SMALL.replace("[thresholds]\nr_good = 2\nr_bad = 1\n", "");
        let opts = RunOptions {
            config: write_config(dir.path(), &text),
            out: dir.path().join("out"),
            seed: None,
        };
        match run(Command::Psi, &opts) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "thresholds"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_config_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            config: dir.path().join("nope.toml"),
            out: dir.path().join("out"),
            seed: None,
        };
        assert!(matches!(run(Command::Solve, &opts), Err(Error::Config { .. })));
    }
}
