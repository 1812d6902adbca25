//! Optimal, threshold and greedy rules simulated with common random numbers.
//! Writes one `k,mean_Jk,stderr_Jk` CSV per policy into the given directory.
//!
//! cargo run --release --example compare_policies -- [out_dir]

use std::fs::File;
use std::path::PathBuf;

use eh_estimation::mdp::{MdpProblem, Policy};
use eh_estimation::sim::{self, SimConfig};
use eh_estimation::threshold::ThresholdPolicy;
use eh_estimation::Scenario;

fn main() -> eh_estimation::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "compare_out".into()));
    std::fs::create_dir_all(&out)?;
    let scenario = Scenario::scalar_reference();
    let solved = MdpProblem::new(&scenario, 30)?.relative_value_iteration(1e-10, 1_000_000)?;
    let policies = vec![
        ("optimal".to_string(), Policy::Lookup(solved.policy.clone())),
        ("threshold".to_string(), Policy::Threshold(ThresholdPolicy::new(1, 2, 3)?)),
        ("greedy".to_string(), Policy::Greedy),
    ];
    let cfg = SimConfig {
        horizon: 10_000,
        replications: 1_000,
        master_seed: 7,
        record_stride: 10,
        ..SimConfig::default()
    };
    let cmp = sim::compare(&policies, &scenario, &cfg)?;
    for (name, trace) in cmp.names.iter().zip(&cmp.traces) {
        trace.write_csv(File::create(out.join(format!("{name}.csv")))?)?;
        println!("{name:>9}: J_T = {:.5} ± {:.5}", trace.final_mean(), trace.final_stderr());
    }
    let d = cmp.paired_difference(1, 2);
    println!("threshold − greedy = {:.5} ({:.1} s.e.)", d.mean, d.z_score());
    println!("exact J* = {:.5}", solved.avg_cost);
    Ok(())
}
