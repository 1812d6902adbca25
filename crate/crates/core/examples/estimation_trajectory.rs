//! One replication with the plant, the local filter and the remote estimator
//! simulated side by side.
//!
//! cargo run --example estimation_trajectory

use eh_estimation::mdp::Policy;
use eh_estimation::sim::{simulate_estimation, SimConfig};
use eh_estimation::threshold::ThresholdPolicy;
use eh_estimation::Scenario;

fn main() -> eh_estimation::Result<()> {
    let scenario = Scenario::scalar_reference();
    let policy = Policy::Threshold(ThresholdPolicy::new(1, 2, 3)?);
    let cfg = SimConfig {
        horizon: 2_000,
        replications: 20,
        master_seed: 11,
        ..SimConfig::default()
    };
    let records = simulate_estimation(&policy, &scenario, &cfg, 0)?;
    println!("   k  ω  γ        x      x̂_remote  Tr(P)");
    for r in records.iter().take(20) {
        println!(
            "{:>4} {:>2} {:>2} {:>9.4} {:>9.4} {:>7.4}",
            r.k,
            r.power,
            u8::from(r.arrival),
            r.state[0],
            r.remote_estimate[0],
            r.trace
        );
    }
    let (mut mse, mut mean_trace, mut n) = (0.0, 0.0, 0.0);
    for rep in 0..cfg.replications {
        for r in simulate_estimation(&policy, &scenario, &cfg, rep)? {
            mse += r.squared_error;
            mean_trace += r.trace;
            n += 1.0;
        }
    }
    println!(
        "over {} replications: empirical MSE {:.4} vs mean Tr(P_k) {:.4}",
        cfg.replications,
        mse / n,
        mean_trace / n
    );
    Ok(())
}
