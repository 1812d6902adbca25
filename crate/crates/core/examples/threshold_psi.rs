//! Transition matrix of `(battery after harvest, condition)` under a
//! threshold rule, its stationary law and the induced power distribution.
//!
//! cargo run --example threshold_psi

use eh_estimation::threshold::{
    build_psi, omega_distribution, state_label, stationary_distribution, ThresholdPolicy,
};
use eh_estimation::Scenario;

fn main() -> eh_estimation::Result<()> {
    let energy = Scenario::scalar_reference().energy;
    let policy = ThresholdPolicy::new(2, 1, energy.b_max())?;
    let psi = build_psi(&policy, &energy)?;
    psi.write_csv(std::io::stdout())?;

    let q = stationary_distribution(&psi, None)?;
    for (i, v) in q.iter().enumerate() {
        println!("q[{}] = {v:.6}", state_label(i));
    }
    for (w, p) in omega_distribution(&q, &policy)?.iter().enumerate() {
        println!("P[ω = {w}] = {p:.6}");
    }
    Ok(())
}
