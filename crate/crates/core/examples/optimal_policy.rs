//! Solve the truncated average-cost MDP and print the optimal power as a
//! function of battery and rung.
//!
//! cargo run --release --example optimal_policy

use eh_estimation::energy::Condition;
use eh_estimation::mdp::MdpProblem;
use eh_estimation::Scenario;

fn main() -> eh_estimation::Result<()> {
    let scenario = Scenario::scalar_reference();
    let problem = MdpProblem::new(&scenario, 30)?;
    let solved = problem.relative_value_iteration(1e-10, 1_000_000)?;
    println!(
        "J* = {:.8} after {} sweeps (residual {:.1e}, truncation bound {:.1e})",
        solved.avg_cost, solved.iterations, solved.residual, solved.truncation_bound
    );
    let space = problem.space();
    for cond in Condition::ALL {
        println!("condition {cond}: rows are battery m, columns rung l = 0..10");
        for m in 0..=space.b_max() {
            let row: Vec<String> = (0..=10)
                .map(|l| solved.policy.actions()[space.index(m, cond, l)].to_string())
                .collect();
            println!("  m = {m}: {}", row.join(" "));
        }
    }
    Ok(())
}
