//! Exact long-run cost of every threshold pair next to the optimum.
//!
//! cargo run --release --example threshold_sweep

use eh_estimation::mdp::MdpProblem;
use eh_estimation::threshold::{threshold_costs, threshold_grid_search};
use eh_estimation::Scenario;

fn main() -> eh_estimation::Result<()> {
    let problem = MdpProblem::new(&Scenario::scalar_reference(), 30)?;
    let optimal = problem.relative_value_iteration(1e-10, 1_000_000)?.avg_cost;
    println!("R_G R_B  J");
    for (t, cost) in threshold_costs(&problem)? {
        println!("{:>3} {:>3}  {cost:.6}", t.r_good(), t.r_bad());
    }
    let (best, cost) = threshold_grid_search(&problem)?;
    println!(
        "best ({}, {}) at {cost:.6}; optimum {optimal:.6}",
        best.r_good(),
        best.r_bad()
    );
    Ok(())
}
