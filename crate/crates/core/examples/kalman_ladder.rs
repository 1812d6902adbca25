//! Steady-state covariance of the scalar reference plant and the first rungs
//! of the covariance ladder `h^t(P̄)`.
//!
//! cargo run --example kalman_ladder

use eh_estimation::kalman::{CovarianceLadder, SystemModel};

fn main() -> eh_estimation::Result<()> {
    let model = SystemModel::scalar(0.9, 0.7, 0.8, 0.8, 1.0)?;
    let ladder = CovarianceLadder::build(&model, 8)?;
    println!("P̄ = {:.12}", ladder.steady()[(0, 0)]);
    for (t, tr) in ladder.traces().iter().enumerate() {
        println!("t = {t}  Tr h^t(P̄) = {tr:.6}");
    }
    assert!(ladder.strictly_increasing());
    Ok(())
}
