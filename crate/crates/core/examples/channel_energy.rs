//! Link budget to drop probabilities, and the long-run behaviour of the
//! harvesting environment.
//!
//! cargo run --example channel_energy

use eh_estimation::channel::{ChannelModel, LinkParams};
use eh_estimation::energy::{Condition, EnvironmentChain, HarvestDistribution};

fn main() -> eh_estimation::Result<()> {
    let channel = ChannelModel::from_link(LinkParams {
        beta: (10.0f64 / 3.0).ln(),
        n0: 1.0,
        w: 1.0,
    })?;
    println!("lambda = {:.6}", channel.lambda());
    for w in 0..=3 {
        println!("power {w}: drop {:.4}", channel.drop_probability(w));
    }

    let chain = EnvironmentChain::from_good_entries(0.7, 0.2)?;
    let harvest = HarvestDistribution::new(vec![0.1, 0.2, 0.3, 0.4], vec![0.4, 0.3, 0.2, 0.1])?;
    let (good, bad) = chain.stationary();
    println!("stationary condition: G {good:.3}, B {bad:.3}");
    let mean = good * harvest.mean(Condition::Good) + bad * harvest.mean(Condition::Bad);
    println!("mean harvest per step: {mean:.3}");
    Ok(())
}
