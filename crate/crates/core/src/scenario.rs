//! A complete problem instance: plant, channel and energy supply.

use nalgebra::DMatrix;

use crate::channel::ChannelModel;
use crate::energy::{Condition, EnergyModel, EnvironmentChain, HarvestDistribution};
use crate::error::Result;
use crate::kalman::{CovarianceLadder, SystemModel};

#[derive(Debug, Clone)]
pub struct Scenario {
    pub system: SystemModel,
    pub channel: ChannelModel,
    pub energy: EnergyModel,
    steady: DMatrix<f64>,
}

impl Scenario {
    pub fn new(system: SystemModel, channel: ChannelModel, energy: EnergyModel) -> Result<Self> {
        let steady = system.steady_state()?;
        Ok(Self {
            system,
            channel,
            energy,
            steady,
        })
    }

    /// Scalar plant `A = 0.9, C = 0.7, Q = R = 0.8` with `λ = 0.7`, a
    /// battery of three quanta and the good/bad harvest laws
    /// `(0.1, 0.2, 0.3, 0.4)` / `(0.4, 0.3, 0.2, 0.1)`.
    pub fn scalar_reference() -> Self {
        let system = SystemModel::scalar(0.9, 0.7, 0.8, 0.8, 1.0).expect("valid plant");
        let channel = ChannelModel::from_lambda(0.7).expect("valid channel");
        let chain = EnvironmentChain::new(0.7, 0.3, 0.2, 0.8).expect("valid chain");
        let harvest =
            HarvestDistribution::new(vec![0.1, 0.2, 0.3, 0.4], vec![0.4, 0.3, 0.2, 0.1])
                .expect("valid harvest");
        let energy = EnergyModel::new(chain, harvest, 0, Condition::Good).expect("valid energy");
        Self::new(system, channel, energy).expect("reference scenario")
    }

    /// Steady-state error covariance `P̄` of the local filter.
    pub fn steady(&self) -> &DMatrix<f64> {
        &self.steady
    }

    pub fn ladder(&self, depth: usize) -> Result<CovarianceLadder> {
        CovarianceLadder::from_steady(&self.system, self.steady.clone(), depth)
    }

    pub fn b_max(&self) -> u32 {
        self.energy.b_max()
    }
}
