//! Remote state estimation with an energy-harvesting sensor.
//!
//! A smart sensor runs a Kalman filter on an LTI plant and ships its
//! estimate over a lossy channel whose success probability grows with the
//! transmit energy. Energy comes from a harvester driven by a two-state
//! environment and is stored in a finite battery. The crate provides
//!
//! - [`kalman`]: the plant, the local filter, the covariance ladder and the remote estimator;
//! - [`channel`] and [`energy`]: the link and supply models;
//! - [`mdp`]: the average-cost MDP, relative value iteration and exact policy evaluation;
//! - [`threshold`]: the condition-dependent threshold rule and its `(b', e)` chain;
//! - [`sim`]: seeded Monte Carlo with common random numbers;
//! - [`config`] and [`harness`]: the experiment file format and the batch commands
//!   behind the `eh-estimation` binary.
//!
//! ```
//! use eh_estimation::{mdp::MdpProblem, Scenario};
//!
//! let scenario = Scenario::scalar_reference();
//! let problem = MdpProblem::new(&scenario, 30).unwrap();
//! let solved = problem.relative_value_iteration(1e-10, 1_000_000).unwrap();
//! assert!(solved.avg_cost >= scenario.steady().trace());
//! ```

pub mod channel;
pub mod config;
pub mod csvio;
pub mod energy;
mod error;
pub mod harness;
pub mod kalman;
pub mod linalg;
pub mod markov;
pub mod mdp;
mod scenario;
pub mod sim;
pub mod threshold;

pub use error::{Error, Result};
pub use scenario::Scenario;
