#![allow(dead_code)]

use eh_estimation::channel::ChannelModel;
use eh_estimation::energy::{Condition, EnergyModel, EnvironmentChain, HarvestDistribution};
use eh_estimation::kalman::SystemModel;
use eh_estimation::Scenario;
use nalgebra::DMatrix;
use rand::Rng;

fn uniform<R: Rng>(rng: &mut R, rows: usize, cols: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

fn random_pd<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let l = uniform(rng, n, n, -1.0, 1.0);
    &l * l.transpose() + DMatrix::identity(n, n) * 0.1
}

/// Plant with `n_x ≤ max_dim` satisfying every standing assumption; draws
/// again on the rare rank-deficient sample. The spectral radius of `A` lies
/// in `radius`.
pub fn random_system<R: Rng>(rng: &mut R, max_dim: usize, radius: std::ops::Range<f64>) -> SystemModel {
    loop {
        let n = rng.random_range(1..=max_dim);
        let p = rng.random_range(1..=n);
        let mut a = uniform(rng, n, n, -1.0, 1.0);
        let rho = a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
        if rho < 1e-6 {
            continue;
        }
        a *= rng.random_range(radius.clone()) / rho;
        let c = uniform(rng, p, n, -1.0, 1.0);
        let pi0 = random_pd(rng, n);
        if let Ok(model) = SystemModel::new(a, c, random_pd(rng, n), random_pd(rng, p), pi0) {
            return model;
        }
    }
}

fn random_distribution<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let head: f64 = p[..len - 1].iter().sum();
    p[len - 1] = 1.0 - head;
    p
}

/// Scalar plant with every probability strictly inside (0, 1), so every
/// stationary policy induces a single recurrent class.
pub fn random_scenario<R: Rng>(rng: &mut R, b_max: u32) -> Scenario {
    let system = SystemModel::scalar(
        rng.random_range(0.3..1.3),
        rng.random_range(0.3..1.5),
        rng.random_range(0.2..1.5),
        rng.random_range(0.2..1.5),
        1.0,
    )
    .unwrap();
    let channel = ChannelModel::from_lambda(rng.random_range(0.05..0.95)).unwrap();
    let p_gg = rng.random_range(0.05..0.95);
    let p_bg = rng.random_range(0.05..0.95);
    let chain = EnvironmentChain::from_good_entries(p_gg, p_bg).unwrap();
    let support = b_max as usize + 1;
    let harvest =
        HarvestDistribution::new(random_distribution(rng, support), random_distribution(rng, support)).unwrap();
    let energy = EnergyModel::new(chain, harvest, 0, Condition::Good).unwrap();
    Scenario::new(system, channel, energy).unwrap()
}
