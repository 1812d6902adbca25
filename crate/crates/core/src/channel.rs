//! Power-dependent packet loss over an AWGN link with QAM symbols.
//!
//! A packet sent with `ω` energy quanta is dropped with probability
//! `(1 − λ)^ω`, where `λ = 1 − exp(−β / (N₀ W))`.

use rand::Rng;

use crate::error::{Error, Result};

/// Agreement required between a configured `λ` and one derived from `(β, N₀, W)`.
pub const LAMBDA_AGREEMENT: f64 = 1e-9;

/// Physical link parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub beta: f64,
    pub n0: f64,
    pub w: f64,
}

/// Time-invariant lossy channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    lambda: f64,
    link: Option<LinkParams>,
}

pub fn lambda_from_params(beta: f64, n0: f64, w: f64) -> Result<f64> {
    for (name, v) in [("beta", beta), ("n0", n0), ("w", w)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::param(name, format!("must be positive and finite, got {v}")));
        }
    }
    // -expm1(-x) = 1 - exp(-x) without cancellation for small x.
    Ok(-(-beta / (n0 * w)).exp_m1())
}

impl ChannelModel {
    pub fn from_lambda(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::param("lambda", format!("must lie in (0, 1), got {lambda}")));
        }
        Ok(Self { lambda, link: None })
    }

    pub fn from_link(link: LinkParams) -> Result<Self> {
        let lambda = lambda_from_params(link.beta, link.n0, link.w)?;
        let mut channel = Self::from_lambda(lambda)?;
        channel.link = Some(link);
        Ok(channel)
    }

    /// Accepts both parameterisations; they must agree to [`LAMBDA_AGREEMENT`].
    pub fn from_lambda_and_link(lambda: f64, link: LinkParams) -> Result<Self> {
        let channel = Self::from_link(link)?;
        if (channel.lambda - lambda).abs() > LAMBDA_AGREEMENT {
            return Err(Error::param(
                "lambda",
                format!(
                    "configured value {lambda} disagrees with {} derived from beta/n0/w",
                    channel.lambda
                ),
            ));
        }
        Ok(channel)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn link(&self) -> Option<LinkParams> {
        self.link
    }

    /// `(1 − λ)^ω`; exactly one when `ω = 0`.
    pub fn drop_probability(&self, power: u32) -> f64 {
        if power == 0 {
            return 1.0;
        }
        (1.0 - self.lambda).powi(power as i32)
    }

    pub fn arrival_probability(&self, power: u32) -> f64 {
        1.0 - self.drop_probability(power)
    }

    /// Consumes exactly one uniform draw whatever the power, so streams stay
    /// aligned across policies. Arrival iff `u < 1 − (1 − λ)^ω`.
    pub fn sample_arrival<R: Rng + ?Sized>(&self, power: u32, rng: &mut R) -> bool {
        let u: f64 = rng.random();
        u < self.arrival_probability(power)
    }
}
