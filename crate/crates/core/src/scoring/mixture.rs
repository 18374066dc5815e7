use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Event density: equal mixture of `N(mu, sigma^2)` and `N(-mu, sigma^2)`.
/// The quiescent density is the standard normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub mu: f64,
    pub sigma: f64,
    /// Prior probability of the event class.
    pub pi1: f64,
}

impl MixtureSpec {
    pub fn new(mu: f64, sigma: f64, pi1: f64) -> Result<Self> {
        let spec = Self { mu, sigma, pi1 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_variance(mu: f64, variance: f64, pi1: f64) -> Result<Self> {
        if variance.is_nan() || variance <= 0.0 {
            return Err(Error::invalid("sigma", "component variance must be positive"));
        }
        Self::new(mu, variance.sqrt(), pi1)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::invalid("mu", "must be finite"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid("sigma", "must be positive and finite"));
        }
        if !(self.pi1 > 0.0 && self.pi1 < 1.0) {
            return Err(Error::invalid("pi1", "event prior must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Variance of the event density, `sigma^2 + mu^2`.
    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma + self.mu * self.mu
    }
}

impl Default for MixtureSpec {
    /// Zero-mean, unit-variance mixture with `mu = 0.9`, `sigma^2 = 0.19`, even prior.
    fn default() -> Self {
        Self {
            mu: 0.9,
            sigma: 0.19f64.sqrt(),
            pi1: 0.5,
        }
    }
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn mixture_pdf(x: f64, spec: &MixtureSpec) -> f64 {
    let s = spec.sigma;
    (std_normal_pdf((x - spec.mu) / s) + std_normal_pdf((x + spec.mu) / s)) / (2.0 * s)
}

/// `log(p1(x) / p0(x))`, evaluated in log space so it stays finite in the tails.
pub fn log_likelihood_ratio(x: f64, spec: &MixtureSpec) -> f64 {
    let s = spec.sigma;
    let a = -0.5 * ((x - spec.mu) / s).powi(2);
    let b = -0.5 * ((x + spec.mu) / s).powi(2);
    let hi = a.max(b);
    let lse = hi + ((a - hi).exp() + (b - hi).exp()).ln();
    lse - (2.0 * s).ln() + 0.5 * x * x
}

/// Posterior probability of the event class, `pi1 p1 / ((1 - pi1) p0 + pi1 p1)`.
pub fn bayes_posterior_score(x: f64, spec: &MixtureSpec) -> f64 {
    let logit = (spec.pi1 / (1.0 - spec.pi1)).ln() + log_likelihood_ratio(x, spec);
    logistic(logit)
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
