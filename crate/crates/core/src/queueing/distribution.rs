use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{check_domain, Result};

/// Law of a nonnegative size (file bits, outage seconds, service seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum SizeDistribution {
    Exponential { mean: f64 },
    Gamma { mean: f64, shape: f64 },
}

impl SizeDistribution {
    pub fn exponential(mean: f64) -> Result<Self> {
        check_domain("distribution mean", mean, mean > 0.0 && mean.is_finite())?;
        Ok(Self::Exponential { mean })
    }

    pub fn gamma(mean: f64, shape: f64) -> Result<Self> {
        check_domain("distribution mean", mean, mean > 0.0 && mean.is_finite())?;
        check_domain("gamma shape", shape, shape > 0.0 && shape.is_finite())?;
        Ok(Self::Gamma { mean, shape })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { mean } | Self::Gamma { mean, .. } => mean,
        }
    }

    /// Exponential reports shape 1.
    pub fn shape(&self) -> f64 {
        match *self {
            Self::Exponential { .. } => 1.0,
            Self::Gamma { shape, .. } => shape,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            Self::Exponential { mean } => 2.0 * mean * mean,
            Self::Gamma { mean, shape } => mean * mean * (shape + 1.0) / shape,
        }
    }

    /// Same family and shape with a different mean.
    pub fn with_mean(&self, mean: f64) -> Result<Self> {
        match *self {
            Self::Exponential { .. } => Self::exponential(mean),
            Self::Gamma { shape, .. } => Self::gamma(mean, shape),
        }
    }

    /// Law of `X / divisor`, e.g. service time L/R from file size L.
    pub fn scaled_down(&self, divisor: f64) -> Result<Self> {
        self.with_mean(self.mean() / divisor)
    }

    /// Laplace–Stieltjes transform E[e^{-zX}].
    pub fn laplace(&self, z: Complex64) -> Complex64 {
        match *self {
            Self::Exponential { mean } => 1.0 / (1.0 + z * mean),
            Self::Gamma { mean, shape } => {
                let theta = mean / shape;
                (-shape * (1.0 + z * theta).ln()).exp()
            }
        }
    }

    /// d/dz of [`Self::laplace`].
    pub fn laplace_derivative(&self, z: Complex64) -> Complex64 {
        match *self {
            Self::Exponential { mean } => {
                let d = 1.0 + z * mean;
                -mean / (d * d)
            }
            Self::Gamma { mean, shape } => {
                let theta = mean / shape;
                -mean * (-(shape + 1.0) * (1.0 + z * theta).ln()).exp()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Exponential { mean } => Exp::new(1.0 / mean).expect("positive rate").sample(rng),
            Self::Gamma { mean, shape } => Gamma::new(shape, mean / shape)
                .expect("positive shape and scale")
                .sample(rng),
        }
    }
}
