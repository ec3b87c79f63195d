//! Two-class M/G/1 preemptive-resume priority queue of a typical secondary
//! user.
//!
//! The high-priority class is the composite outage stream (Poisson arrivals
//! with mean spacing ᾱ_o, additive durations β_o); the low-priority class is
//! the user's own sessions (Poisson arrivals with mean spacing ᾱ_s, service
//! β_s = L/R). An outage stops transmission immediately and the session
//! resumes where it stopped.
//!
//! The outage duration mean is not a free parameter: it is tied to the
//! service probability through ρ_o = 1 − ε, so β̄_o = ᾱ_o·(1 − ε).
//!
//! Numerical tolerances nest: busy-root residual 1e-12, transform
//! normalization 1e-8, inverted CDF accuracy 1e-4.

mod distribution;
pub mod inversion;
mod transform;

pub use distribution::SizeDistribution;
pub use inversion::{delay_cdf, invert_cdf, DelayCdf, InversionMethod};
pub use transform::{
    outage_busy_root, outage_busy_root_exponential, outage_busy_root_polynomial, DelayTransform,
    TransformHandle, BUSY_ROOT_MAX_ITER, BUSY_ROOT_TOL,
};

use serde::{Deserialize, Serialize};

use crate::error::{check_domain, Error, Result};

/// Session-level secondary traffic of one user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficModel {
    /// Mean session inter-arrival time ᾱ_s in seconds; `+inf` means no traffic.
    pub session_interarrival_mean: f64,
    /// File size law in bits.
    pub file_size: SizeDistribution,
}

impl TrafficModel {
    pub fn new(session_interarrival_mean: f64, file_size: SizeDistribution) -> Result<Self> {
        check_domain(
            "session inter-arrival mean",
            session_interarrival_mean,
            session_interarrival_mean > 0.0,
        )?;
        Ok(Self {
            session_interarrival_mean,
            file_size,
        })
    }

    /// Traffic with throughput capacity `capacity` (bits/s); zero gives no sessions.
    pub fn from_capacity(capacity: f64, file_size: SizeDistribution) -> Result<Self> {
        check_domain("capacity", capacity, capacity >= 0.0 && capacity.is_finite())?;
        let spacing = if capacity == 0.0 {
            f64::INFINITY
        } else {
            file_size.mean() / capacity
        };
        Self::new(spacing, file_size)
    }

    /// C = L̄ / ᾱ_s.
    pub fn capacity(&self) -> f64 {
        self.file_size.mean() / self.session_interarrival_mean
    }

    pub fn session_rate(&self) -> f64 {
        1.0 / self.session_interarrival_mean
    }
}

/// Composite outage stream; the duration mean comes from the equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageModel {
    pub outage_interarrival_mean: f64,
    pub duration_shape: f64,
}

impl OutageModel {
    pub fn new(outage_interarrival_mean: f64, duration_shape: f64) -> Result<Self> {
        check_domain(
            "outage inter-arrival mean",
            outage_interarrival_mean,
            outage_interarrival_mean > 0.0 && outage_interarrival_mean.is_finite(),
        )?;
        check_domain(
            "outage duration shape",
            duration_shape,
            duration_shape > 0.0 && duration_shape.is_finite(),
        )?;
        Ok(Self {
            outage_interarrival_mean,
            duration_shape,
        })
    }

    pub fn exponential(outage_interarrival_mean: f64) -> Result<Self> {
        Self::new(outage_interarrival_mean, 1.0)
    }

    /// Duration law at service probability `eps`; `None` when ρ_o = 0.
    pub fn duration(&self, eps: f64) -> Result<Option<SizeDistribution>> {
        let mean = self.outage_interarrival_mean * (1.0 - eps);
        if mean <= 0.0 {
            return Ok(None);
        }
        let law = if self.duration_shape == 1.0 {
            SizeDistribution::exponential(mean)?
        } else {
            SizeDistribution::gamma(mean, self.duration_shape)?
        };
        Ok(Some(law))
    }
}

/// p_active = ρ_s / (1 − ρ_o) under the exponential transmission-time
/// approximation of a birth–death queue.
pub fn active_probability(rho_s: f64, rho_o: f64) -> Result<f64> {
    check_domain("outage fraction", rho_o, (0.0..1.0).contains(&rho_o))?;
    check_domain("session fraction", rho_s, rho_s >= 0.0)?;
    if rho_s >= 1.0 - rho_o {
        return Err(Error::Unstable { rho_s, rho_o });
    }
    Ok(rho_s / (1.0 - rho_o))
}

/// T̄ = β̄_s / (1 − ρ_o): mean span from first service to completion.
pub fn transmission_time_mean(service_mean: f64, rho_o: f64) -> Result<f64> {
    check_domain("service mean", service_mean, service_mean >= 0.0)?;
    if !(0.0..1.0).contains(&rho_o) {
        return Err(Error::Unstable { rho_s: 0.0, rho_o });
    }
    Ok(service_mean / (1.0 - rho_o))
}

/// Fully resolved queue at a given service probability and target rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoClassQueue {
    pub session_rate: f64,
    /// Service time β_s = L/R.
    pub service: SizeDistribution,
    pub outage_rate: f64,
    /// Outage duration β_o, absent when ρ_o = 0.
    pub outage: Option<SizeDistribution>,
}

impl TwoClassQueue {
    /// Resolves the queue; fails with `Unstable` unless ε > C/R.
    pub fn new(
        traffic: &TrafficModel,
        outage: &OutageModel,
        eps: f64,
        target_rate: f64,
    ) -> Result<Self> {
        check_domain("service probability", eps, eps > 0.0 && eps <= 1.0)?;
        check_domain("target rate", target_rate, target_rate > 0.0)?;
        let queue = Self {
            session_rate: traffic.session_rate(),
            service: traffic.file_size.scaled_down(target_rate)?,
            outage_rate: 1.0 / outage.outage_interarrival_mean,
            outage: outage.duration(eps)?,
        };
        if queue.rho_s() >= eps {
            return Err(Error::Unstable {
                rho_s: queue.rho_s(),
                rho_o: queue.rho_o(),
            });
        }
        Ok(queue)
    }

    pub fn rho_s(&self) -> f64 {
        self.session_rate * self.service.mean()
    }

    pub fn rho_o(&self) -> f64 {
        self.outage
            .map_or(0.0, |d| self.outage_rate * d.mean())
    }

    /// Mean session delay (waiting plus transmission):
    /// D̄ = (λ_s E[β_s²] + λ_o E[β_o²]) / (2(1 − ρ_o)(1 − ρ_o − ρ_s)) + β̄_s/(1 − ρ_o).
    pub fn mean_delay(&self) -> f64 {
        let eps = 1.0 - self.rho_o();
        let mut second = 0.0;
        if self.session_rate > 0.0 {
            second += self.session_rate * self.service.second_moment();
        }
        if let Some(d) = self.outage {
            second += self.outage_rate * d.second_moment();
        }
        let waiting = if second == 0.0 {
            0.0
        } else {
            second / (2.0 * eps * (eps - self.rho_s()))
        };
        waiting + self.service.mean() / eps
    }

    pub fn transform(&self) -> DelayTransform {
        DelayTransform::new(*self)
    }
}

/// Mean delay of a session at service probability `eps` and rate `target_rate`.
pub fn mean_delay(
    traffic: &TrafficModel,
    outage: &OutageModel,
    eps: f64,
    target_rate: f64,
) -> Result<f64> {
    Ok(TwoClassQueue::new(traffic, outage, eps, target_rate)?.mean_delay())
}

/// Laplace transform of the session delay.
pub fn delay_transform(
    traffic: &TrafficModel,
    outage: &OutageModel,
    eps: f64,
    target_rate: f64,
) -> Result<DelayTransform> {
    Ok(TwoClassQueue::new(traffic, outage, eps, target_rate)?.transform())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_traffic(file_mean: f64, capacity: f64) -> TrafficModel {
        TrafficModel::from_capacity(capacity, SizeDistribution::exponential(file_mean).unwrap())
            .unwrap()
    }

    /// Exponential/exponential closed form written out independently.
    fn delay_exp_closed_form(c: f64, r: f64, l: f64, a_o: f64, eps: f64) -> f64 {
        (c * l / (r * r) + (1.0 - eps).powi(2) * a_o) / (eps * (eps - c / r)) + l / (r * eps)
    }

    #[test]
    fn active_probability_cases() {
        assert!((active_probability(0.3, 0.0).unwrap() - 0.3).abs() < 1e-15);
        assert!((active_probability(0.25, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            active_probability(0.5, 0.5),
            Err(Error::Unstable { .. })
        ));
        assert!(active_probability(0.1, 1.0).is_err());
    }

    #[test]
    fn transmission_time_cases() {
        assert_eq!(transmission_time_mean(2.5, 0.0).unwrap(), 2.5);
        assert!((transmission_time_mean(2.0, 0.5).unwrap() - 4.0).abs() < 1e-15);
        assert!(transmission_time_mean(2.0, 1.0).is_err());
    }

    #[test]
    fn mm1_limit() {
        let traffic = exp_traffic(10.0, 5.0);
        let outage = OutageModel::exponential(7.0).unwrap();
        let d = mean_delay(&traffic, &outage, 1.0, 10.0).unwrap();
        assert!((d - 2.0).abs() < 1e-14);
    }

    #[test]
    fn empty_queue_limit() {
        let outage = OutageModel::exponential(7.0).unwrap();
        let d = mean_delay(&exp_traffic(10.0, 0.0), &outage, 1.0, 4.0).unwrap();
        assert!((d - 2.5).abs() < 1e-15);
        let d = mean_delay(&exp_traffic(10.0, 1e-9), &outage, 1.0, 4.0).unwrap();
        assert!((d - 2.5).abs() < 1e-8);
    }

    #[test]
    fn zero_capacity_keeps_outage_wait() {
        let outage = OutageModel::exponential(10.0).unwrap();
        let eps = 0.6;
        let d = mean_delay(&exp_traffic(10.0, 0.0), &outage, eps, 4.0).unwrap();
        let expected = delay_exp_closed_form(0.0, 4.0, 10.0, 10.0, eps);
        assert!((d - expected).abs() < 1e-14);
    }

    #[test]
    fn exponential_case_matches_closed_form() {
        let outage = OutageModel::exponential(10.0).unwrap();
        let d = mean_delay(&exp_traffic(10.0, 1.0), &outage, 0.6, 4.0).unwrap();
        let expected = delay_exp_closed_form(1.0, 4.0, 10.0, 10.0, 0.6);
        assert!((d - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn gamma_shape_one_reduces_to_exponential() {
        for (c, r, eps) in [(1.0, 4.0, 0.6), (0.3, 2.0, 0.9), (2.0, 5.0, 0.45)] {
            let exp_t = exp_traffic(10.0, c);
            let gam_t =
                TrafficModel::from_capacity(c, SizeDistribution::gamma(10.0, 1.0).unwrap()).unwrap();
            let exp_o = OutageModel::exponential(10.0).unwrap();
            let gam_o = OutageModel::new(10.0, 1.0).unwrap();
            let a = mean_delay(&exp_t, &exp_o, eps, r).unwrap();
            let b = mean_delay(&gam_t, &gam_o, eps, r).unwrap();
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn gamma_closed_form() {
        let (l, c, r, a_o, eps, k_l, k_o) = (10.0, 1.0, 4.0, 10.0, 0.6, 2.5, 0.7);
        let traffic =
            TrafficModel::from_capacity(c, SizeDistribution::gamma(l, k_l).unwrap()).unwrap();
        let outage = OutageModel::new(a_o, k_o).unwrap();
        let expected = (c * l / (r * r) * (k_l + 1.0) / k_l
            + (1.0 - eps) * (1.0 - eps) * a_o * (k_o + 1.0) / k_o)
            / (2.0 * eps * (eps - c / r))
            + l / (r * eps);
        let d = mean_delay(&traffic, &outage, eps, r).unwrap();
        assert!((d - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn stability_boundary() {
        let outage = OutageModel::exponential(10.0).unwrap();
        let r = 4.0;
        let eps = 0.6;
        let mut last = 0.0;
        for c in [0.5, 1.0, 1.5, 2.0, 2.3, 2.39, 2.399] {
            let d = mean_delay(&exp_traffic(10.0, c), &outage, eps, r).unwrap();
            assert!(d > last);
            last = d;
        }
        assert!(matches!(
            mean_delay(&exp_traffic(10.0, 2.4), &outage, eps, r),
            Err(Error::Unstable { .. })
        ));
        assert!(mean_delay(&exp_traffic(10.0, 3.0), &outage, eps, r).is_err());
    }
}
