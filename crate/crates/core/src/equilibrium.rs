//! Fixed point for the service probability ε.
//!
//! Each band's service probability ε_n depends on ε through the density of
//! active users it carries, and ε = 1 − Π(1 − ε_n(ε)). The solver works on
//! h(ε) = ε − [1 − Π(1 − ε_n(ε))] over (C/R, 1].

use serde::{Deserialize, Serialize};

use crate::error::{check_domain, Error, Result};
use crate::geometry::{
    access_probability_from_contention, check_thinning, coverage_probability, CoverageQuery,
    DEFAULT_THINNING,
};
use crate::numerics::bisect;
use crate::queueing::{
    delay_cdf, DelayCdf, DelayTransform, InversionMethod, OutageModel, TrafficModel, TwoClassQueue,
};

/// Points in the root pre-scan of h.
pub const PRESCAN_POINTS: usize = 64;
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Offset above C/R at which the search interval starts.
pub const LOWER_OFFSET: f64 = 1e-9;
const PICARD_DAMPING: f64 = 0.5;
const PICARD_MAX_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    /// Hz.
    pub bandwidth: f64,
    /// Probability that a BS of this band is free of primary traffic.
    pub vacancy: f64,
    /// BSs per m².
    pub bs_density: f64,
}

impl BandConfig {
    pub fn new(bandwidth: f64, vacancy: f64, bs_density: f64) -> Result<Self> {
        let band = Self {
            bandwidth,
            vacancy,
            bs_density,
        };
        band.validate()?;
        Ok(band)
    }

    pub fn validate(&self) -> Result<()> {
        check_domain("bandwidth", self.bandwidth, self.bandwidth > 0.0 && self.bandwidth.is_finite())?;
        check_domain("vacancy", self.vacancy, self.vacancy > 0.0 && self.vacancy <= 1.0)?;
        check_domain(
            "BS density",
            self.bs_density,
            self.bs_density > 0.0 && self.bs_density.is_finite(),
        )?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Users per m².
    pub user_density: f64,
    pub bands: Vec<BandConfig>,
    /// bits/s.
    pub target_rate: f64,
    pub traffic: TrafficModel,
    pub outage: OutageModel,
    pub thinning: f64,
}

impl Scenario {
    pub fn new(
        user_density: f64,
        bands: Vec<BandConfig>,
        target_rate: f64,
        traffic: TrafficModel,
        outage: OutageModel,
    ) -> Result<Self> {
        let s = Self {
            user_density,
            bands,
            target_rate,
            traffic,
            outage,
            thinning: DEFAULT_THINNING,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_domain(
            "user density",
            self.user_density,
            self.user_density > 0.0 && self.user_density.is_finite(),
        )?;
        if self.bands.is_empty() {
            return Err(Error::Config("scenario needs at least one band".into()));
        }
        for b in &self.bands {
            b.validate()?;
        }
        check_domain(
            "target rate",
            self.target_rate,
            self.target_rate > 0.0 && self.target_rate.is_finite(),
        )?;
        check_thinning(self.thinning)?;
        Ok(())
    }

    pub fn with_thinning(mut self, thinning: f64) -> Result<Self> {
        self.thinning = check_thinning(thinning)?;
        Ok(self)
    }

    pub fn with_target_rate(&self, target_rate: f64) -> Result<Self> {
        let mut s = self.clone();
        s.target_rate = target_rate;
        s.validate()?;
        Ok(s)
    }

    /// Same file-size law with throughput capacity `capacity`.
    pub fn with_capacity(&self, capacity: f64) -> Result<Self> {
        let mut s = self.clone();
        s.traffic = TrafficModel::from_capacity(capacity, self.traffic.file_size)?;
        Ok(s)
    }

    /// ρ_s = C/R.
    pub fn session_load(&self) -> f64 {
        self.traffic.capacity() / self.target_rate
    }

    fn coverages(&self) -> Vec<f64> {
        self.bands
            .iter()
            .map(|b| {
                let q = CoverageQuery::new(self.target_rate, b.bandwidth)
                    .expect("validated rate and bandwidth");
                coverage_probability(&q)
            })
            .collect()
    }
}

/// Per-band state at a given ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandState {
    /// ε_n.
    pub service_prob: f64,
    /// p_{n,v}.
    pub coverage_prob: f64,
    /// p_{n,a}.
    pub access_prob: f64,
    /// λ_n: active users per BS.
    pub normalized_load: f64,
    /// λ_{u,n}: active users per m².
    pub active_density: f64,
}

fn band_states(scenario: &Scenario, coverages: &[f64], eps: f64) -> Vec<BandState> {
    let rho_s = scenario.session_load();
    let weights: Vec<f64> = scenario
        .bands
        .iter()
        .zip(coverages)
        .map(|(b, p)| b.vacancy * p)
        .collect();
    let total: f64 = weights.iter().sum();
    scenario
        .bands
        .iter()
        .zip(coverages)
        .zip(&weights)
        .map(|((band, &p), &w)| {
            let share = if total > 0.0 { w / total } else { 0.0 };
            let active_density = scenario.user_density * rho_s / eps * share;
            let load = active_density / band.bs_density;
            let access = access_probability_from_contention(scenario.thinning * p * load);
            BandState {
                service_prob: band.vacancy * p * access,
                coverage_prob: p,
                access_prob: access,
                normalized_load: load,
                active_density,
            }
        })
        .collect()
}

/// ε_n of `band` (which should belong to `scenario`) at trial ε.
pub fn band_service_probability(band: &BandConfig, scenario: &Scenario, eps: f64) -> Result<BandState> {
    check_domain("trial service probability", eps, eps > 0.0 && eps <= 1.0)?;
    scenario.validate()?;
    band.validate()?;
    let coverages = scenario.coverages();
    let index = scenario
        .bands
        .iter()
        .position(|b| b == band)
        .ok_or_else(|| Error::Config("band is not part of the scenario".into()))?;
    Ok(band_states(scenario, &coverages, eps)[index])
}

fn combined(states: &[BandState]) -> f64 {
    1.0 - states.iter().map(|s| 1.0 - s.service_prob).product::<f64>()
}

/// h(ε) = ε − [1 − Π(1 − ε_n(ε))].
pub fn fixed_point_residual(scenario: &Scenario, eps: f64) -> Result<f64> {
    check_domain("trial service probability", eps, eps > 0.0 && eps <= 1.0)?;
    let coverages = scenario.coverages();
    Ok(eps - combined(&band_states(scenario, &coverages, eps)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub service_prob: f64,
    pub bands: Vec<BandState>,
    pub rho_o: f64,
    pub rho_s: f64,
    pub p_active: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Sign changes of h seen by the pre-scan (more than one: the largest root was taken).
    pub sign_changes: usize,
    pub used_bisection: bool,
}

impl EquilibriumSolution {
    pub fn multiple_roots(&self) -> bool {
        self.sign_changes > 1
    }
}

pub fn solve_equilibrium(scenario: &Scenario) -> Result<EquilibriumSolution> {
    scenario.validate()?;
    let rho_s = scenario.session_load();
    let coverages = scenario.coverages();
    let h = |eps: f64| eps - combined(&band_states(scenario, &coverages, eps));
    let g = |eps: f64| combined(&band_states(scenario, &coverages, eps));

    let lo = if rho_s > 0.0 { rho_s + LOWER_OFFSET } else { f64::MIN_POSITIVE.sqrt() };
    let hi = 1.0;
    if lo >= hi {
        return Err(Error::Infeasible {
            lo,
            hi,
            h_lo: f64::NAN,
            h_hi: h(hi),
        });
    }

    let xs: Vec<f64> = (0..PRESCAN_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (PRESCAN_POINTS - 1) as f64)
        .collect();
    let hs: Vec<f64> = xs.iter().map(|&x| h(x)).collect();
    if hs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoBracket {
            lo,
            hi,
            f_lo: hs[0],
            f_hi: hs[PRESCAN_POINTS - 1],
        });
    }

    let mut sign_changes = 0;
    let mut bracket = None;
    for i in 0..PRESCAN_POINTS - 1 {
        let (a, b) = (hs[i], hs[i + 1]);
        if a == 0.0 || (a < 0.0) != (b < 0.0) && b != 0.0 {
            sign_changes += 1;
            bracket = Some((xs[i], xs[i + 1]));
        }
    }
    if hs[PRESCAN_POINTS - 1] == 0.0 {
        sign_changes += 1;
        bracket = Some((hi, hi));
    }
    let Some((a, b)) = bracket else {
        return Err(Error::Infeasible {
            lo,
            hi,
            h_lo: hs[0],
            h_hi: hs[PRESCAN_POINTS - 1],
        });
    };

    let mut eps = b;
    let mut iterations = 0;
    let mut used_bisection = false;
    let mut accepted = a == b;
    if !accepted {
        for _ in 0..PICARD_MAX_ITER {
            iterations += 1;
            let next = (1.0 - PICARD_DAMPING) * eps + PICARD_DAMPING * g(eps);
            if !(a..=b).contains(&next) {
                break;
            }
            let step = (next - eps).abs();
            eps = next;
            if step < 1e-15 && h(eps).abs() < RESIDUAL_TOL {
                accepted = true;
                break;
            }
        }
    }
    if !accepted {
        used_bisection = true;
        eps = bisect(h, a, b, 1e-15)?;
        iterations += 1;
    }

    let residual = h(eps);
    if residual.abs() >= RESIDUAL_TOL {
        return Err(Error::NoConvergence {
            what: "service-probability fixed point",
            iterations,
            residual,
        });
    }
    let bands = band_states(scenario, &coverages, eps);
    Ok(EquilibriumSolution {
        service_prob: eps,
        bands,
        rho_o: 1.0 - eps,
        rho_s,
        p_active: rho_s / eps,
        residual,
        iterations,
        sign_changes,
        used_bisection,
    })
}

/// Solver output for one band next to the printed explicit single-band
/// expression, which is kept for comparison only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleBandComparison {
    pub solver: f64,
    /// `None` when the inner base is nonpositive or C = 0.
    pub explicit: Option<f64>,
}

pub fn single_band_explicit(scenario: &Scenario) -> Result<SingleBandComparison> {
    if scenario.bands.len() != 1 {
        return Err(Error::Config(format!(
            "explicit form needs exactly one band, got {}",
            scenario.bands.len()
        )));
    }
    let solver = solve_equilibrium(scenario)?.service_prob;
    let band = scenario.bands[0];
    let p = scenario.coverages()[0];
    let lam = scenario.thinning * scenario.user_density / band.bs_density;
    let rho_s = scenario.session_load();
    let base = 1.0 - lam * rho_s / band.vacancy;
    let explicit = if rho_s == 0.0 || base <= 0.0 {
        None
    } else {
        Some(p / 3.5 * lam * rho_s / (1.0 - base.powf(-2.0 / 7.0)))
    };
    Ok(SingleBandComparison { solver, explicit })
}

/// Delay statistics of a typical session at equilibrium.
#[derive(Debug, Clone)]
pub struct DelayStats {
    pub equilibrium: EquilibriumSolution,
    pub queue: TwoClassQueue,
    pub mean_delay: f64,
    pub cdf: Option<DelayCdf>,
}

impl DelayStats {
    pub fn transform(&self) -> DelayTransform {
        self.queue.transform()
    }
}

/// Solves the equilibrium and resolves the queue; inverts the CDF on `t_grid` if given.
pub fn delay_stats(
    scenario: &Scenario,
    t_grid: Option<&[f64]>,
    method: InversionMethod,
) -> Result<DelayStats> {
    let equilibrium = solve_equilibrium(scenario)?;
    let queue = TwoClassQueue::new(
        &scenario.traffic,
        &scenario.outage,
        equilibrium.service_prob,
        scenario.target_rate,
    )?;
    let cdf = match t_grid {
        Some(grid) => Some(delay_cdf(&queue.transform(), grid, method)?),
        None => None,
    };
    Ok(DelayStats {
        mean_delay: queue.mean_delay(),
        equilibrium,
        queue,
        cdf,
    })
}

/// Mean delay at equilibrium.
pub fn equilibrium_mean_delay(scenario: &Scenario) -> Result<f64> {
    Ok(delay_stats(scenario, None, InversionMethod::default())?.mean_delay)
}
