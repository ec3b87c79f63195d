//! Capacity limits of homogeneous band sets and delay-optimal rate choice.
//!
//! At the capacity limit the queue sits on its stability boundary ε = C/R,
//! which removes ε from the band load: λ_n = λ_u/(λ_b N). The limit then
//! has the closed form C^lim(R) = R·[1 − (1 − ε_N(R))^N].

use serde::{Deserialize, Serialize};

use crate::equilibrium::{equilibrium_mean_delay, BandConfig, Scenario};
use crate::error::{check_domain, Error, Result};
use crate::geometry::{
    access_probability_from_contention, check_thinning, rate_to_sinr, sinr_ccdf_lim,
    DEFAULT_THINNING,
};
use crate::numerics::{bisect, brent, golden_max, golden_min, logspace};
use crate::queueing::{OutageModel, TrafficModel};

/// Rate bracket for the optimizers, in units of the band bandwidth.
pub const RATE_SCAN_RANGE: (f64, f64) = (1e-3, 20.0);
pub const RATE_SCAN_POINTS: usize = 256;
pub const GOLDEN_REL_TOL: f64 = 1e-8;
/// Largest band count tried by [`best_band_count`].
pub const MAX_BAND_COUNT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthMode {
    /// Mode I: each band keeps bandwidth W.
    FixedPerBand,
    /// Mode II: a total bandwidth W is split evenly over the N bands.
    FixedSystem,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousSetup {
    pub bands: usize,
    pub user_density: f64,
    pub bs_density: f64,
    pub vacancy: f64,
    /// Per-band bandwidth in mode I, total bandwidth in mode II.
    pub bandwidth: f64,
    pub mode: BandwidthMode,
    pub thinning: f64,
}

impl HomogeneousSetup {
    pub fn new(
        bands: usize,
        user_density: f64,
        bs_density: f64,
        vacancy: f64,
        bandwidth: f64,
        mode: BandwidthMode,
    ) -> Result<Self> {
        let s = Self {
            bands,
            user_density,
            bs_density,
            vacancy,
            bandwidth,
            mode,
            thinning: DEFAULT_THINNING,
        };
        s.validate()?;
        Ok(s)
    }

    /// W = 1, Ω = 1, λ_b = 1e-6 at the given density ratio.
    pub fn normalized(bands: usize, density_ratio: f64, mode: BandwidthMode) -> Result<Self> {
        Self::new(bands, density_ratio * 1e-6, 1e-6, 1.0, 1.0, mode)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bands == 0 {
            return Err(Error::Config("band count must be at least 1".into()));
        }
        check_domain("user density", self.user_density, self.user_density > 0.0 && self.user_density.is_finite())?;
        check_domain("BS density", self.bs_density, self.bs_density > 0.0 && self.bs_density.is_finite())?;
        check_domain("vacancy", self.vacancy, self.vacancy > 0.0 && self.vacancy <= 1.0)?;
        check_domain("bandwidth", self.bandwidth, self.bandwidth > 0.0 && self.bandwidth.is_finite())?;
        check_thinning(self.thinning)?;
        Ok(())
    }

    pub fn with_bands(&self, bands: usize) -> Self {
        Self { bands, ..*self }
    }

    pub fn with_mode(&self, mode: BandwidthMode) -> Self {
        Self { mode, ..*self }
    }

    /// λ_N = λ_u/(λ_b N).
    pub fn band_load(&self) -> f64 {
        self.user_density / (self.bs_density * self.bands as f64)
    }

    /// Bandwidth of one band.
    pub fn band_bandwidth(&self) -> f64 {
        match self.mode {
            BandwidthMode::FixedPerBand => self.bandwidth,
            BandwidthMode::FixedSystem => self.bandwidth / self.bands as f64,
        }
    }

    fn coverage(&self, rate: f64) -> f64 {
        sinr_ccdf_lim(rate_to_sinr(rate / self.band_bandwidth())).expect("nonnegative threshold")
    }

    /// ε_N at the stability boundary.
    pub fn boundary_service_probability(&self, rate: f64) -> f64 {
        let p = self.coverage(rate);
        self.vacancy * p * access_probability_from_contention(self.thinning * p * self.band_load())
    }

    /// Scenario with N copies of the band at the given rate and traffic.
    pub fn scenario(&self, rate: f64, traffic: TrafficModel, outage: OutageModel) -> Result<Scenario> {
        let band = BandConfig::new(self.band_bandwidth(), self.vacancy, self.bs_density)?;
        Scenario::new(self.user_density, vec![band; self.bands], rate, traffic, outage)?
            .with_thinning(self.thinning)
    }
}

fn check_rate(rate: f64) -> Result<f64> {
    check_domain("target rate", rate, rate > 0.0 && rate.is_finite())
}

fn limit(setup: &HomogeneousSetup, rate: f64) -> f64 {
    let eps = setup.boundary_service_probability(rate);
    rate * -(setup.bands as f64 * (-eps).ln_1p()).exp_m1()
}

fn require_mode(setup: &HomogeneousSetup, mode: BandwidthMode) -> Result<()> {
    setup.validate()?;
    if setup.mode != mode {
        return Err(Error::Config(format!("expected {mode:?} setup, got {:?}", setup.mode)));
    }
    Ok(())
}

/// C_I^lim(R).
pub fn capacity_limit_fixed_band(setup: &HomogeneousSetup, rate: f64) -> Result<f64> {
    require_mode(setup, BandwidthMode::FixedPerBand)?;
    Ok(limit(setup, check_rate(rate)?))
}

/// C_II^lim(R).
pub fn capacity_limit_fixed_system(setup: &HomogeneousSetup, rate: f64) -> Result<f64> {
    require_mode(setup, BandwidthMode::FixedSystem)?;
    Ok(limit(setup, check_rate(rate)?))
}

/// Capacity limit in whichever mode the setup is in.
pub fn capacity_limit(setup: &HomogeneousSetup, rate: f64) -> Result<f64> {
    setup.validate()?;
    Ok(limit(setup, check_rate(rate)?))
}

/// dC^lim/dR = f₀ + R·f₀′ with f₀ = 1 − (1 − ε_N)^N, by the chain
/// R → χ = √(2^{R/W} − 1) → p → ε_N.
pub fn capacity_limit_derivative(setup: &HomogeneousSetup, rate: f64) -> Result<f64> {
    setup.validate()?;
    check_rate(rate)?;
    let n = setup.bands as f64;
    let w = setup.band_bandwidth();
    let lam = setup.thinning * setup.band_load();
    let x = rate_to_sinr(rate / w);
    let chi = x.sqrt();
    let p = 1.0 / (1.0 + chi * chi.atan());
    let eps = setup.boundary_service_probability(rate);

    let deps_dp = setup.vacancy * (1.0 + lam * p / 3.5).powf(-4.5);
    let dp_dchi = -(chi.atan() + chi / (1.0 + chi * chi)) * p * p;
    let dchi_dr = if chi > 0.0 {
        std::f64::consts::LN_2 / w * (x + 1.0) / (2.0 * chi)
    } else {
        f64::INFINITY
    };
    let f0 = -(n * (-eps).ln_1p()).exp_m1();
    let df0 = n * (1.0 - eps).powf(n - 1.0) * deps_dp * dp_dchi * dchi_dr;
    Ok(f0 + rate * df0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalRate {
    pub rate: f64,
    pub capacity: f64,
    /// Derivative normalized by C^lim/R at the returned rate.
    pub normalized_derivative: f64,
    /// Golden-section fallback was used because the derivative had no sign change.
    pub fallback: bool,
}

fn optimize_rate(setup: &HomogeneousSetup) -> Result<OptimalRate> {
    let w = setup.band_bandwidth();
    let grid = logspace(RATE_SCAN_RANGE.0 * w, RATE_SCAN_RANGE.1 * w, RATE_SCAN_POINTS);
    let deriv = |r: f64| capacity_limit_derivative(setup, r).expect("validated setup");
    let ds: Vec<f64> = grid.iter().map(|&r| deriv(r)).collect();
    let bracket = (0..grid.len() - 1).find(|&i| ds[i] > 0.0 && ds[i + 1] <= 0.0);

    let (rate, fallback) = match bracket {
        Some(i) => (brent(deriv, grid[i], grid[i + 1], 1e-14 * grid[i + 1])?, false),
        None => {
            let values: Vec<f64> = grid.iter().map(|&r| limit(setup, r)).collect();
            let best = (0..grid.len())
                .max_by(|&a, &b| values[a].total_cmp(&values[b]))
                .expect("nonempty grid");
            let lo = grid[best.saturating_sub(1)];
            let hi = grid[(best + 1).min(grid.len() - 1)];
            (golden_max(|r| limit(setup, r), lo, hi, GOLDEN_REL_TOL).0, true)
        }
    };
    let capacity = limit(setup, rate);
    Ok(OptimalRate {
        rate,
        capacity,
        normalized_derivative: deriv(rate) / (capacity / rate),
        fallback,
    })
}

/// R* and C_I^max for a mode-I setup.
pub fn optimal_rate_fixed_band(setup: &HomogeneousSetup) -> Result<OptimalRate> {
    require_mode(setup, BandwidthMode::FixedPerBand)?;
    optimize_rate(setup)
}

/// C_II^max = C_I^max / N, with R_II* = R_I*/N.
pub fn max_capacity_fixed_system(setup: &HomogeneousSetup) -> Result<OptimalRate> {
    require_mode(setup, BandwidthMode::FixedSystem)?;
    let n = setup.bands as f64;
    let mode_one = optimal_rate_fixed_band(&setup.with_mode(BandwidthMode::FixedPerBand))?;
    Ok(OptimalRate {
        rate: mode_one.rate / n,
        capacity: mode_one.capacity / n,
        ..mode_one
    })
}

/// Direct maximization of C_II^lim over R, used as a cross-check of the
/// scaling identity.
pub fn max_capacity_fixed_system_direct(setup: &HomogeneousSetup) -> Result<OptimalRate> {
    require_mode(setup, BandwidthMode::FixedSystem)?;
    optimize_rate(setup)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandCountOptimum {
    pub bands: usize,
    pub rate: f64,
    pub capacity: f64,
}

/// Best N in 1..=max_bands for mode II; returns the optimum and the full table.
pub fn best_band_count(
    setup: &HomogeneousSetup,
    max_bands: usize,
) -> Result<(BandCountOptimum, Vec<BandCountOptimum>)> {
    if max_bands == 0 {
        return Err(Error::Config("max band count must be at least 1".into()));
    }
    let mut table = Vec::with_capacity(max_bands);
    for n in 1..=max_bands {
        let s = setup.with_bands(n).with_mode(BandwidthMode::FixedSystem);
        let opt = max_capacity_fixed_system(&s)?;
        table.push(BandCountOptimum {
            bands: n,
            rate: opt.rate,
            capacity: opt.capacity,
        });
    }
    let best = *table
        .iter()
        .max_by(|a, b| a.capacity.total_cmp(&b.capacity))
        .expect("nonempty table");
    Ok((best, table))
}

/// Straight-line law C_II^*max ≈ 0.6359 − 0.052·log₂(λ_u/λ_b).
pub fn scaling_approximation(density_ratio: f64) -> Result<f64> {
    check_domain("density ratio", density_ratio, density_ratio > 0.0 && density_ratio.is_finite())?;
    Ok(0.6359 - 0.052 * density_ratio.log2())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayOptimum {
    pub rate: f64,
    pub mean_delay: f64,
}

fn delay_or_inf(scenario: &Scenario, rate: f64) -> Result<f64> {
    match equilibrium_mean_delay(&scenario.with_target_rate(rate)?) {
        Ok(d) => Ok(d),
        Err(Error::Infeasible { .. } | Error::Unstable { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

pub const DELAY_SCAN_POINTS: usize = 160;

/// Minimizes the equilibrium mean delay over the target rate.
pub fn min_delay_over_rate(scenario: &Scenario) -> Result<DelayOptimum> {
    scenario.validate()?;
    let w_lo = scenario.bands.iter().map(|b| b.bandwidth).fold(f64::INFINITY, f64::min);
    let w_hi = scenario.bands.iter().map(|b| b.bandwidth).fold(0.0, f64::max);
    let lo = (RATE_SCAN_RANGE.0 * w_lo).max(scenario.traffic.capacity() * (1.0 + 1e-9));
    let hi = RATE_SCAN_RANGE.1 * w_hi;
    if lo >= hi {
        return Err(Error::Infeasible {
            lo,
            hi,
            h_lo: f64::NAN,
            h_hi: f64::NAN,
        });
    }
    let grid = logspace(lo, hi, DELAY_SCAN_POINTS);
    let mut values = Vec::with_capacity(grid.len());
    for &r in &grid {
        values.push(delay_or_inf(scenario, r)?);
    }
    let best = (0..grid.len())
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("nonempty grid");
    if !values[best].is_finite() {
        return Err(Error::Infeasible {
            lo,
            hi,
            h_lo: f64::INFINITY,
            h_hi: f64::INFINITY,
        });
    }
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(grid.len() - 1)];
    let mut failure = None;
    let (rate, mean_delay) = golden_min(
        |r| match delay_or_inf(scenario, r) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        },
        a,
        b,
        GOLDEN_REL_TOL,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    if mean_delay <= values[best] {
        Ok(DelayOptimum { rate, mean_delay })
    } else {
        Ok(DelayOptimum {
            rate: grid[best],
            mean_delay: values[best],
        })
    }
}

/// Largest capacity whose delay-optimal mean delay stays within `target_delay`.
///
/// Returns `Ok(None)` when even C = 0 misses the target.
pub fn capacity_at_delay(scenario: &Scenario, target_delay: f64) -> Result<Option<f64>> {
    check_domain("target delay", target_delay, target_delay > 0.0)?;
    let dmin = |c: f64| -> Result<f64> {
        match min_delay_over_rate(&scenario.with_capacity(c)?) {
            Ok(o) => Ok(o.mean_delay),
            Err(Error::Infeasible { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    };
    if dmin(0.0)? > target_delay {
        return Ok(None);
    }
    let mut hi = 0.01;
    while dmin(hi)? <= target_delay {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Config("capacity search did not terminate".into()));
        }
    }
    let mut failure = None;
    let c = bisect(
        |c| match dmin(c) {
            Ok(v) => v - target_delay,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        hi,
        1e-9 * hi,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Some(c))
}
