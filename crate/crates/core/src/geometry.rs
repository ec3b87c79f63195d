//! Stochastic-geometry analytics for the interference-limited downlink.
//!
//! Base stations of a band form a planar PPP, users associate with the
//! nearest one, every link sees unit-mean Rayleigh power fading and the
//! path-loss exponent is 4. Under those assumptions the SINR CCDF has a
//! closed form, Voronoi cell sizes follow a Gamma(3.5) law (typical cell)
//! or Gamma(4.5) law (cell of a random user), and the number of other
//! in-coverage users sharing a cell is approximated by a Poisson mixture
//! over the user-cell law, thinned by coverage and a fitted constant Λ.

use std::sync::LazyLock;

use crate::error::{check_domain, Error, Result};
use crate::numerics::{gamma_p, ln_gamma};

/// Fitted thinning constant for the in-coverage count approximation.
pub const DEFAULT_THINNING: f64 = 2.0 / 3.0;

/// Shape of the typical-cell Gamma law; the user-cell law has shape + 1.
pub const CELL_SHAPE: f64 = 3.5;

/// Below this contention level `access_probability` uses its Taylor series.
pub const ACCESS_TAYLOR_THRESHOLD: f64 = 1e-6;

// 3.5^3.5 / Γ(3.5) and 3.5^4.5 / Γ(4.5), in log form.
static LN_TYPICAL_NORM: LazyLock<f64> =
    LazyLock::new(|| CELL_SHAPE * CELL_SHAPE.ln() - ln_gamma(CELL_SHAPE));
static LN_USER_NORM: LazyLock<f64> =
    LazyLock::new(|| (CELL_SHAPE + 1.0) * CELL_SHAPE.ln() - ln_gamma(CELL_SHAPE + 1.0));

/// Rate requirement checked against one band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageQuery {
    target_rate: f64,
    bandwidth: f64,
}

impl CoverageQuery {
    pub fn new(target_rate: f64, bandwidth: f64) -> Result<Self> {
        check_domain("target rate", target_rate, target_rate > 0.0)?;
        check_domain("bandwidth", bandwidth, bandwidth > 0.0)?;
        Ok(Self { target_rate, bandwidth })
    }

    pub fn target_rate(&self) -> f64 {
        self.target_rate
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// SINR needed to carry the target rate: 2^{R/W} - 1.
    pub fn sinr_threshold(&self) -> f64 {
        rate_to_sinr(self.target_rate / self.bandwidth)
    }
}

/// Spectral efficiency (bits/s/Hz) to SINR threshold.
pub fn rate_to_sinr(spectral_efficiency: f64) -> f64 {
    (spectral_efficiency * std::f64::consts::LN_2).exp_m1()
}

/// Contention state of one band as seen by a typical in-coverage user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellLoad {
    /// Active users per base station in this band.
    pub normalized_load: f64,
    pub coverage_prob: f64,
    pub thinning: f64,
}

impl CellLoad {
    pub fn new(normalized_load: f64, coverage_prob: f64) -> Result<Self> {
        Self::with_thinning(normalized_load, coverage_prob, DEFAULT_THINNING)
    }

    pub fn with_thinning(normalized_load: f64, coverage_prob: f64, thinning: f64) -> Result<Self> {
        check_domain("normalized load", normalized_load, normalized_load >= 0.0)?;
        check_domain(
            "coverage probability",
            coverage_prob,
            (0.0..=1.0).contains(&coverage_prob),
        )?;
        check_domain("thinning constant", thinning, thinning > 0.0 && thinning.is_finite())?;
        Ok(Self {
            normalized_load,
            coverage_prob,
            thinning,
        })
    }

    /// Build a load directly from its contention level c = Λ·p·λ (p = 1).
    pub fn from_contention(c: f64) -> Result<Self> {
        Self::with_thinning(c, 1.0, 1.0)
    }

    /// Mean number of other in-coverage users per unit normalized cell size.
    pub fn contention(&self) -> f64 {
        self.thinning * self.coverage_prob * self.normalized_load
    }
}

/// SINR CCDF of the typical user with negligible noise.
pub fn sinr_ccdf_lim(x: f64) -> Result<f64> {
    check_domain("SINR threshold", x, x >= 0.0)?;
    let r = x.sqrt();
    Ok(1.0 / (1.0 + r * r.atan()))
}

/// Probability that a user of the band supports the target rate.
pub fn coverage_probability(q: &CoverageQuery) -> f64 {
    sinr_ccdf_lim(q.sinr_threshold()).expect("threshold of a valid query is nonnegative")
}

fn gamma_cell_pdf(ln_norm: f64, power: f64, x: f64) -> Result<f64> {
    check_domain("normalized cell size", x, x >= 0.0)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok((ln_norm + power * x.ln() - CELL_SHAPE * x).exp())
}

/// Density of a typical Voronoi cell's size normalized by 1/λ.
pub fn typical_cell_pdf(x: f64) -> Result<f64> {
    gamma_cell_pdf(*LN_TYPICAL_NORM, CELL_SHAPE - 1.0, x)
}

/// Density of the size of the cell containing a random user.
pub fn user_cell_pdf(x: f64) -> Result<f64> {
    gamma_cell_pdf(*LN_USER_NORM, CELL_SHAPE, x)
}

pub fn typical_cell_cdf(x: f64) -> f64 {
    gamma_p(CELL_SHAPE, CELL_SHAPE * x)
}

pub fn user_cell_cdf(x: f64) -> f64 {
    gamma_p(CELL_SHAPE + 1.0, CELL_SHAPE * x)
}

/// Approximate PMF of the number of other in-coverage users in the cell
/// of a typical user (a negative binomial with r = 4.5).
pub fn in_coverage_count_pmf(load: &CellLoad, k: u64) -> f64 {
    let c = load.contention();
    let r = CELL_SHAPE + 1.0;
    if c == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let kf = k as f64;
    (r * CELL_SHAPE.ln() + ln_gamma(r + kf) - ln_gamma(r) - ln_gamma(kf + 1.0) + kf * c.ln()
        - (r + kf) * (CELL_SHAPE + c).ln())
    .exp()
}

/// Smallest `k` such that `P(K > k) < tol`.
///
/// Successive PMF ratios `f(k+1)/f(k) = (4.5+k)/(k+1) · c/(3.5+c)` fall
/// monotonically towards `q = c/(3.5+c) < 1`; once the ratio `ρ` at `k` is
/// below one the tail is dominated by the geometric series
/// `f(k)·ρ/(1-ρ)`.
pub fn pmf_truncation_point(load: &CellLoad, tol: f64) -> u64 {
    let c = load.contention();
    if c == 0.0 {
        return 0;
    }
    let q = c / (CELL_SHAPE + c);
    let mut k = 0u64;
    loop {
        let ratio = (CELL_SHAPE + 1.0 + k as f64) / (k as f64 + 1.0) * q;
        if ratio < 1.0 {
            let tail = in_coverage_count_pmf(load, k) * ratio / (1.0 - ratio);
            if tail < tol {
                return k;
            }
        }
        k += 1;
    }
}

/// Fair-TDMA access probability E[1/(K+1)] under the count approximation.
pub fn access_probability(load: &CellLoad) -> f64 {
    access_probability_from_contention(load.contention())
}

pub(crate) fn access_probability_from_contention(c: f64) -> f64 {
    if c < ACCESS_TAYLOR_THRESHOLD {
        let u = c / CELL_SHAPE;
        1.0 - 2.25 * u + 4.125 * u * u
    } else {
        -(-CELL_SHAPE * (c / CELL_SHAPE).ln_1p()).exp_m1() / c
    }
}

/// Validates a user-supplied thinning constant.
pub fn check_thinning(thinning: f64) -> Result<f64> {
    if thinning > 0.0 && thinning.is_finite() {
        Ok(thinning)
    } else {
        Err(Error::Domain {
            what: "thinning constant",
            value: thinning,
        })
    }
}
