//! Numerical Laplace inversion of CDF transforms.
//!
//! The default is the Abate–Whitt Euler algorithm in its unified
//! `2M + 1`-node form; the fixed Talbot contour is available as an
//! alternative.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::TransformHandle;
use crate::error::{Error, Result};
use crate::numerics::isotonic_nondecreasing;

/// Raw inverted CDF values outside `[-tol, 1 + tol]` are reported as errors.
pub const OSCILLATION_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum InversionMethod {
    /// Euler summation with `2m + 1` transform evaluations per point.
    Euler { m: usize },
    /// Fixed Talbot contour with `m` nodes.
    Talbot { m: usize },
}

impl Default for InversionMethod {
    fn default() -> Self {
        InversionMethod::Euler { m: 20 }
    }
}

impl InversionMethod {
    pub fn talbot() -> Self {
        InversionMethod::Talbot { m: 32 }
    }

    /// Inverts `f` at `t > 0`.
    pub fn invert<F>(&self, f: F, t: f64) -> Result<f64>
    where
        F: Fn(Complex64) -> Result<Complex64>,
    {
        match *self {
            InversionMethod::Euler { m } => euler(f, t, m),
            InversionMethod::Talbot { m } => talbot(f, t, m),
        }
    }
}

fn euler_weights(m: usize) -> Vec<f64> {
    let n = 2 * m;
    let mut xi = vec![1.0; n + 1];
    xi[0] = 0.5;
    let base = 0.5f64.powi(m as i32);
    xi[n] = base;
    let mut binom = 1.0;
    for k in 1..m {
        binom = binom * (m - k + 1) as f64 / k as f64;
        xi[n - k] = xi[n - k + 1] + base * binom;
    }
    let scale = 10f64.powf(m as f64 / 3.0);
    xi.iter()
        .enumerate()
        .map(|(k, x)| if k % 2 == 0 { scale * x } else { -scale * x })
        .collect()
}

fn euler<F>(f: F, t: f64, m: usize) -> Result<f64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let a = m as f64 * std::f64::consts::LN_10 / 3.0;
    let mut acc = 0.0;
    for (k, eta) in euler_weights(m).into_iter().enumerate() {
        let beta = Complex64::new(a, std::f64::consts::PI * k as f64);
        acc += eta * f(beta / t)?.re;
    }
    Ok(acc / t)
}

fn talbot<F>(f: F, t: f64, m: usize) -> Result<f64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let r = 2.0 * m as f64 / (5.0 * t);
    let mut acc = 0.5 * (f(Complex64::new(r, 0.0))? * (r * t).exp()).re;
    for k in 1..m {
        let theta = k as f64 * std::f64::consts::PI / m as f64;
        let cot = theta.cos() / theta.sin();
        let delta = Complex64::new(r * theta * cot, r * theta);
        let gamma = Complex64::new(1.0, theta * (1.0 + cot * cot) - cot) * (delta * t).exp();
        acc += (gamma * f(delta)?).re;
    }
    Ok(acc * r / m as f64)
}

/// CDF values recovered from a density transform on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayCdf {
    pub t: Vec<f64>,
    /// Clamped to [0, 1] and made nondecreasing.
    pub cdf: Vec<f64>,
    /// Direct inversion output before cleanup.
    pub raw: Vec<f64>,
    pub method: InversionMethod,
    pub oscillation_tol: f64,
}

impl DelayCdf {
    /// Linear interpolation of the cleaned CDF (0 before the grid, last value after).
    pub fn at(&self, t: f64) -> f64 {
        let i = self.t.partition_point(|&x| x <= t);
        if i == 0 {
            return self.cdf[0] * (t / self.t[0]).clamp(0.0, 1.0);
        }
        if i == self.t.len() {
            return *self.cdf.last().expect("nonempty grid");
        }
        let (t0, t1) = (self.t[i - 1], self.t[i]);
        let w = (t - t0) / (t1 - t0);
        self.cdf[i - 1] * (1.0 - w) + self.cdf[i] * w
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::Config("empty time grid".into()));
    }
    if let Some(&bad) = t_grid.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(Error::Domain {
            what: "time grid point",
            value: bad,
        });
    }
    if let Some(w) = t_grid.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::Domain {
            what: "time grid (must be strictly increasing)",
            value: w[1],
        });
    }
    Ok(())
}

/// Inverts F(s)/s for a density transform F at each grid point.
pub fn invert_cdf<H>(handle: &H, t_grid: &[f64], method: InversionMethod) -> Result<DelayCdf>
where
    H: TransformHandle + ?Sized,
{
    check_grid(t_grid)?;
    let mut raw = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let v = method.invert(|s| Ok(handle.eval(s)? / s), t)?;
        if !v.is_finite() || !(-OSCILLATION_TOL..=1.0 + OSCILLATION_TOL).contains(&v) {
            return Err(Error::Inversion { t, value: v });
        }
        raw.push(v);
    }
    let clamped: Vec<f64> = raw.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let cdf = isotonic_nondecreasing(&clamped)
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect();
    Ok(DelayCdf {
        t: t_grid.to_vec(),
        cdf,
        raw,
        method,
        oscillation_tol: OSCILLATION_TOL,
    })
}

/// Delay CDF on `t_grid` from a delay transform handle.
pub fn delay_cdf<H>(handle: &H, t_grid: &[f64], method: InversionMethod) -> Result<DelayCdf>
where
    H: TransformHandle + ?Sized,
{
    invert_cdf(handle, t_grid, method)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::linspace;
    use crate::queueing::{OutageModel, SizeDistribution, TrafficModel, TwoClassQueue};

    fn mm1_sojourn(mu_eff: f64) -> impl Fn(Complex64) -> Result<Complex64> {
        move |s| Ok(mu_eff / (s + mu_eff))
    }

    #[test]
    fn euler_weights_have_41_nodes_by_default() {
        let InversionMethod::Euler { m } = InversionMethod::default() else {
            panic!("default is Euler");
        };
        assert_eq!(euler_weights(m).len(), 41);
    }

    #[test]
    fn both_methods_recover_exponential_cdf() {
        let f = mm1_sojourn(0.5);
        let grid = linspace(0.05, 30.0, 60);
        for method in [InversionMethod::default(), InversionMethod::talbot()] {
            let out = invert_cdf(&f, &grid, method).unwrap();
            for (t, v) in grid.iter().zip(&out.cdf) {
                let exact = 1.0 - (-0.5 * t).exp();
                assert!((v - exact).abs() < 1e-7, "{method:?} t = {t}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn gamma_density_inverts() {
        // Gamma(2, 1): CDF 1 − (1 + t)e^{−t}
        let f = |s: Complex64| Ok(1.0 / ((1.0 + s) * (1.0 + s)));
        let grid = [0.1, 0.5, 1.0, 3.0, 8.0];
        let out = invert_cdf(&f, &grid, InversionMethod::default()).unwrap();
        for (t, v) in grid.iter().zip(&out.cdf) {
            let exact = 1.0 - (1.0 + t) * (-t).exp();
            assert!((v - exact).abs() < 1e-7);
        }
    }

    fn queue(c: f64, r: f64, eps: f64, file: SizeDistribution, outage_shape: f64) -> TwoClassQueue {
        let traffic = TrafficModel::from_capacity(c, file).unwrap();
        let outage = OutageModel::new(10.0, outage_shape).unwrap();
        TwoClassQueue::new(&traffic, &outage, eps, r).unwrap()
    }

    #[test]
    fn mm1_delay_cdf_both_methods() {
        // eps = 1: M/M/1 sojourn with rate (1 − ρ)/β̄
        let file = SizeDistribution::exponential(10.0).unwrap();
        let q = queue(2.0, 5.0, 1.0, file, 1.0);
        let rate = (1.0 - q.rho_s()) / q.service.mean();
        let grid = linspace(0.1, 40.0, 80);
        for method in [InversionMethod::default(), InversionMethod::talbot()] {
            let out = delay_cdf(&q.transform(), &grid, method).unwrap();
            for (t, v) in grid.iter().zip(&out.cdf) {
                let exact = 1.0 - (-rate * t).exp();
                assert!((v - exact).abs() < 1e-4, "{method:?} t = {t}");
            }
        }
    }

    #[test]
    fn transform_is_normalized_and_cdf_tends_to_one() {
        let cases = [
            queue(1.0, 4.0, 0.6, SizeDistribution::exponential(10.0).unwrap(), 1.0),
            queue(0.5, 3.0, 0.4, SizeDistribution::gamma(10.0, 2.5).unwrap(), 0.7),
            queue(0.0, 3.0, 0.7, SizeDistribution::gamma(10.0, 3.0).unwrap(), 2.0),
        ];
        for q in cases {
            let h = q.transform();
            assert_eq!(h.eval(Complex64::new(0.0, 0.0)).unwrap(), Complex64::new(1.0, 0.0));
            let s0 = 1e-7;
            let near = h.eval(Complex64::new(s0, 0.0)).unwrap();
            assert!((near - (1.0 - s0 * q.mean_delay())).norm() < 1e-8);
            let far = 60.0 * q.mean_delay();
            let out = delay_cdf(&h, &[0.5 * q.mean_delay(), far], InversionMethod::default()).unwrap();
            assert!((out.cdf[1] - 1.0).abs() < 1e-3, "{q:?}");
        }
    }

    #[test]
    fn transform_slope_matches_mean_delay() {
        let h = 1e-5;
        for i in 0..20 {
            let c = 0.1 + 0.1 * i as f64;
            let eps = 0.55 + 0.02 * i as f64;
            let shape = 0.5 + 0.25 * i as f64;
            let q = queue(c, 4.5, eps, SizeDistribution::gamma(10.0, shape).unwrap(), 1.0 + (i % 3) as f64);
            let t = q.transform();
            let up = t.eval(Complex64::new(h, 0.0)).unwrap().re;
            let down = t.eval(Complex64::new(-h, 0.0)).unwrap().re;
            let fd = -(up - down) / (2.0 * h);
            let d = q.mean_delay();
            assert!((fd - d).abs() < 1e-4 * d, "case {i}: {fd} vs {d}");
        }
    }

    #[test]
    fn grid_validation() {
        let f = mm1_sojourn(1.0);
        assert!(invert_cdf(&f, &[1.0, 1.0], InversionMethod::default()).is_err());
        assert!(invert_cdf(&f, &[0.0, 1.0], InversionMethod::default()).is_err());
        assert!(invert_cdf(&f, &[], InversionMethod::default()).is_err());
    }

    #[test]
    fn oscillation_is_reported() {
        // not a probability transform: inverts to 3·(1 − e^{−t})
        let f = |s: Complex64| Ok(3.0 / (s + 1.0));
        let err = invert_cdf(&f, &[0.5, 5.0], InversionMethod::default()).unwrap_err();
        assert!(matches!(err, Error::Inversion { t, .. } if t == 0.5));
    }
}
