use num_complex::Complex64;

use super::{SizeDistribution, TwoClassQueue};
use crate::error::{Error, Result};

/// Residual bound every returned busy root satisfies.
pub const BUSY_ROOT_TOL: f64 = 1e-12;
pub const BUSY_ROOT_MAX_ITER: usize = 10_000;

/// Something whose Laplace transform can be evaluated at complex `s`.
pub trait TransformHandle: Sync {
    fn eval(&self, s: Complex64) -> Result<Complex64>;
}

impl<F> TransformHandle for F
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    fn eval(&self, s: Complex64) -> Result<Complex64> {
        self(s)
    }
}

fn busy_residual(x: Complex64, s: Complex64, duration: &SizeDistribution, spacing: f64) -> Complex64 {
    x - duration.laplace(s + (1.0 - x) / spacing)
}

/// Smallest-modulus root of x = L_{β_o}(s + (1 − x)/ᾱ_o), i.e. the LST of
/// the outage busy period.
///
/// Exponential durations use the quadratic closed form; other laws iterate
/// x ← L_{β_o}(s + (1 − x)/ᾱ_o) from 0 and finish with two Newton steps.
pub fn outage_busy_root(
    s: Complex64,
    duration: &SizeDistribution,
    outage_interarrival_mean: f64,
) -> Result<Complex64> {
    if let SizeDistribution::Exponential { mean } = duration {
        return Ok(outage_busy_root_exponential(s, *mean, outage_interarrival_mean));
    }
    let spacing = outage_interarrival_mean;
    let mut x = Complex64::new(0.0, 0.0);
    let mut iterations = 0;
    loop {
        let next = duration.laplace(s + (1.0 - x) / spacing);
        let step = (next - x).norm();
        x = next;
        iterations += 1;
        if step <= 1e-15 * x.norm().max(1.0) {
            break;
        }
        if iterations >= BUSY_ROOT_MAX_ITER {
            return Err(Error::NoConvergence {
                what: "outage busy-period root",
                iterations,
                residual: busy_residual(x, s, duration, spacing).norm(),
            });
        }
    }
    for _ in 0..2 {
        let z = s + (1.0 - x) / spacing;
        let f = x - duration.laplace(z);
        let df = 1.0 + duration.laplace_derivative(z) / spacing;
        if df.norm() > 0.0 {
            x -= f / df;
        }
    }
    let residual = busy_residual(x, s, duration, spacing).norm();
    if residual >= BUSY_ROOT_TOL || !residual.is_finite() {
        return Err(Error::NoConvergence {
            what: "outage busy-period root",
            iterations,
            residual,
        });
    }
    Ok(x)
}

/// Closed form for exponential outage durations with mean `mean`.
pub fn outage_busy_root_exponential(
    s: Complex64,
    mean: f64,
    outage_interarrival_mean: f64,
) -> Complex64 {
    // ρ x² − (1 + ρ + s β̄) x + 1 = 0; the small root is 2/(b ± √(b² − 4ρ)).
    let rho = mean / outage_interarrival_mean;
    let b = 1.0 + rho + s * mean;
    let disc = (b * b - 4.0 * rho).sqrt();
    let (p, m) = (b + disc, b - disc);
    let q = if p.norm() >= m.norm() { p } else { m };
    2.0 / q
}

/// Polynomial route for integer Gamma shapes: all roots of
/// x·(a + b x)^k − 1 by Durand–Kerner, returning the one of least modulus.
pub fn outage_busy_root_polynomial(
    s: Complex64,
    duration: &SizeDistribution,
    outage_interarrival_mean: f64,
) -> Result<Complex64> {
    let shape = duration.shape();
    if shape.fract() != 0.0 || !(1.0..=24.0).contains(&shape) {
        return Err(Error::Domain {
            what: "integer gamma shape",
            value: shape,
        });
    }
    let k = shape as usize;
    let theta = duration.mean() / shape;
    let a = 1.0 + theta * s + theta / outage_interarrival_mean;
    let b = Complex64::new(-theta / outage_interarrival_mean, 0.0);

    // coefficients of x^0..x^{k+1}
    let mut coeffs = vec![Complex64::new(0.0, 0.0); k + 2];
    coeffs[0] = Complex64::new(-1.0, 0.0);
    let mut binom = 1.0;
    for j in 0..=k {
        coeffs[j + 1] = binom * a.powu((k - j) as u32) * b.powu(j as u32);
        binom = binom * (k - j) as f64 / (j + 1) as f64;
    }
    let lead = coeffs[k + 1];
    let monic: Vec<Complex64> = coeffs.iter().map(|c| c / lead).collect();
    let degree = k + 1;
    let eval = |x: Complex64| monic.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c);

    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..degree).map(|i| seed.powu(i as u32)).collect();
    for _ in 0..2000 {
        let mut moved = 0.0f64;
        for i in 0..degree {
            let xi = roots[i];
            let denom = roots
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .fold(Complex64::new(1.0, 0.0), |acc, (_, &xj)| acc * (xi - xj));
            let delta = eval(xi) / denom;
            roots[i] = xi - delta;
            moved = moved.max(delta.norm());
        }
        if moved < 1e-16 {
            break;
        }
    }
    let best = roots
        .into_iter()
        .min_by(|x, y| x.norm().total_cmp(&y.norm()))
        .expect("degree >= 2");
    Ok(best)
}

/// Laplace transform of the session delay, D = W + T:
///
/// L_D(s) = L_T(s)·L_W(s), L_T(s) = L_{β_s}(K(s)), K(s) = s + (1 − G(s))/ᾱ_o,
/// L_W(s) = (1 − ρ_o − ρ_s)·K(s) / (λ_s(L_T(s) − 1) + s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayTransform {
    queue: TwoClassQueue,
}

impl DelayTransform {
    pub fn new(queue: TwoClassQueue) -> Self {
        Self { queue }
    }

    pub fn queue(&self) -> &TwoClassQueue {
        &self.queue
    }

    /// Completion-time argument K(s).
    pub fn k(&self, s: Complex64) -> Result<Complex64> {
        match &self.queue.outage {
            None => Ok(s),
            Some(d) => {
                let spacing = 1.0 / self.queue.outage_rate;
                let g = outage_busy_root(s, d, spacing)?;
                Ok(s + (1.0 - g) / spacing)
            }
        }
    }

    /// L_T(s): transform of the transmission (completion) time.
    pub fn transmission(&self, s: Complex64) -> Result<Complex64> {
        Ok(self.queue.service.laplace(self.k(s)?))
    }

    /// L_W(s): transform of the wait before first service.
    pub fn waiting(&self, s: Complex64) -> Result<Complex64> {
        if s == Complex64::new(0.0, 0.0) {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let k = self.k(s)?;
        let lt = self.queue.service.laplace(k);
        Ok(self.waiting_from(s, k, lt))
    }

    fn waiting_from(&self, s: Complex64, k: Complex64, lt: Complex64) -> Complex64 {
        let q = &self.queue;
        let idle = 1.0 - q.rho_o() - q.rho_s();
        idle * k / (q.session_rate * (lt - 1.0) + s)
    }
}

impl TransformHandle for DelayTransform {
    fn eval(&self, s: Complex64) -> Result<Complex64> {
        if s == Complex64::new(0.0, 0.0) {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let k = self.k(s)?;
        let lt = self.queue.service.laplace(k);
        Ok(lt * self.waiting_from(s, k, lt))
    }
}
