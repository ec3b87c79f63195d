//! Discrete-event simulation of the two-class preemptive-resume queue.
//!
//! Outage work is additive and always served first; the head session
//! receives service only while no outage work is pending and resumes where
//! it stopped. At equal timestamps outage arrivals are handled before
//! session arrivals, and both before internal completions.

use std::collections::VecDeque;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::report::{Estimate, SimReport};
use super::stream_rng;
use crate::error::{check_domain, Error, Result};
use crate::numerics::{ecdf, mean_ci99};
use crate::queueing::{OutageModel, SizeDistribution, TrafficModel};

pub const MIN_HORIZON: usize = 100_000;
pub const BATCHES: usize = 50;
/// Tolerance of the served-equals-required check at completion.
pub const RESUME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueSimConfig {
    pub session_interarrival_mean: f64,
    /// `+inf` disables outages.
    pub outage_interarrival_mean: f64,
    pub file_size: SizeDistribution,
    pub outage_duration: SizeDistribution,
    /// bits/s.
    pub rate: f64,
    /// Completed sessions to simulate, warmup included.
    pub horizon: usize,
    pub warmup_fraction: f64,
    pub seed: u64,
}

impl QueueSimConfig {
    /// Configuration matching the analytic queue at service probability `eps`.
    pub fn from_model(
        traffic: &TrafficModel,
        outage: &OutageModel,
        eps: f64,
        rate: f64,
        horizon: usize,
        seed: u64,
    ) -> Result<Self> {
        let (outage_interarrival_mean, outage_duration) = match outage.duration(eps)? {
            Some(d) => (outage.outage_interarrival_mean, d),
            None => (f64::INFINITY, SizeDistribution::exponential(1.0)?),
        };
        let cfg = Self {
            session_interarrival_mean: traffic.session_interarrival_mean,
            outage_interarrival_mean,
            file_size: traffic.file_size,
            outage_duration,
            rate,
            horizon,
            warmup_fraction: 0.1,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.session_interarrival_mean;
        check_domain("session inter-arrival mean", a, a > 0.0 && a.is_finite())?;
        check_domain("outage inter-arrival mean", self.outage_interarrival_mean, self.outage_interarrival_mean > 0.0)?;
        check_domain("rate", self.rate, self.rate > 0.0 && self.rate.is_finite())?;
        check_domain("warmup fraction", self.warmup_fraction, (0.0..0.5).contains(&self.warmup_fraction))?;
        if self.horizon < MIN_HORIZON {
            return Err(Error::Config(format!(
                "horizon {} is below the minimum of {MIN_HORIZON} sessions",
                self.horizon
            )));
        }
        Ok(())
    }

    pub fn rho_s(&self) -> f64 {
        self.file_size.mean() / self.rate / self.session_interarrival_mean
    }

    pub fn rho_o(&self) -> f64 {
        if self.outage_interarrival_mean.is_finite() {
            self.outage_duration.mean() / self.outage_interarrival_mean
        } else {
            0.0
        }
    }

    pub fn is_stable(&self) -> bool {
        self.rho_s() + self.rho_o() < 1.0
    }
}

#[derive(Debug, Clone, Copy)]
struct Session {
    arrival: f64,
    required: f64,
    remaining: f64,
    served: f64,
    first_service: Option<f64>,
}

/// Raw per-session output after warmup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueTrace {
    pub delays: Vec<f64>,
    /// Completion minus first service.
    pub transmissions: Vec<f64>,
    /// First service minus arrival.
    pub waits: Vec<f64>,
    /// Fraction of time a started session was in the system, per batch.
    pub busy_batches: Vec<f64>,
    pub arrived: u64,
    pub completed: u64,
    pub in_system: u64,
    pub max_resume_error: f64,
}

/// Runs the event loop until `cfg.horizon` sessions complete.
pub fn simulate_queue(cfg: &QueueSimConfig) -> Result<QueueTrace> {
    cfg.validate()?;
    let mut session_rng = stream_rng(cfg.seed, 0);
    let mut size_rng = stream_rng(cfg.seed, 1);
    let mut outage_rng = stream_rng(cfg.seed, 2);
    let session_gap = Exp::new(1.0 / cfg.session_interarrival_mean).expect("positive rate");
    let outage_gap = cfg
        .outage_interarrival_mean
        .is_finite()
        .then(|| Exp::new(1.0 / cfg.outage_interarrival_mean).expect("positive rate"));
    let next_outage = |rng: &mut ChaCha8Rng| outage_gap.map_or(f64::INFINITY, |d| d.sample(rng));

    let warmup = (cfg.warmup_fraction * cfg.horizon as f64) as usize;
    let kept = cfg.horizon - warmup;
    let batch_len = (kept / BATCHES).max(1);

    let mut t = 0.0;
    let mut outage_work = 0.0;
    let mut queue: VecDeque<Session> = VecDeque::new();
    let mut t_session = session_gap.sample(&mut session_rng);
    let mut t_outage = next_outage(&mut outage_rng);
    let (mut arrived, mut completed) = (0u64, 0u64);
    let mut trace = QueueTrace {
        delays: Vec::with_capacity(kept),
        transmissions: Vec::with_capacity(kept),
        waits: Vec::with_capacity(kept),
        busy_batches: Vec::new(),
        arrived: 0,
        completed: 0,
        in_system: 0,
        max_resume_error: 0.0,
    };
    let mut busy_time = 0.0;
    let mut batch_start = 0.0;

    while (completed as usize) < cfg.horizon {
        let internal = if outage_work > 0.0 {
            t + outage_work
        } else if let Some(head) = queue.front() {
            t + head.remaining
        } else {
            f64::INFINITY
        };
        let outage_phase = outage_work > 0.0;
        let next = t_outage.min(t_session).min(internal);
        let dt = next - t;
        let started = queue.front().is_some_and(|h| h.first_service.is_some());
        if started && completed as usize >= warmup {
            busy_time += dt;
        }
        if outage_phase {
            outage_work = (outage_work - dt).max(0.0);
        } else if let Some(head) = queue.front_mut() {
            head.remaining -= dt;
            head.served += dt;
        }
        t = next;

        if t_outage <= t_session && t_outage <= internal {
            outage_work += cfg.outage_duration.sample(&mut outage_rng);
            t_outage = t + next_outage(&mut outage_rng);
        } else if t_session <= internal {
            let required = cfg.file_size.sample(&mut size_rng) / cfg.rate;
            queue.push_back(Session {
                arrival: t,
                required,
                remaining: required,
                served: 0.0,
                first_service: None,
            });
            arrived += 1;
            t_session = t + session_gap.sample(&mut session_rng);
        } else if outage_phase {
            outage_work = 0.0;
        } else {
            let done = queue.pop_front().expect("completion needs a session");
            completed += 1;
            let first = done.first_service.expect("completed session was served");
            trace.max_resume_error = trace.max_resume_error.max((done.served - done.required).abs());
            if completed as usize > warmup {
                trace.delays.push(t - done.arrival);
                trace.transmissions.push(t - first);
                trace.waits.push(first - done.arrival);
                let k = completed as usize - warmup;
                if k.is_multiple_of(batch_len) && trace.busy_batches.len() < BATCHES {
                    trace.busy_batches.push(busy_time / (t - batch_start));
                    busy_time = 0.0;
                    batch_start = t;
                }
            } else if completed as usize == warmup {
                batch_start = t;
            }
        }
        if outage_work == 0.0 {
            if let Some(head) = queue.front_mut() {
                head.first_service.get_or_insert(t);
            }
        }
        debug_assert_eq!(arrived, completed + queue.len() as u64);
    }
    trace.arrived = arrived;
    trace.completed = completed;
    trace.in_system = queue.len() as u64;
    if trace.max_resume_error > RESUME_TOL {
        return Err(Error::NoConvergence {
            what: "preemptive-resume accounting",
            iterations: completed as usize,
            residual: trace.max_resume_error,
        });
    }
    Ok(trace)
}

fn batch_estimate(values: &[f64]) -> Estimate {
    let size = (values.len() / BATCHES).max(1);
    let means: Vec<f64> = values
        .chunks(size)
        .filter(|c| c.len() == size)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    let (_, ci) = mean_ci99(&means);
    let value = values.iter().sum::<f64>() / values.len() as f64;
    Estimate::new(value, ci, values.len())
}

/// Simulates the queue and summarizes it.
///
/// Keys: `mean_delay`, `mean_transmission`, `mean_wait`, `busy_fraction`.
/// Series `delay_cdf` holds the empirical delay CDF on `cdf_grid`.
pub fn run_priority_queue(cfg: &QueueSimConfig, cdf_grid: &[f64]) -> Result<SimReport> {
    let mut report = SimReport::new("run_priority_queue", cfg.seed, cfg);
    if !cfg.is_stable() {
        report.warnings.push(format!(
            "unstable configuration: rho_s + rho_o = {}",
            cfg.rho_s() + cfg.rho_o()
        ));
    }
    let trace = simulate_queue(cfg)?;
    report.insert("mean_delay", batch_estimate(&trace.delays));
    report.insert("mean_transmission", batch_estimate(&trace.transmissions));
    report.insert("mean_wait", batch_estimate(&trace.waits));
    let (busy, ci) = mean_ci99(&trace.busy_batches);
    report.insert("busy_fraction", Estimate::new(busy, ci, trace.busy_batches.len()));
    report.insert("max_resume_error", Estimate::exact(trace.max_resume_error, trace.completed as usize));
    if trace.busy_batches.len() < 10 {
        report.warnings.push("fewer than 10 batches; intervals are unreliable".into());
    }
    if !cdf_grid.is_empty() {
        let mut sorted = trace.delays.clone();
        sorted.sort_by(f64::total_cmp);
        let y = cdf_grid.iter().map(|&t| ecdf(&sorted, t)).collect();
        report.insert_series("delay_cdf", cdf_grid.to_vec(), y);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(a_s: f64, a_o: f64, beta_s: f64, beta_o: f64, horizon: usize, seed: u64) -> QueueSimConfig {
        QueueSimConfig {
            session_interarrival_mean: a_s,
            outage_interarrival_mean: a_o,
            file_size: SizeDistribution::exponential(beta_s).unwrap(),
            outage_duration: SizeDistribution::exponential(beta_o).unwrap(),
            rate: 1.0,
            horizon,
            warmup_fraction: 0.1,
            seed,
        }
    }

    #[test]
    fn validation() {
        assert!(cfg(1.0, 1.0, 0.3, 0.3, 10, 0).validate().is_err());
        let mut c = cfg(1.0, 1.0, 0.3, 0.3, MIN_HORIZON, 0);
        assert!(c.validate().is_ok());
        c.warmup_fraction = 0.5;
        assert!(c.validate().is_err());
        assert!(cfg(1.0, 1.0, 0.6, 0.6, MIN_HORIZON, 0).validate().is_ok());
        assert!(!cfg(1.0, 1.0, 0.6, 0.6, MIN_HORIZON, 0).is_stable());
    }

    #[test]
    fn accounting_invariants() {
        let trace = simulate_queue(&cfg(1.0, 0.5, 0.4, 0.15, MIN_HORIZON, 3)).unwrap();
        assert_eq!(trace.arrived, trace.completed + trace.in_system);
        assert!(trace.max_resume_error <= RESUME_TOL);
        for ((d, t), w) in trace.delays.iter().zip(&trace.transmissions).zip(&trace.waits) {
            assert!(*t > 0.0 && *w >= 0.0);
            assert!((d - t - w).abs() < 1e-9 * d.max(1.0));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = run_priority_queue(&cfg(1.0, 0.5, 0.4, 0.15, MIN_HORIZON, 5), &[1.0, 2.0]).unwrap();
        let b = run_priority_queue(&cfg(1.0, 0.5, 0.4, 0.15, MIN_HORIZON, 5), &[1.0, 2.0]).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn no_outages_is_mm1() {
        let c = cfg(1.0, f64::INFINITY, 0.5, 1.0, 400_000, 7);
        let r = run_priority_queue(&c, &[]).unwrap();
        let d = r.estimate("mean_delay").unwrap();
        assert!((d.value - 1.0).abs() < 0.03, "{d:?}");
        // no outages: the wait plus service split is exact
        let t = r.estimate("mean_transmission").unwrap();
        assert!((t.value - 0.5).abs() < 0.01);
    }

    #[test]
    fn unstable_runs_are_flagged() {
        let r = run_priority_queue(&cfg(1.0, 1.0, 0.6, 0.6, MIN_HORIZON, 1), &[]).unwrap();
        assert!(r.warnings.iter().any(|w| w.contains("unstable")));
    }
}
