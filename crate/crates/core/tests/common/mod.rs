#![allow(dead_code)]

use std::io::Write;

use capdelay::numerics::{ks_distance, linspace};
use capdelay::queueing::{
    delay_cdf, DelayCdf, InversionMethod, OutageModel, SizeDistribution, TrafficModel, TwoClassQueue,
};
use capdelay::simulate::{simulate_queue, QueueSimConfig, QueueTrace};

/// Queue with rate 1, so file sizes are service times.
pub struct QueueCase {
    pub traffic: TrafficModel,
    pub outage: OutageModel,
    pub eps: f64,
}

impl QueueCase {
    /// ρ_s, ρ_o, ᾱ_o with shapes for the file size and outage duration.
    pub fn new(rho_s: f64, rho_o: f64, outage_spacing: f64, session_spacing: f64, k_l: f64, k_o: f64) -> Self {
        let file = SizeDistribution::gamma(rho_s * session_spacing, k_l).unwrap();
        Self {
            traffic: TrafficModel::new(session_spacing, file).unwrap(),
            outage: OutageModel::new(outage_spacing, k_o).unwrap(),
            eps: 1.0 - rho_o,
        }
    }

    pub fn queue(&self) -> TwoClassQueue {
        TwoClassQueue::new(&self.traffic, &self.outage, self.eps, 1.0).unwrap()
    }

    pub fn sim_config(&self, horizon: usize, seed: u64) -> QueueSimConfig {
        QueueSimConfig::from_model(&self.traffic, &self.outage, self.eps, 1.0, horizon, seed).unwrap()
    }

    pub fn simulate(&self, horizon: usize, seed: u64) -> QueueTrace {
        simulate_queue(&self.sim_config(horizon, seed)).unwrap()
    }

    /// Inverted delay CDF on a dense grid reaching far into the tail.
    pub fn delay_cdf(&self) -> DelayCdf {
        let q = self.queue();
        let grid = tail_grid(q.mean_delay());
        delay_cdf(&q.transform(), &grid, InversionMethod::default()).unwrap()
    }
}

pub fn tail_grid(mean: f64) -> Vec<f64> {
    linspace(0.0, 40.0 * mean, 3001)[1..].to_vec()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn ks_against(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    ks_distance(&s, cdf)
}

/// Writes straight to the stdout handle so the line survives test output capture.
pub fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stdout().lock(), "{tag} criterion {id} ({name}): {detail}");
}
