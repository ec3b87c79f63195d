//! Scenario files: TOML with one `[[band]]` table per band and optional
//! per-subcommand sections. Unknown keys are rejected.

use std::path::Path;

use capdelay::capacity::MAX_BAND_COUNT;
use capdelay::equilibrium::{BandConfig, Scenario};
use capdelay::geometry::DEFAULT_THINNING;
use capdelay::numerics::{linspace, logspace};
use capdelay::queueing::{InversionMethod, OutageModel, SizeDistribution, TrafficModel};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    /// Hz.
    pub bandwidth: f64,
    pub vacancy: f64,
    /// BSs per m².
    pub bs_density: f64,
    /// Identical copies of this band.
    #[serde(default = "one")]
    pub count: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Capacity,
    TargetRate,
    /// λ_u/λ_b against the first band's BS density.
    DensityRatio,
    FileSizeMean,
    OutageInterarrivalMean,
    Thinning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default = "linear")]
    pub scale: Scale,
}

fn linear() -> Scale {
    Scale::Linear
}

impl Default for Sweep {
    fn default() -> Self {
        Self {
            parameter: SweepParameter::Capacity,
            min: 0.0,
            max: 2.0,
            points: 21,
            scale: Scale::Linear,
        }
    }
}

impl Sweep {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.points < 2 {
            return Err(CliError::Config(format!("sweep needs at least 2 points, got {}", self.points)));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(CliError::Config(format!("sweep range [{}, {}] is empty", self.min, self.max)));
        }
        if self.scale == Scale::Log && self.min <= 0.0 {
            return Err(CliError::Config("log sweep needs a positive minimum".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        match self.scale {
            Scale::Linear => linspace(self.min, self.max, self.points),
            Scale::Log => logspace(self.min, self.max, self.points),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TradeoffSection {
    /// Minimize the mean delay over the target rate at each point.
    pub optimize_rate: bool,
}

impl Default for TradeoffSection {
    fn default() -> Self {
        Self { optimize_rate: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitsSection {
    pub density_ratios: Vec<f64>,
    pub max_bands: usize,
    pub vacancy: f64,
    /// Per-band bandwidth in mode I, total in mode II.
    pub bandwidth: f64,
}

impl Default for LimitsSection {
    fn default() -> Self {
        Self {
            density_ratios: vec![2.0, 10.0, 50.0, 100.0, 500.0],
            max_bands: 20,
            vacancy: 1.0,
            bandwidth: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DelayCdfSection {
    /// Defaults to 20 mean delays.
    pub t_max: Option<f64>,
    pub points: usize,
    /// Skip the equilibrium and use this service probability.
    pub service_prob: Option<f64>,
    pub inversion: InversionMethod,
    /// Simulated sessions for `--validate`.
    pub sessions: usize,
}

impl Default for DelayCdfSection {
    fn default() -> Self {
        Self {
            t_max: None,
            points: 200,
            service_prob: None,
            inversion: InversionMethod::default(),
            sessions: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    pub coverage_users: usize,
    pub pmf_cells: usize,
    pub voronoi_cells: usize,
    pub sessions: usize,
    /// Thinning constant used by the count-PMF check; defaults to the scenario's.
    pub thinning: Option<f64>,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            coverage_users: 100_000,
            pmf_cells: 20_000,
            voronoi_cells: 100_000,
            sessions: 1_000_000,
            thinning: None,
        }
    }
}

/// Everything a scenario file can hold, with defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Users per m².
    pub user_density: f64,
    /// bits/s.
    pub target_rate: f64,
    /// Per-user throughput C in bits/s.
    pub capacity: f64,
    pub file_size_mean: f64,
    #[serde(default = "unit_shape")]
    pub file_size_shape: f64,
    pub outage_interarrival_mean: f64,
    #[serde(default = "unit_shape")]
    pub outage_duration_shape: f64,
    #[serde(default = "default_thinning")]
    pub thinning: f64,
    #[serde(rename = "band")]
    pub bands: Vec<Band>,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub tradeoff: TradeoffSection,
    #[serde(default)]
    pub limits: LimitsSection,
    #[serde(default)]
    pub delay_cdf: DelayCdfSection,
    #[serde(default)]
    pub validate: ValidateSection,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn unit_shape() -> f64 {
    1.0
}

fn default_thinning() -> f64 {
    DEFAULT_THINNING
}

impl Default for RunConfig {
    /// Five unit-bandwidth vacant bands at λ_u/λ_b = 50, L̄ = 10, ᾱ_o = 10, C = 1.
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            user_density: 5e-5,
            target_rate: 3.0,
            capacity: 1.0,
            file_size_mean: 10.0,
            file_size_shape: 1.0,
            outage_interarrival_mean: 10.0,
            outage_duration_shape: 1.0,
            thinning: DEFAULT_THINNING,
            bands: vec![Band {
                bandwidth: 1.0,
                vacancy: 1.0,
                bs_density: 1e-6,
                count: 5,
            }],
            sweep: None,
            tradeoff: TradeoffSection::default(),
            limits: LimitsSection::default(),
            delay_cdf: DelayCdfSection::default(),
            validate: ValidateSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let cfg = match path {
            None => Self::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                Self::parse(&text)?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.bands.iter().any(|b| b.count == 0) {
            return Err(CliError::Config("band count must be at least 1".into()));
        }
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        let cap = &self.limits;
        if cap.max_bands == 0 || cap.max_bands > MAX_BAND_COUNT {
            return Err(CliError::Config(format!("max_bands must lie in 1..={MAX_BAND_COUNT}")));
        }
        if cap.density_ratios.is_empty() {
            return Err(CliError::Config("density_ratios is empty".into()));
        }
        if self.delay_cdf.points < 2 {
            return Err(CliError::Config("delay_cdf.points must be at least 2".into()));
        }
        self.scenario()?;
        Ok(())
    }

    pub fn traffic(&self) -> Result<TrafficModel, CliError> {
        let size = SizeDistribution::gamma(self.file_size_mean, self.file_size_shape)?;
        Ok(TrafficModel::from_capacity(self.capacity, size)?)
    }

    pub fn outage(&self) -> Result<OutageModel, CliError> {
        Ok(OutageModel::new(self.outage_interarrival_mean, self.outage_duration_shape)?)
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        if self.bands.is_empty() {
            return Err(CliError::Config("at least one [[band]] table is required".into()));
        }
        let mut bands = Vec::new();
        for b in &self.bands {
            let band = BandConfig::new(b.bandwidth, b.vacancy, b.bs_density)?;
            bands.extend(std::iter::repeat_n(band, b.count));
        }
        Ok(Scenario::new(self.user_density, bands, self.target_rate, self.traffic()?, self.outage()?)?
            .with_thinning(self.thinning)?)
    }

    /// Copy with one sweep parameter replaced.
    pub fn with_parameter(&self, parameter: SweepParameter, value: f64) -> Self {
        let mut c = self.clone();
        match parameter {
            SweepParameter::Capacity => c.capacity = value,
            SweepParameter::TargetRate => c.target_rate = value,
            SweepParameter::DensityRatio => c.user_density = value * self.bands[0].bs_density,
            SweepParameter::FileSizeMean => c.file_size_mean = value,
            SweepParameter::OutageInterarrivalMean => c.outage_interarrival_mean = value,
            SweepParameter::Thinning => c.thinning = value,
        }
        c
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
        assert_eq!(c.scenario().unwrap().bands.len(), 5);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let mut text = RunConfig::default().to_toml();
        text = text.replacen("capacity = 1.0", "capacity = 1.0\nbogus = 3", 1);
        assert!(matches!(RunConfig::parse(&text), Err(CliError::Config(_))));
        let text = RunConfig::default().to_toml().replacen("count = 5", "count = 5\nheight = 30", 1);
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn sweep_rules() {
        let mut s = Sweep::default();
        assert!(s.validate().is_ok());
        assert_eq!(s.values().len(), 21);
        s.points = 1;
        assert!(s.validate().is_err());
        s = Sweep {
            scale: Scale::Log,
            ..Sweep::default()
        };
        assert!(s.validate().is_err());
        assert!(toml::from_str::<Sweep>("parameter = \"height\"\nmin = 0\nmax = 1\npoints = 3").is_err());
    }
}
