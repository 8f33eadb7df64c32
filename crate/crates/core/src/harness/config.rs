use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::acoustics::{hpbw_from_radius, log_spaced_radii, AcousticsConfig};
use crate::error::{Error, Result};
use crate::fastslam::FastSlamConfig;
use crate::metrics::{EKF_NEES_CAP, FASTSLAM_NEES_CAP};
use crate::sensing::{SensingParams, Strategy};
use crate::slam::{NoiseConfig, RayConfig};
use crate::world::WorldConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ekf,
    Fastslam,
}

impl Algorithm {
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Ekf => "ekf",
            Algorithm::Fastslam => "fastslam",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ekf" => Ok(Algorithm::Ekf),
            "fastslam" => Ok(Algorithm::Fastslam),
            other => Err(Error::InvalidInput(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub initial_pose_std: [f64; 3],
    pub ray: RayConfig,
    pub fastslam: FastSlamConfig,
    pub ekf_nees_cap: f64,
    pub fastslam_nees_cap: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            initial_pose_std: [0.05, 0.05, 0.0436],
            ray: RayConfig::default(),
            fastslam: FastSlamConfig::default(),
            ekf_nees_cap: EKF_NEES_CAP,
            fastslam_nees_cap: FASTSLAM_NEES_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub n_mc: usize,
    pub master_seed: u64,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    pub out_dir: PathBuf,
    pub algorithms: Vec<Algorithm>,
    /// Strategies that use the vehicle emitter are run at every selected
    /// radius; passive runs once.
    pub strategies: Vec<Strategy>,
    pub radius_count: usize,
    pub radius_min: f64,
    pub radius_max: f64,
    /// Indices into the log-spaced radius grid.
    pub radius_indices: Vec<usize>,
    pub write_measurements: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            n_mc: 115,
            master_seed: 0,
            jobs: 0,
            out_dir: PathBuf::from("out"),
            algorithms: vec![Algorithm::Ekf, Algorithm::Fastslam],
            strategies: vec![Strategy::Active, Strategy::Passive, Strategy::Fused],
            radius_count: 12,
            radius_min: 0.0025,
            radius_max: 0.025,
            radius_indices: (0..12).collect(),
            write_measurements: true,
        }
    }
}

/// Complete description of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub world: WorldConfig,
    pub acoustics: AcousticsConfig,
    pub sensing: SensingParams,
    pub filter: FilterConfig,
    pub experiment: ExperimentSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::paper()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Grid {
    Paper,
    Desk,
}

impl ExperimentConfig {
    /// Full grid with the reference simulation parameters.
    pub fn paper() -> Self {
        Self {
            world: WorldConfig::default(),
            acoustics: AcousticsConfig::default(),
            sensing: SensingParams::default(),
            filter: FilterConfig::default(),
            experiment: ExperimentSection::default(),
        }
    }

    /// Reduced grid that runs in minutes: 10 worlds of 20 landmarks, 400
    /// steps, four beamwidths spanning the grid.
    pub fn desk() -> Self {
        let mut cfg = Self::paper();
        cfg.world.n_landmarks = 20;
        cfg.world.n_steps = 400;
        cfg.experiment.n_mc = 10;
        cfg.experiment.radius_indices = vec![0, 4, 8, 11];
        cfg
    }

    pub fn preset(grid: Grid) -> Self {
        match grid {
            Grid::Paper => Self::paper(),
            Grid::Desk => Self::desk(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.acoustics.validate()?;
        self.sensing.validate()?;
        self.filter.ray.validate()?;
        self.filter.fastslam.validate()?;
        self.noise().validate()?;
        let e = &self.experiment;
        if e.n_mc == 0 {
            return Err(Error::Config("n_mc must be at least 1".into()));
        }
        if e.algorithms.is_empty() || e.strategies.is_empty() {
            return Err(Error::Config("at least one algorithm and one strategy are required".into()));
        }
        if !(e.radius_min > 0.0 && e.radius_min <= e.radius_max) {
            return Err(Error::Config("radius bounds must satisfy 0 < min ≤ max".into()));
        }
        if let Some(i) = e.radius_indices.iter().find(|&&i| i >= e.radius_count) {
            return Err(Error::Config(format!("radius index {i} outside a grid of {}", e.radius_count)));
        }
        if (self.world.beacon_frequency - self.acoustics.beacon_frequency).abs() > 0.0 {
            return Err(Error::Config("world and acoustics disagree on the beacon frequency".into()));
        }
        Ok(())
    }

    /// Filter noise model, matched to the simulated noise.
    pub fn noise(&self) -> NoiseConfig {
        NoiseConfig {
            sigma_range: self.sensing.sigma_range,
            sigma_bearing: self.sensing.sigma_bearing,
            sigma_speed: self.world.sigma_speed,
            sigma_steer: self.world.sigma_steer,
            initial_pose_std: self.filter.initial_pose_std,
        }
    }

    pub fn radii(&self) -> Vec<f64> {
        let e = &self.experiment;
        log_spaced_radii(e.radius_count, e.radius_min, e.radius_max)
    }

    pub fn hpbw_deg(&self, radius: f64) -> f64 {
        hpbw_from_radius(radius, self.acoustics.vehicle_frequency, self.acoustics.speed_of_sound)
    }

    pub fn nees_cap(&self, algorithm: Algorithm) -> f64 {
        match algorithm {
            Algorithm::Ekf => self.filter.ekf_nees_cap,
            Algorithm::Fastslam => self.filter.fastslam_nees_cap,
        }
    }
}
