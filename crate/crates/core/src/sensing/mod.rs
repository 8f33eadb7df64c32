//! Measurement simulation for active, passive and fused sensing.
//!
//! Detection is decided per reflector and per channel from the link budget.
//! Detected echoes are reported with additive Gaussian noise (parametric
//! fidelity) or with a bearing estimated by beamscan on the four receiving
//! arrays (beamscan fidelity). Noise is drawn from a substream keyed by
//! `(timestep, landmark id)` in a fixed order, so the three strategies see
//! identical noise for the channels they share.

mod beamscan;
mod log;

pub use beamscan::{beamscan_doa, ArrayFace, UlaConfig, UlaSpec};
pub use log::{read_measurement_log, write_measurement_log, MEASUREMENT_LOG_HEADER};

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::acoustics::{link_budget, AcousticsConfig, EchoPath, EmitterSpec, LinkBudget, Medium};
use crate::angle::{circular_mean, wrap_angle};
use crate::error::{Error, Result};
use crate::rng;
use crate::world::{Pose, WorldMap};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeasurementKind {
    Active { range: f64, bearing: f64 },
    Passive { bearing: f64 },
}

/// One landmark observation at control step `k`. The bearing is in the
/// vehicle frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measurement {
    pub k: usize,
    pub id: u32,
    pub kind: MeasurementKind,
}

impl Measurement {
    pub fn active(k: usize, id: u32, range: f64, bearing: f64) -> Self {
        Self {
            k,
            id,
            kind: MeasurementKind::Active {
                range,
                bearing: wrap_angle(bearing),
            },
        }
    }

    pub fn passive(k: usize, id: u32, bearing: f64) -> Self {
        Self {
            k,
            id,
            kind: MeasurementKind::Passive {
                bearing: wrap_angle(bearing),
            },
        }
    }

    pub fn bearing(&self) -> f64 {
        match self.kind {
            MeasurementKind::Active { bearing, .. } | MeasurementKind::Passive { bearing } => bearing,
        }
    }

    pub fn range(&self) -> Option<f64> {
        match self.kind {
            MeasurementKind::Active { range, .. } => Some(range),
            MeasurementKind::Passive { .. } => None,
        }
    }

    pub fn is_active(&self) -> bool {
        matches!(self.kind, MeasurementKind::Active { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Active,
    Passive,
    Fused,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Active, Strategy::Passive, Strategy::Fused];

    pub fn uses_active(self) -> bool {
        matches!(self, Strategy::Active | Strategy::Fused)
    }

    pub fn uses_passive(self) -> bool {
        matches!(self, Strategy::Passive | Strategy::Fused)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Active => "active",
            Strategy::Passive => "passive",
            Strategy::Fused => "fused",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "active" => Ok(Strategy::Active),
            "passive" => Ok(Strategy::Passive),
            "fused" => Ok(Strategy::Fused),
            other => Err(Error::InvalidInput(format!("unknown strategy '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fidelity {
    #[default]
    Parametric,
    Beamscan,
}

/// Sensor noise and processing options shared by every strategy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensingParams {
    pub sigma_range: f64,
    pub sigma_bearing: f64,
    pub fidelity: Fidelity,
    /// Sensing happens every this many control steps.
    pub every_steps: usize,
    pub ula: UlaConfig,
}

impl Default for SensingParams {
    fn default() -> Self {
        Self {
            sigma_range: 0.2,
            sigma_bearing: 0.15,
            fidelity: Fidelity::Parametric,
            every_steps: 4,
            ula: UlaConfig::default(),
        }
    }
}

impl SensingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_range > 0.0 && self.sigma_bearing > 0.0) {
            return Err(Error::Config("measurement noise deviations must be positive".into()));
        }
        if self.every_steps == 0 {
            return Err(Error::Config("every_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Complete sensing configuration for one experimental cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensingConfig {
    pub strategy: Strategy,
    /// Vehicle piston radius (m). Ignored by the passive strategy.
    pub emitter_radius: f64,
    pub params: SensingParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channel {
    Active,
    Passive,
}

/// Routes an echo to a channel by its carrier frequency.
pub fn classify_channel(frequency: f64, acoustics: &AcousticsConfig) -> Result<Channel> {
    let tol = acoustics.band_tolerance_hz;
    if (frequency - acoustics.vehicle_frequency).abs() <= tol {
        Ok(Channel::Active)
    } else if (frequency - acoustics.beacon_frequency).abs() <= tol {
        Ok(Channel::Passive)
    } else {
        Err(Error::Classification(frequency))
    }
}

/// Per-reflector detection outcome before noise is applied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub id: u32,
    pub range: f64,
    pub bearing: f64,
    pub active: Option<LinkBudget>,
    pub passive: Option<LinkBudget>,
}

pub struct Sensor {
    acoustics: AcousticsConfig,
    cfg: SensingConfig,
    medium: Medium,
    vehicle: EmitterSpec,
    beacon: EmitterSpec,
    ula: UlaSpec,
}

impl Sensor {
    pub fn new(acoustics: &AcousticsConfig, cfg: &SensingConfig) -> Result<Self> {
        acoustics.validate()?;
        cfg.params.validate()?;
        if cfg.strategy.uses_active() && !(cfg.emitter_radius > 0.0) {
            return Err(Error::Config("piston radius must be positive".into()));
        }
        Ok(Self {
            acoustics: acoustics.clone(),
            cfg: cfg.clone(),
            medium: acoustics.medium(),
            vehicle: acoustics.vehicle_emitter(cfg.emitter_radius.max(f64::MIN_POSITIVE)),
            beacon: acoustics.beacon_emitter(),
            ula: UlaSpec::new(&cfg.params.ula, acoustics),
        })
    }

    pub fn config(&self) -> &SensingConfig {
        &self.cfg
    }

    /// Link budgets of every reflector on the enabled channels.
    pub fn detect(&self, world: &WorldMap, pose: &Pose) -> Vec<Detection> {
        let strategy = self.cfg.strategy;
        let threshold = self.acoustics.detection_threshold_db;
        let beacon_pos = world.beacon.position();
        let vehicle_pos = pose.position();
        let mut out = Vec::new();
        for r in world.reflectors() {
            let p = r.position();
            let range = (p - vehicle_pos).norm();
            if !(range > 0.0) {
                continue;
            }
            let bearing = pose.bearing_to(p);
            let active = if strategy.uses_active() {
                let path = EchoPath::Active {
                    range,
                    off_axis: bearing,
                    reflector_radius: r.radius,
                };
                link_budget(&self.vehicle, &path, &self.medium).ok().filter(|b| b.detected(threshold))
            } else {
                None
            };
            let passive = if strategy.uses_passive() {
                let path = if r.id == world.beacon.id {
                    EchoPath::Direct { range }
                } else {
                    let to_source = beacon_pos - p;
                    let to_receiver = vehicle_pos - p;
                    let cos_psi = to_source.dot(&to_receiver) / (to_source.norm() * range);
                    // Exact forward scatter is a removable singularity.
                    let gamma = (std::f64::consts::PI - cos_psi.clamp(-1.0, 1.0).acos()).max(1e-9);
                    EchoPath::Bistatic {
                        source_to_target: to_source.norm(),
                        target_to_receiver: range,
                        scattering_angle: gamma,
                        reflector_radius: r.radius,
                    }
                };
                link_budget(&self.beacon, &path, &self.medium).ok().filter(|b| b.detected(threshold))
            } else {
                None
            };
            if active.is_some() || passive.is_some() {
                out.push(Detection {
                    id: r.id,
                    range,
                    bearing,
                    active,
                    passive,
                });
            }
        }
        out
    }

    /// Measurements at control step `k` for the true pose `pose`.
    pub fn sense(&self, world: &WorldMap, pose: &Pose, k: usize) -> Result<Vec<Measurement>> {
        let p = &self.cfg.params;
        let mut out = Vec::new();
        for det in self.detect(world, pose) {
            let mut noise = rng::substream(world.seed, rng::SENSING, &[k as u64, det.id as u64]);
            let range_noise: f64 = StandardNormal.sample(&mut noise);
            let active_bearing_noise: f64 = StandardNormal.sample(&mut noise);
            let passive_bearing_noise: f64 = StandardNormal.sample(&mut noise);

            let active = match det.active {
                Some(budget) => Some((
                    det.range + p.sigma_range * range_noise,
                    self.bearing_estimate(
                        world.seed,
                        k,
                        &det,
                        &budget,
                        self.acoustics.vehicle_frequency,
                        active_bearing_noise,
                    )?,
                )),
                None => None,
            };
            let passive = match det.passive {
                Some(budget) => Some(self.bearing_estimate(
                    world.seed,
                    k,
                    &det,
                    &budget,
                    self.acoustics.beacon_frequency,
                    passive_bearing_noise,
                )?),
                None => None,
            };
            let m = match (active, passive) {
                (Some((range, a)), Some(b)) => Measurement::active(k, det.id, range, a + wrap_angle(b - a) / 2.0),
                (Some((range, a)), None) => Measurement::active(k, det.id, range, a),
                (None, Some(b)) => Measurement::passive(k, det.id, b),
                (None, None) => continue,
            };
            out.push(m);
        }
        Ok(out)
    }

    fn bearing_estimate(
        &self,
        seed: u64,
        k: usize,
        det: &Detection,
        budget: &LinkBudget,
        frequency: f64,
        unit_noise: f64,
    ) -> Result<f64> {
        match self.cfg.params.fidelity {
            Fidelity::Parametric => Ok(det.bearing + self.cfg.params.sigma_bearing * unit_noise),
            Fidelity::Beamscan => {
                let channel = classify_channel(frequency, &self.acoustics)?;
                let snr_db = budget.received_level - self.acoustics.detection_threshold_db
                    + self.cfg.params.ula.snr_offset_db;
                let mut elem_rng = rng::substream(
                    seed,
                    "beamscan",
                    &[k as u64, det.id as u64, matches!(channel, Channel::Active) as u64],
                );
                let estimates: Vec<(f64, f64)> = self
                    .ula
                    .faces()
                    .filter_map(|face| {
                        face.estimate(&self.ula, det.bearing, frequency, snr_db, &mut elem_rng)
                            .map(|b| (b, 1.0))
                    })
                    .collect();
                if estimates.is_empty() {
                    // Every face rejected the echo; keep the parametric fallback.
                    Ok(det.bearing + self.cfg.params.sigma_bearing * unit_noise)
                } else {
                    Ok(circular_mean(estimates))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{generate_world, WorldConfig};

    fn small_world(seed: u64) -> WorldMap {
        let cfg = WorldConfig {
            n_landmarks: 20,
            n_steps: 400,
            ..WorldConfig::default()
        };
        generate_world(&cfg, seed).unwrap()
    }

    fn sensor(strategy: Strategy, radius: f64) -> Sensor {
        Sensor::new(
            &AcousticsConfig::default(),
            &SensingConfig {
                strategy,
                emitter_radius: radius,
                params: SensingParams::default(),
            },
        )
        .unwrap()
    }

    #[test]
    fn classify_bands() {
        let a = AcousticsConfig::default();
        assert_eq!(classify_channel(35e3, &a).unwrap(), Channel::Active);
        assert_eq!(classify_channel(30e3, &a).unwrap(), Channel::Passive);
        assert!(matches!(classify_channel(32.5e3, &a), Err(Error::Classification(_))));
    }

    #[test]
    fn empty_world_gives_no_measurements() {
        let mut w = small_world(1);
        w.landmarks.clear();
        // Park the beacon out of reach.
        w.beacon.x = 1e4;
        w.beacon.y = 1e4;
        for s in Strategy::ALL {
            assert!(sensor(s, 0.0025).sense(&w, &w.pose_at(4), 4).unwrap().is_empty());
        }
    }

    #[test]
    fn fused_contains_every_active_detection() {
        let w = small_world(5);
        for radius in [0.0025, 0.01, 0.025] {
            let active = sensor(Strategy::Active, radius);
            let fused = sensor(Strategy::Fused, radius);
            for k in (4..=400).step_by(4) {
                let pose = w.pose_at(k);
                let a = active.sense(&w, &pose, k).unwrap();
                let f = fused.sense(&w, &pose, k).unwrap();
                for m in &a {
                    let g = f.iter().find(|g| g.id == m.id).expect("fused has active id");
                    assert!(g.is_active());
                    assert_eq!(g.range(), m.range());
                }
            }
        }
    }

    #[test]
    fn fused_without_active_channel_equals_passive() {
        let w = small_world(6);
        let silent = AcousticsConfig {
            vehicle_source_level_db: -1e3,
            ..AcousticsConfig::default()
        };
        let mk = |s| {
            Sensor::new(
                &silent,
                &SensingConfig {
                    strategy: s,
                    emitter_radius: 0.0025,
                    params: SensingParams::default(),
                },
            )
            .unwrap()
        };
        let (fused, passive) = (mk(Strategy::Fused), mk(Strategy::Passive));
        for k in (4..=400).step_by(4) {
            let pose = w.pose_at(k);
            assert_eq!(fused.sense(&w, &pose, k).unwrap(), passive.sense(&w, &pose, k).unwrap());
        }
    }

    #[test]
    fn lower_threshold_never_removes_detections() {
        let w = small_world(8);
        let mut loose = AcousticsConfig::default();
        loose.detection_threshold_db -= 6.0;
        let cfg = SensingConfig {
            strategy: Strategy::Fused,
            emitter_radius: 0.01,
            params: SensingParams::default(),
        };
        let strict = Sensor::new(&AcousticsConfig::default(), &cfg).unwrap();
        let lax = Sensor::new(&loose, &cfg).unwrap();
        for k in (4..=400).step_by(8) {
            let pose = w.pose_at(k);
            let a = strict.detect(&w, &pose);
            let b = lax.detect(&w, &pose);
            for d in &a {
                let e = b.iter().find(|e| e.id == d.id).unwrap();
                assert!(d.active.is_none() || e.active.is_some());
                assert!(d.passive.is_none() || e.passive.is_some());
            }
        }
    }

    #[test]
    fn bearing_noise_statistics() {
        let mut errs = Vec::new();
        let s = sensor(Strategy::Passive, 0.0025);
        for seed in 0..40 {
            let w = small_world(seed);
            for k in (4..=400).step_by(4) {
                let pose = w.pose_at(k);
                for m in s.sense(&w, &pose, k).unwrap() {
                    let truth = pose.bearing_to(w.true_position(m.id).unwrap());
                    errs.push(wrap_angle(m.bearing() - truth));
                }
            }
            if errs.len() > 12_000 {
                break;
            }
        }
        assert!(errs.len() >= 10_000, "only {} detections", errs.len());
        let n = errs.len() as f64;
        let mean = errs.iter().sum::<f64>() / n;
        let std = (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((std / 0.15 - 1.0).abs() < 0.05, "std {std}");
    }

    #[test]
    fn beamscan_fidelity_detects_the_same_landmarks() {
        let w = small_world(9);
        let mut cfg = SensingConfig {
            strategy: Strategy::Fused,
            emitter_radius: 0.006,
            params: SensingParams::default(),
        };
        let parametric = Sensor::new(&AcousticsConfig::default(), &cfg).unwrap();
        cfg.params.fidelity = Fidelity::Beamscan;
        let beamscan = Sensor::new(&AcousticsConfig::default(), &cfg).unwrap();
        let mut errs = Vec::new();
        for k in (4..=200).step_by(4) {
            let pose = w.pose_at(k);
            let a = parametric.sense(&w, &pose, k).unwrap();
            let b = beamscan.sense(&w, &pose, k).unwrap();
            let ids = |v: &[Measurement]| v.iter().map(|m| (m.id, m.is_active())).collect::<Vec<_>>();
            assert_eq!(ids(&a), ids(&b));
            for m in &b {
                let truth = pose.bearing_to(w.true_position(m.id).unwrap());
                errs.push(wrap_angle(m.bearing() - truth).abs());
            }
        }
        errs.sort_by(f64::total_cmp);
        let median = errs[errs.len() / 2];
        assert!(median < 0.1, "median beamscan error {median}");
    }
}
