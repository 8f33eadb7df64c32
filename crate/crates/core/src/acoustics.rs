//! Echo link budgets: emitter directivity, spreading, atmospheric absorption
//! and landmark target strength.
//!
//! All levels are in dB relative to the receiver noise floor, so a received
//! level is directly comparable to the detection threshold.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{bessel_j1, bisect};

/// Piston directivity `|2 J₁(x)| / x` with `x = k·a·sin φ`.
///
/// Returns the pressure ratio to the main response axis, in `[0, 1]`.
pub fn piston_response(phi: f64, frequency: f64, radius: f64, speed_of_sound: f64) -> f64 {
    let x = wavenumber(frequency, speed_of_sound) * radius * phi.sin();
    if x.abs() < 1e-8 {
        return 1.0;
    }
    (2.0 * bessel_j1(x) / x).abs().min(1.0)
}

pub fn wavenumber(frequency: f64, speed_of_sound: f64) -> f64 {
    2.0 * PI * frequency / speed_of_sound
}

/// Argument `x*` where the piston pressure ratio falls to `1/√2` (-3 dB).
pub fn half_power_argument() -> f64 {
    bisect(|x| 2.0 * bessel_j1(x) / x - FRAC_1_SQRT_2, 0.5, 3.0).expect("bracketed half-power root")
}

/// Full half-power beamwidth of a piston emitter, in degrees.
///
/// When the main lobe never drops to half power inside the front hemisphere
/// the beam is reported as 180°.
pub fn hpbw_from_radius(radius: f64, frequency: f64, speed_of_sound: f64) -> f64 {
    let ka = wavenumber(frequency, speed_of_sound) * radius;
    let s = half_power_argument() / ka;
    if s >= 1.0 {
        180.0
    } else {
        2.0 * s.asin().to_degrees()
    }
}

/// `count` radii spaced logarithmically over `[min, max]`, ascending.
pub fn log_spaced_radii(count: usize, min: f64, max: f64) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![min],
        _ => {
            let (lo, hi) = (min.ln(), max.ln());
            (0..count)
                .map(|i| (lo + (hi - lo) * i as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}

/// One-way or round-trip propagation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Travel {
    OneWay,
    RoundTrip,
}

impl Travel {
    pub fn factor(self) -> f64 {
        match self {
            Travel::OneWay => 1.0,
            Travel::RoundTrip => 2.0,
        }
    }
}

/// Spherical spreading loss `r·20·log₁₀(d/r)` in dB, `d` being the total
/// distance travelled.
pub fn spreading_loss(distance: f64, travel: Travel) -> Result<f64> {
    if !(distance > 0.0) || !distance.is_finite() {
        return Err(Error::InvalidInput(format!("distance must be positive, got {distance}")));
    }
    let r = travel.factor();
    Ok(r * 20.0 * (distance / r).log10())
}

/// Atmospheric absorption coefficient in dB per metre.
pub fn atmospheric_loss(frequency: f64, f_oxygen: f64, f_nitrogen: f64) -> f64 {
    let f2 = frequency * frequency;
    8.686
        * f2
        * (1.84e-11
            + 6.1424e-6 * f_oxygen / (f_oxygen * f_oxygen + f2)
            + 1.5552e-6 * f_nitrogen / (f_nitrogen * f_nitrogen + f2))
}

/// Molecular relaxation frequencies of oxygen and nitrogen (Hz).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationFrequencies {
    pub oxygen: f64,
    pub nitrogen: f64,
}

impl RelaxationFrequencies {
    /// Standard relations for humid air (ISO 9613-1).
    pub fn for_air(temperature_k: f64, relative_humidity_pct: f64, pressure_pa: f64) -> Self {
        const REFERENCE_PRESSURE: f64 = 101_325.0;
        const REFERENCE_TEMPERATURE: f64 = 293.15;
        const TRIPLE_POINT: f64 = 273.16;
        let p_rel = pressure_pa / REFERENCE_PRESSURE;
        let exponent = -6.8346 * (TRIPLE_POINT / temperature_k).powf(1.261) + 4.6151;
        let h = relative_humidity_pct * 10f64.powf(exponent) / p_rel;
        let t_rel = temperature_k / REFERENCE_TEMPERATURE;
        Self {
            oxygen: p_rel * (24.0 + 4.04e4 * h * (0.02 + h) / (0.391 + h)),
            nitrogen: p_rel * t_rel.powf(-0.5) * (9.0 + 280.0 * h * (-4.170 * (t_rel.powf(-1.0 / 3.0) - 1.0)).exp()),
        }
    }
}

impl Default for RelaxationFrequencies {
    /// 20 °C, 50 % relative humidity, one atmosphere.
    fn default() -> Self {
        Self::for_air(293.15, 50.0, 101_325.0)
    }
}

/// Bistatic scattering intensity of a small rigid reflector, 2-D
/// physical-optics form: a geometric term plus the forward diffraction lobe.
///
/// `gamma` is the scattering angle, `π` meaning straight back to the emitter.
pub fn scattering_intensity(gamma: f64, radius: f64, k: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= PI) {
        return Err(Error::InvalidInput(format!("scattering angle must lie in (0, π], got {gamma}")));
    }
    let cot_half = 1.0 / (gamma / 2.0).tan();
    let geometric = radius / 2.0 * (gamma / 2.0).sin();
    let diffraction = cot_half * cot_half * (radius * k * gamma.sin()).sin().powi(2) / (2.0 * PI * k);
    Ok(geometric + diffraction)
}

/// Target strength in dB relative to back-reflection (`gamma = π`).
pub fn target_strength(gamma: f64, radius: f64, k: f64) -> Result<f64> {
    let back = scattering_intensity(PI, radius, k)?;
    Ok(10.0 * (scattering_intensity(gamma, radius, k)? / back).log10())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmitterPattern {
    Isotropic,
    /// Circular piston radiating only into the front half-plane.
    BackbaffledPiston { radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmitterSpec {
    pub frequency: f64,
    pub source_level_db: f64,
    pub pattern: EmitterPattern,
}

impl EmitterSpec {
    /// Directivity loss (dB, ≥ 0) at `phi` off the main response axis.
    /// Infinite behind a backbaffled emitter and in pattern nulls.
    pub fn directivity_loss(&self, phi: f64, speed_of_sound: f64) -> f64 {
        match self.pattern {
            EmitterPattern::Isotropic => 0.0,
            EmitterPattern::BackbaffledPiston { radius } => {
                if phi.abs() > FRAC_PI_2 {
                    return f64::INFINITY;
                }
                let p = piston_response(phi, self.frequency, radius, speed_of_sound);
                if p <= 0.0 {
                    f64::INFINITY
                } else {
                    -20.0 * p.log10()
                }
            }
        }
    }
}

/// Propagation medium.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Medium {
    pub speed_of_sound: f64,
    pub relaxation: RelaxationFrequencies,
}

impl Medium {
    pub fn absorption(&self, frequency: f64) -> f64 {
        atmospheric_loss(frequency, self.relaxation.oxygen, self.relaxation.nitrogen)
    }
}

/// Geometry of one echo path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EchoPath {
    /// Vehicle ping reflected straight back by a landmark at `range`, seen at
    /// `off_axis` radians from the emitter main response axis.
    Active { range: f64, off_axis: f64, reflector_radius: f64 },
    /// Beacon → landmark → vehicle, with the scattering angle at the landmark.
    Bistatic {
        source_to_target: f64,
        target_to_receiver: f64,
        scattering_angle: f64,
        reflector_radius: f64,
    },
    /// Beacon → vehicle without reflection.
    Direct { range: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub source_level: f64,
    pub directivity_loss: f64,
    pub spreading_loss: f64,
    pub atmospheric_loss: f64,
    /// Target strength relative to back-reflection (≤ 0 for the active path).
    pub target_strength: f64,
    pub received_level: f64,
}

impl LinkBudget {
    fn compose(source_level: f64, directivity: f64, spreading: f64, atmospheric: f64, ts: f64) -> Self {
        Self {
            source_level,
            directivity_loss: directivity,
            spreading_loss: spreading,
            atmospheric_loss: atmospheric,
            target_strength: ts,
            received_level: source_level - directivity - spreading - atmospheric + ts,
        }
    }

    pub fn detected(&self, threshold_db: f64) -> bool {
        self.received_level >= threshold_db
    }
}

/// Composes the losses along an echo path.
pub fn link_budget(emitter: &EmitterSpec, path: &EchoPath, medium: &Medium) -> Result<LinkBudget> {
    let alpha = medium.absorption(emitter.frequency);
    match *path {
        EchoPath::Active {
            range,
            off_axis,
            reflector_radius,
        } => {
            let directivity = emitter.directivity_loss(off_axis, medium.speed_of_sound);
            let travelled = 2.0 * range;
            let spreading = spreading_loss(travelled, Travel::RoundTrip)?;
            let k = wavenumber(emitter.frequency, medium.speed_of_sound);
            let ts = target_strength(PI, reflector_radius, k)?;
            Ok(LinkBudget::compose(
                emitter.source_level_db,
                directivity,
                spreading,
                alpha * travelled,
                ts,
            ))
        }
        EchoPath::Bistatic {
            source_to_target,
            target_to_receiver,
            scattering_angle,
            reflector_radius,
        } => {
            let spreading = spreading_loss(source_to_target, Travel::OneWay)?
                + spreading_loss(target_to_receiver, Travel::OneWay)?;
            let k = wavenumber(emitter.frequency, medium.speed_of_sound);
            let ts = target_strength(scattering_angle, reflector_radius, k)?;
            Ok(LinkBudget::compose(
                emitter.source_level_db,
                emitter.directivity_loss(0.0, medium.speed_of_sound),
                spreading,
                alpha * (source_to_target + target_to_receiver),
                ts,
            ))
        }
        EchoPath::Direct { range } => Ok(LinkBudget::compose(
            emitter.source_level_db,
            emitter.directivity_loss(0.0, medium.speed_of_sound),
            spreading_loss(range, Travel::OneWay)?,
            alpha * range,
            0.0,
        )),
    }
}

/// Acoustic environment and transducer levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcousticsConfig {
    pub speed_of_sound: f64,
    pub vehicle_frequency: f64,
    pub beacon_frequency: f64,
    /// dB re. receiver noise floor.
    pub vehicle_source_level_db: f64,
    pub beacon_source_level_db: f64,
    pub detection_threshold_db: f64,
    pub relaxation_oxygen_hz: f64,
    pub relaxation_nitrogen_hz: f64,
    /// Half-width of the band accepted around each emitter frequency (Hz).
    pub band_tolerance_hz: f64,
}

impl Default for AcousticsConfig {
    fn default() -> Self {
        let relax = RelaxationFrequencies::default();
        Self {
            speed_of_sound: 341.3,
            vehicle_frequency: 35e3,
            beacon_frequency: 30e3,
            // On-axis active detection reaches ~20 m with the widest beam.
            vehicle_source_level_db: 107.4,
            beacon_source_level_db: 100.0,
            detection_threshold_db: 10.0,
            relaxation_oxygen_hz: relax.oxygen,
            relaxation_nitrogen_hz: relax.nitrogen,
            band_tolerance_hz: 1e3,
        }
    }
}

impl AcousticsConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("speed_of_sound", self.speed_of_sound),
            ("vehicle_frequency", self.vehicle_frequency),
            ("beacon_frequency", self.beacon_frequency),
            ("relaxation_oxygen_hz", self.relaxation_oxygen_hz),
            ("relaxation_nitrogen_hz", self.relaxation_nitrogen_hz),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if (self.vehicle_frequency - self.beacon_frequency).abs() <= 2.0 * self.band_tolerance_hz {
            return Err(Error::Config("emitter bands overlap".into()));
        }
        Ok(())
    }

    pub fn medium(&self) -> Medium {
        Medium {
            speed_of_sound: self.speed_of_sound,
            relaxation: RelaxationFrequencies {
                oxygen: self.relaxation_oxygen_hz,
                nitrogen: self.relaxation_nitrogen_hz,
            },
        }
    }

    pub fn vehicle_emitter(&self, radius: f64) -> EmitterSpec {
        EmitterSpec {
            frequency: self.vehicle_frequency,
            source_level_db: self.vehicle_source_level_db,
            pattern: EmitterPattern::BackbaffledPiston { radius },
        }
    }

    pub fn beacon_emitter(&self) -> EmitterSpec {
        EmitterSpec {
            frequency: self.beacon_frequency,
            source_level_db: self.beacon_source_level_db,
            pattern: EmitterPattern::Isotropic,
        }
    }
}
