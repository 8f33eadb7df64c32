use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::acoustics::AcousticsConfig;
use crate::angle::wrap_angle;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UlaConfig {
    pub elements: usize,
    /// Arrays mounted around the hull at equal angular offsets.
    pub faces: usize,
    pub steer_limit_deg: f64,
    pub grid_step_deg: f64,
    /// Peaks below `max + peak_threshold_db` are discarded.
    pub peak_threshold_db: f64,
    /// Added to the detection margin to obtain the per-element SNR.
    pub snr_offset_db: f64,
}

impl Default for UlaConfig {
    fn default() -> Self {
        Self {
            elements: 10,
            faces: 4,
            steer_limit_deg: 80.0,
            grid_step_deg: 0.25,
            peak_threshold_db: -6.0,
            snr_offset_db: 0.0,
        }
    }
}

/// Receiving array geometry. Element spacing is half a wavelength at the
/// highest emitter frequency so that no grating lobes appear within the
/// steering limits.
#[derive(Clone, Debug, PartialEq)]
pub struct UlaSpec {
    pub config: UlaConfig,
    pub spacing: f64,
    pub speed_of_sound: f64,
}

impl UlaSpec {
    pub fn new(config: &UlaConfig, acoustics: &AcousticsConfig) -> Self {
        let f_max = acoustics.vehicle_frequency.max(acoustics.beacon_frequency);
        Self {
            config: config.clone(),
            spacing: acoustics.speed_of_sound / (2.0 * f_max),
            speed_of_sound: acoustics.speed_of_sound,
        }
    }

    pub fn faces(&self) -> impl Iterator<Item = ArrayFace> + '_ {
        let n = self.config.faces.max(1);
        (0..n).map(move |i| ArrayFace {
            index: i,
            boresight: wrap_angle(i as f64 * TAU / n as f64),
        })
    }

    /// Scan grid in degrees covering the steering limits.
    pub fn grid(&self) -> Vec<f64> {
        let lim = self.config.steer_limit_deg;
        let step = self.config.grid_step_deg;
        let n = (2.0 * lim / step).round() as usize;
        (0..=n).map(|i| -lim + i as f64 * step).collect()
    }

    fn element_offsets(&self) -> impl Iterator<Item = f64> + '_ {
        let m = self.config.elements;
        let centre = (m as f64 - 1.0) / 2.0;
        (0..m).map(move |n| (n as f64 - centre) * self.spacing)
    }

    /// Narrowband plane-wave response of the array to a source at `local`
    /// radians from broadside.
    pub fn steering(&self, local: f64, frequency: f64) -> Vec<Complex64> {
        let k = TAU * frequency / self.speed_of_sound;
        self.element_offsets()
            .map(|x| Complex64::from_polar(1.0, k * x * local.sin()))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArrayFace {
    pub index: usize,
    /// Broadside direction in the vehicle frame.
    pub boresight: f64,
}

impl ArrayFace {
    pub fn to_local(&self, vehicle_bearing: f64) -> f64 {
        wrap_angle(vehicle_bearing - self.boresight)
    }

    pub fn to_vehicle(&self, local: f64) -> f64 {
        wrap_angle(local + self.boresight)
    }

    /// Simulates one noisy snapshot of a single echo and returns the beamscan
    /// bearing in the vehicle frame, or `None` if the echo lies outside this
    /// face's steering limits.
    pub fn estimate<R: Rng>(
        &self,
        ula: &UlaSpec,
        vehicle_bearing: f64,
        frequency: f64,
        snr_db: f64,
        rng: &mut R,
    ) -> Option<f64> {
        let local = self.to_local(vehicle_bearing);
        if local.abs() > ula.config.steer_limit_deg.to_radians() {
            return None;
        }
        let amplitude = 10f64.powf(snr_db / 20.0);
        let snapshot: Vec<Complex64> = ula
            .steering(local, frequency)
            .into_iter()
            .map(|s| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                s * amplitude + Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            })
            .collect();
        let peaks = beamscan_doa(&snapshot, ula, frequency, &ula.grid()).ok()?;
        peaks.first().map(|(deg, _)| self.to_vehicle(deg.to_radians()))
    }
}

/// Conventional (delay-and-sum) beamscan over `grid_deg`.
///
/// Returns local maxima of the normalized beam power that lie within the
/// configured threshold of the global maximum, strongest first, as
/// `(bearing in degrees from broadside, power)`.
pub fn beamscan_doa(
    snapshot: &[Complex64],
    ula: &UlaSpec,
    frequency: f64,
    grid_deg: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if snapshot.is_empty() {
        return Err(Error::InvalidInput("empty snapshot".into()));
    }
    if snapshot.len() != ula.config.elements {
        return Err(Error::InvalidInput(format!(
            "snapshot has {} elements, array has {}",
            snapshot.len(),
            ula.config.elements
        )));
    }
    if grid_deg.is_empty() {
        return Err(Error::InvalidInput("empty scan grid".into()));
    }
    let m = snapshot.len() as f64;
    let power: Vec<f64> = grid_deg
        .iter()
        .map(|deg| {
            let a = ula.steering(deg.to_radians(), frequency);
            let y: Complex64 = a.iter().zip(snapshot).map(|(ai, xi)| ai.conj() * xi).sum();
            y.norm_sqr() / (m * m)
        })
        .collect();
    let max = power.iter().cloned().fold(0.0, f64::max);
    let floor = max * 10f64.powf(ula.config.peak_threshold_db / 10.0);
    let n = power.len();
    let mut peaks: Vec<(f64, f64)> = (0..n)
        .filter(|&i| {
            let left = if i > 0 { power[i - 1] } else { f64::NEG_INFINITY };
            let right = if i + 1 < n { power[i + 1] } else { f64::NEG_INFINITY };
            power[i] > left && power[i] >= right && power[i] >= floor
        })
        .map(|i| (grid_deg[i], power[i]))
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(peaks)
}
