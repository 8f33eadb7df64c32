use nalgebra::{Matrix2, Matrix2x3, Vector2};
use serde::{Deserialize, Serialize};

use super::{LandmarkEstimate, LandmarkStatus, NoiseConfig};
use crate::error::{Error, Result};
use crate::sensing::{Measurement, MeasurementKind};
use crate::world::Pose;

/// Landmark position from a range-bearing observation and the Jacobians of
/// that mapping with respect to the pose and to `(range, bearing)`.
pub fn active_init_jacobians(pose: &Pose, range: f64, bearing: f64) -> (Vector2<f64>, Matrix2x3<f64>, Matrix2<f64>) {
    let (s, c) = (bearing + pose.theta).sin_cos();
    let mean = Vector2::new(pose.x + range * c, pose.y + range * s);
    let g_pose = Matrix2x3::new(1.0, 0.0, -range * s, 0.0, 1.0, range * c);
    let g_obs = Matrix2::new(c, -range * s, s, range * c);
    (mean, g_pose, g_obs)
}

/// Places a landmark from a single active measurement. The covariance is the
/// sensor noise mapped through the inverse model; pose uncertainty is added
/// by the caller where the estimator carries it.
pub fn init_active(pose: &Pose, z: &Measurement, noise: &NoiseConfig) -> Result<LandmarkEstimate> {
    let MeasurementKind::Active { range, bearing } = z.kind else {
        return Err(Error::InvalidInput("active initialization needs a range".into()));
    };
    let (mean, _, g_obs) = active_init_jacobians(pose, range, bearing);
    Ok(LandmarkEstimate {
        id: z.id,
        mean,
        cov: g_obs * noise.range_bearing_cov() * g_obs.transpose(),
        status: LandmarkStatus::Full,
    })
}

/// Bearing-only ray initialization and hypothesis management parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RayConfig {
    /// Ratio of range standard deviation to range for every hypothesis.
    pub alpha: f64,
    /// Ratio of successive hypothesis ranges.
    pub beta: f64,
    pub s_min: f64,
    pub s_max: f64,
    /// Exponent sharpening the per-measurement hypothesis weights.
    pub likelihood_exponent: f64,
    /// Pruning level: a hypothesis goes when its aggregated likelihood falls
    /// below `prune_tau / N`.
    pub prune_tau: f64,
}

impl Default for RayConfig {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            beta: 3.0,
            s_min: 0.5,
            s_max: 20.0,
            likelihood_exponent: 1.0,
            prune_tau: 0.05,
        }
    }
}

impl RayConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 0.3) {
            return Err(Error::Config(format!("alpha must lie in (0, 0.3], got {}", self.alpha)));
        }
        if !(self.beta > 1.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must exceed 1, got {}", self.beta)));
        }
        if !(self.s_min > 0.0 && self.s_min < self.s_max && self.s_max.is_finite()) {
            return Err(Error::Config("range bounds must satisfy 0 < s_min < s_max".into()));
        }
        if !(self.likelihood_exponent > 0.0) {
            return Err(Error::Config("likelihood exponent must be positive".into()));
        }
        if !(self.prune_tau > 0.0 && self.prune_tau < 1.0) {
            return Err(Error::Config("prune_tau must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Number of range hypotheses needed to cover `[s_min, s_max]`.
    pub fn hypothesis_count(&self) -> usize {
        let ratio = (1.0 - self.alpha) / (1.0 + self.alpha) * self.s_max / self.s_min;
        1 + (ratio.ln() / self.beta.ln()).ceil().max(0.0) as usize
    }

    /// `(mean, std)` of each range hypothesis, nearest first.
    pub fn range_hypotheses(&self) -> Vec<(f64, f64)> {
        let mut s = self.s_min / (1.0 - self.alpha);
        (0..self.hypothesis_count())
            .map(|_| {
                let h = (s, self.alpha * s);
                s *= self.beta;
                h
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayHypothesis {
    pub range: f64,
    pub std: f64,
    /// Normalized aggregated likelihood.
    pub weight: f64,
}

/// A partially initialized landmark: Gaussian range hypotheses along the
/// bearing measured from `origin`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayHypothesisSet {
    pub id: u32,
    pub origin: Pose,
    pub bearing: f64,
    pub hypotheses: Vec<RayHypothesis>,
}

impl RayHypothesisSet {
    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.hypotheses.iter().map(|h| h.weight).sum()
    }

    fn direction(&self) -> (f64, f64) {
        (self.bearing + self.origin.theta).sin_cos()
    }

    /// Initial 2-D Gaussian of hypothesis `j`: radial deviation `σ_j`,
    /// tangential deviation `s_j·σ_φ`, no pose uncertainty.
    pub fn gaussian(&self, j: usize, sigma_bearing: f64) -> (Vector2<f64>, Matrix2<f64>) {
        let h = &self.hypotheses[j];
        let (s, c) = self.direction();
        let mean = self.origin.position() + Vector2::new(c, s) * h.range;
        let rot = Matrix2::new(c, -s, s, c);
        let local = Matrix2::new(h.std * h.std, 0.0, 0.0, (h.range * sigma_bearing).powi(2));
        (mean, rot * local * rot.transpose())
    }

    /// Jacobian of hypothesis `j`'s mean with respect to the origin pose.
    pub fn pose_jacobian(&self, j: usize) -> Matrix2x3<f64> {
        let r = self.hypotheses[j].range;
        let (s, c) = self.direction();
        Matrix2x3::new(1.0, 0.0, -r * s, 0.0, 1.0, r * c)
    }
}

/// Builds the geometric series of range hypotheses with uniform weights.
pub fn init_ray(pose: &Pose, bearing: f64, id: u32, cfg: &RayConfig) -> Result<RayHypothesisSet> {
    cfg.validate()?;
    let ranges = cfg.range_hypotheses();
    let w = 1.0 / ranges.len() as f64;
    Ok(RayHypothesisSet {
        id,
        origin: *pose,
        bearing,
        hypotheses: ranges
            .into_iter()
            .map(|(range, std)| RayHypothesis { range, std, weight: w })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

    #[test]
    fn active_init_examples() {
        let n = NoiseConfig::default();
        let m = init_active(&Pose::new(0.0, 0.0, 0.0), &Measurement::active(0, 1, 2.0, 0.0), &n).unwrap();
        assert_eq!(m.mean, Vector2::new(2.0, 0.0));
        assert!(m.is_spd());
        let m = init_active(&Pose::new(1.0, 0.0, FRAC_PI_2), &Measurement::active(0, 1, 1.0, 0.0), &n).unwrap();
        assert!((m.mean - Vector2::new(1.0, 1.0)).norm() < 1e-15);
        let m = init_active(&Pose::new(0.0, 0.0, 0.0), &Measurement::active(0, 1, SQRT_2, FRAC_PI_4), &n).unwrap();
        assert!((m.mean - Vector2::new(1.0, 1.0)).norm() < 1e-15);
        assert!(init_active(&Pose::new(0.0, 0.0, 0.0), &Measurement::passive(0, 1, 0.0), &n).is_err());
    }

    #[test]
    fn table_ray_constants() {
        let cfg = RayConfig::default();
        assert_eq!(cfg.hypothesis_count(), 4);
        let h = cfg.range_hypotheses();
        assert!((h[0].0 - 0.714_285_714_285_714_3).abs() < 1e-12);
        assert!((h[0].1 - 0.214_285_714_285_714_3).abs() < 1e-12);
        let means: Vec<f64> = h.iter().map(|x| x.0).collect();
        for (m, e) in means.iter().zip([0.714_285_7, 2.142_857_1, 6.428_571_4, 19.285_714_3]) {
            assert!((m - e).abs() < 1e-6);
        }
        let last = h.last().unwrap();
        assert!((last.0 + last.1 - 25.071_428_6).abs() < 1e-6);
        assert!(last.0 + last.1 >= cfg.s_max);
        // s_1 - σ_1 = s_min
        assert!((h[0].0 - h[0].1 - cfg.s_min).abs() < 1e-12);
    }

    #[test]
    fn invalid_ray_config() {
        let bad_alpha = RayConfig { alpha: 0.4, ..RayConfig::default() };
        assert!(init_ray(&Pose::new(0.0, 0.0, 0.0), 0.0, 1, &bad_alpha).is_err());
        let bad_beta = RayConfig { beta: 1.0, ..RayConfig::default() };
        assert!(init_ray(&Pose::new(0.0, 0.0, 0.0), 0.0, 1, &bad_beta).is_err());
    }

    #[test]
    fn ray_gaussians_lie_on_the_bearing() {
        let set = init_ray(&Pose::new(1.0, 2.0, 0.3), 0.4, 7, &RayConfig::default()).unwrap();
        assert!((set.weight_sum() - 1.0).abs() < 1e-12);
        for j in 0..set.len() {
            let (mean, cov) = set.gaussian(j, 0.15);
            let d = mean - Vector2::new(1.0, 2.0);
            assert!((d.y.atan2(d.x) - 0.7).abs() < 1e-12);
            assert!((d.norm() - set.hypotheses[j].range).abs() < 1e-12);
            let eig = cov.symmetric_eigenvalues();
            assert!(eig.iter().all(|&l| l > 0.0));
        }
    }

    proptest! {
        #[test]
        fn ray_construction_invariants(
            alpha in 0.01f64..0.3, beta in 1.1f64..6.0, s_min in 0.05f64..5.0, span in 1.5f64..200.0,
        ) {
            let cfg = RayConfig { alpha, beta, s_min, s_max: s_min * span, ..RayConfig::default() };
            let h = cfg.range_hypotheses();
            prop_assert!(!h.is_empty());
            for w in h.windows(2) {
                prop_assert!((w[1].0 / w[0].0 - beta).abs() < 1e-9);
                prop_assert!(w[1].0 > w[0].0);
            }
            for (s, sigma) in &h {
                prop_assert!((sigma / s - alpha).abs() < 1e-12);
            }
            let last = h.last().unwrap();
            prop_assert!(last.0 + last.1 >= cfg.s_max * (1.0 - 1e-12));
        }
    }
}
