//! Estimation machinery shared by the EKF and FastSLAM back ends:
//! measurement models and their Jacobians, noise configuration, and landmark
//! initialization (immediate for range-bearing, ray-based for bearing-only).

mod hypothesis;
mod init;

pub use hypothesis::{
    fis_split, gaussian_log_likelihood, normalized_weights, promote_on_active, prune, strongest_hypothesis, update_hypothesis_weights,
    Promotion,
};
pub use init::{active_init_jacobians, init_active, init_ray, RayConfig, RayHypothesis, RayHypothesisSet};

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2};
use serde::{Deserialize, Serialize};

use crate::angle::wrap_angle;
use crate::error::{Error, Result};
use crate::sensing::{Measurement, MeasurementKind};
use crate::world::{ControlInput, Pose};

/// Common interface of the estimators driven by the harness.
pub trait SlamFilter {
    fn predict(&mut self, u: &ControlInput) -> Result<()>;
    /// Incorporates every measurement of one sensing epoch.
    fn correct(&mut self, measurements: &[Measurement]) -> Result<()>;
    fn pose(&self) -> Pose;
    /// Vehicle pose covariance used for consistency checks.
    fn pose_covariance(&self) -> Matrix3<f64>;
    /// Point estimate of every landmark seen so far, in id order.
    fn landmarks(&self) -> Vec<LandmarkEstimate>;
    /// Measurements skipped because an innovation covariance was not SPD.
    fn skipped(&self) -> usize;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LandmarkStatus {
    Full,
    Partial,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkEstimate {
    pub id: u32,
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
    pub status: LandmarkStatus,
}

impl LandmarkEstimate {
    pub fn is_spd(&self) -> bool {
        let sym = (self.cov - self.cov.transpose()).abs().max() < 1e-9;
        sym && self.cov.symmetric_eigenvalues().iter().all(|&l| l > 0.0)
    }
}

/// Filter tuning: measurement noise `R`, control noise `Q` and the initial
/// pose covariance `P₀`, all given as standard deviations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub sigma_range: f64,
    pub sigma_bearing: f64,
    pub sigma_speed: f64,
    pub sigma_steer: f64,
    pub initial_pose_std: [f64; 3],
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma_range: 0.2,
            sigma_bearing: 0.15,
            sigma_speed: 0.1,
            sigma_steer: 0.03,
            initial_pose_std: [0.05, 0.05, 0.0436],
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.sigma_range,
            self.sigma_bearing,
            self.sigma_speed,
            self.sigma_steer,
            self.initial_pose_std[0],
            self.initial_pose_std[1],
            self.initial_pose_std[2],
        ];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config("noise standard deviations must be positive".into()))
        }
    }

    pub fn control_cov(&self) -> Matrix2<f64> {
        Matrix2::new(self.sigma_speed.powi(2), 0.0, 0.0, self.sigma_steer.powi(2))
    }

    pub fn initial_cov(&self) -> Matrix3<f64> {
        let s = self.initial_pose_std;
        Matrix3::from_diagonal(&nalgebra::Vector3::new(s[0] * s[0], s[1] * s[1], s[2] * s[2]))
    }

    pub fn range_bearing_cov(&self) -> Matrix2<f64> {
        Matrix2::new(self.sigma_range.powi(2), 0.0, 0.0, self.sigma_bearing.powi(2))
    }

    pub fn measurement_cov(&self, kind: ModelKind) -> DMatrix<f64> {
        match kind {
            ModelKind::RangeBearing => DMatrix::from_diagonal(&DVector::from_vec(vec![
                self.sigma_range.powi(2),
                self.sigma_bearing.powi(2),
            ])),
            ModelKind::Bearing => DMatrix::from_element(1, 1, self.sigma_bearing.powi(2)),
        }
    }
}

/// Which measurement model applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    RangeBearing,
    Bearing,
}

impl ModelKind {
    pub fn of(z: &Measurement) -> Self {
        match z.kind {
            MeasurementKind::Active { .. } => ModelKind::RangeBearing,
            MeasurementKind::Passive { .. } => ModelKind::Bearing,
        }
    }

    pub fn dim(self) -> usize {
        match self {
            ModelKind::RangeBearing => 2,
            ModelKind::Bearing => 1,
        }
    }
}

fn offset(pose: &Pose, landmark: &Vector2<f64>) -> Result<(f64, f64, f64)> {
    let dx = landmark.x - pose.x;
    let dy = landmark.y - pose.y;
    let q = dx * dx + dy * dy;
    if !(q > 1e-18) {
        return Err(Error::SingularGeometry);
    }
    Ok((dx, dy, q))
}

/// Predicted range and bearing of a landmark.
pub fn predict_active(pose: &Pose, landmark: &Vector2<f64>) -> Result<(f64, f64)> {
    let (dx, dy, q) = offset(pose, landmark)?;
    Ok((q.sqrt(), wrap_angle(dy.atan2(dx) - pose.theta)))
}

/// Predicted bearing of a landmark.
pub fn predict_passive(pose: &Pose, landmark: &Vector2<f64>) -> Result<f64> {
    let (dx, dy, _) = offset(pose, landmark)?;
    Ok(wrap_angle(dy.atan2(dx) - pose.theta))
}

/// Predicted measurement vector for `kind`.
pub fn predict(pose: &Pose, landmark: &Vector2<f64>, kind: ModelKind) -> Result<DVector<f64>> {
    Ok(match kind {
        ModelKind::RangeBearing => {
            let (d, b) = predict_active(pose, landmark)?;
            DVector::from_vec(vec![d, b])
        }
        ModelKind::Bearing => DVector::from_element(1, predict_passive(pose, landmark)?),
    })
}

/// Analytic Jacobians with respect to the pose (`dim × 3`) and to the
/// landmark position (`dim × 2`).
pub fn jacobians(pose: &Pose, landmark: &Vector2<f64>, kind: ModelKind) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (dx, dy, q) = offset(pose, landmark)?;
    let bearing_pose = [dy / q, -dx / q, -1.0];
    let bearing_lm = [-dy / q, dx / q];
    Ok(match kind {
        ModelKind::RangeBearing => {
            let d = q.sqrt();
            (
                DMatrix::from_row_slice(2, 3, &[-dx / d, -dy / d, 0.0, bearing_pose[0], bearing_pose[1], bearing_pose[2]]),
                DMatrix::from_row_slice(2, 2, &[dx / d, dy / d, bearing_lm[0], bearing_lm[1]]),
            )
        }
        ModelKind::Bearing => (
            DMatrix::from_row_slice(1, 3, &bearing_pose),
            DMatrix::from_row_slice(1, 2, &bearing_lm),
        ),
    })
}

/// Measurement as a vector in the layout of [`predict`].
pub fn observation(z: &Measurement) -> DVector<f64> {
    match z.kind {
        MeasurementKind::Active { range, bearing } => DVector::from_vec(vec![range, bearing]),
        MeasurementKind::Passive { bearing } => DVector::from_element(1, bearing),
    }
}

/// `z − ẑ` with the bearing component wrapped.
pub fn residual(z: &DVector<f64>, predicted: &DVector<f64>) -> DVector<f64> {
    let mut v = z - predicted;
    let last = v.len() - 1;
    v[last] = wrap_angle(v[last]);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn p(x: f64, y: f64, t: f64) -> Pose {
        Pose::new(x, y, t)
    }

    #[test]
    fn active_prediction_examples() {
        assert_eq!(predict_active(&p(0.0, 0.0, 0.0), &Vector2::new(1.0, 0.0)).unwrap(), (1.0, 0.0));
        let (d, b) = predict_active(&p(0.0, 0.0, FRAC_PI_2), &Vector2::new(0.0, 2.0)).unwrap();
        assert!((d - 2.0).abs() < 1e-15 && b.abs() < 1e-15);
        let (d, b) = predict_active(&p(1.0, 1.0, 0.0), &Vector2::new(1.0, 2.0)).unwrap();
        assert!((d - 1.0).abs() < 1e-15 && (b - FRAC_PI_2).abs() < 1e-15);
        assert!(matches!(
            predict_active(&p(1.0, 1.0, 0.0), &Vector2::new(1.0, 1.0)),
            Err(Error::SingularGeometry)
        ));
    }

    #[test]
    fn passive_prediction_examples() {
        assert!((predict_passive(&p(0.0, 0.0, 0.0), &Vector2::new(0.0, -1.0)).unwrap() + FRAC_PI_2).abs() < 1e-15);
        assert!(predict_passive(&p(0.0, 0.0, PI), &Vector2::new(-3.0, 0.0)).unwrap().abs() < 1e-15);
    }

    #[test]
    fn jacobian_spot_values() {
        let (hx, _) = jacobians(&p(0.0, 0.0, 0.0), &Vector2::new(1.0, 0.0), ModelKind::RangeBearing).unwrap();
        assert_eq!(hx[(0, 0)], -1.0);
        assert_eq!(hx[(1, 2)], -1.0);
        let (hx, _) = jacobians(&p(3.0, -1.0, 2.0), &Vector2::new(-4.0, 5.0), ModelKind::Bearing).unwrap();
        assert_eq!(hx[(0, 2)], -1.0);
    }

    #[test]
    fn residual_wraps_bearing() {
        let z = DVector::from_vec(vec![1.0, PI - 0.01]);
        let zhat = DVector::from_vec(vec![0.5, -PI + 0.01]);
        let v = residual(&z, &zhat);
        assert!((v[0] - 0.5).abs() < 1e-15);
        assert!((v[1] + 0.02).abs() < 1e-12);
    }
}
