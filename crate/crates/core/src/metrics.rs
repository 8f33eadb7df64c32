//! Consistency and accuracy metrics.

use std::collections::BTreeSet;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::angle::wrap_angle;
use crate::error::{Error, Result};
use crate::slam::{LandmarkEstimate, LandmarkStatus};
use crate::world::Pose;

/// Divergence caps on the vehicle NEES.
pub const EKF_NEES_CAP: f64 = 50.0;
pub const FASTSLAM_NEES_CAP: f64 = 2750.0;

/// Estimate minus truth with the bearing wrapped.
pub fn pose_error(estimate: &Pose, truth: &Pose) -> Vector3<f64> {
    Vector3::new(estimate.x - truth.x, estimate.y - truth.y, wrap_angle(estimate.theta - truth.theta))
}

/// Normalized estimation error squared of the vehicle pose. A covariance
/// that is not positive definite yields `+∞`.
pub fn nees(estimate: &Pose, truth: &Pose, cov: &Matrix3<f64>) -> f64 {
    let e = pose_error(estimate, truth);
    match cov.cholesky() {
        Some(c) => {
            let v = e.dot(&c.solve(&e));
            if v.is_finite() && v >= 0.0 {
                v
            } else {
                f64::INFINITY
            }
        }
        None => f64::INFINITY,
    }
}

/// Pointwise mean of equal-length NEES traces.
pub fn anees<T: AsRef<[f64]>>(traces: &[T]) -> Result<Vec<f64>> {
    let Some(first) = traces.first() else {
        return Err(Error::InvalidInput("no runs to average".into()));
    };
    let n = first.as_ref().len();
    if traces.iter().any(|t| t.as_ref().len() != n) {
        return Err(Error::InvalidInput("NEES traces differ in length".into()));
    }
    let m = traces.len() as f64;
    Ok((0..n)
        .map(|k| traces.iter().map(|t| t.as_ref()[k]).sum::<f64>() / m)
        .collect())
}

/// Two-sided probability concentration region of the ANEES over `runs`
/// independent runs of an `dof`-dimensional state at significance `c`.
pub fn chi2_region(runs: usize, dof: usize, c: f64) -> Result<(f64, f64)> {
    if runs == 0 || dof == 0 || !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidInput("chi-square region needs runs, dof ≥ 1 and c in (0, 1)".into()));
    }
    let k = (runs * dof) as f64;
    let dist = ChiSquared::new(k).map_err(|e| Error::Numerical(e.to_string()))?;
    let n = runs as f64;
    Ok((dist.inverse_cdf(c / 2.0) / n, dist.inverse_cdf(1.0 - c / 2.0) / n))
}

/// True when any NEES value exceeds `cap` (non-finite values count).
pub fn gate_divergence(trace: &[f64], cap: f64) -> bool {
    trace.iter().any(|&v| !(v <= cap))
}

/// Position and bearing RMSE over a trajectory.
pub fn rmse_vehicle(estimates: &[Pose], truth: &[Pose]) -> Result<(f64, f64)> {
    if estimates.len() != truth.len() || estimates.is_empty() {
        return Err(Error::InvalidInput("trajectories must be non-empty and equally long".into()));
    }
    let n = estimates.len() as f64;
    let (mut p, mut b) = (0.0, 0.0);
    for (e, t) in estimates.iter().zip(truth) {
        let d = pose_error(e, t);
        p += d.x * d.x + d.y * d.y;
        b += d.z * d.z;
    }
    Ok(((p / n).sqrt(), (b / n).sqrt()))
}

/// Which Full landmarks enter the map RMSE.
#[derive(Clone, Copy, Debug)]
pub enum MapSubset<'a> {
    AllFull,
    /// Only ids in the given set (for example the Full landmarks common to
    /// every strategy on the same world).
    Common(&'a BTreeSet<u32>),
}

/// Map RMSE over Full landmarks, or `None` when none qualify.
pub fn rmse_map(
    estimates: &[LandmarkEstimate],
    truth: impl Fn(u32) -> Option<Vector2<f64>>,
    subset: MapSubset<'_>,
) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for e in estimates.iter().filter(|e| e.status == LandmarkStatus::Full) {
        if let MapSubset::Common(ids) = subset {
            if !ids.contains(&e.id) {
                continue;
            }
        }
        if let Some(t) = truth(e.id) {
            sum += (e.mean - t).norm_squared();
            n += 1;
        }
    }
    (n > 0).then(|| (sum / n as f64).sqrt())
}

/// `(full, total)` landmark counts.
pub fn count_landmarks(estimates: &[LandmarkEstimate]) -> (usize, usize) {
    let full = estimates.iter().filter(|e| e.status == LandmarkStatus::Full).count();
    (full, estimates.len())
}

/// Ids of Full landmarks.
pub fn full_ids(estimates: &[LandmarkEstimate]) -> BTreeSet<u32> {
    estimates
        .iter()
        .filter(|e| e.status == LandmarkStatus::Full)
        .map(|e| e.id)
        .collect()
}

/// Sample mean and (n − 1) standard deviation; `None` for an empty slice.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some((mean, var.sqrt()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalLandmark {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub status: LandmarkStatus,
}

/// Everything recorded about one filter run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub algorithm: String,
    pub strategy: String,
    /// Emitter half-power beamwidth in degrees; absent for passive runs.
    pub hpbw_deg: Option<f64>,
    pub config_hash: String,
    /// NEES at every control step, `k = 1..=N_T`.
    pub nees: Vec<f64>,
    /// Pose error at every control step.
    pub errors: Vec<[f64; 3]>,
    pub landmarks: Vec<FinalLandmark>,
    pub full: usize,
    pub total: usize,
    pub diverged: bool,
    pub rmse_position: f64,
    pub rmse_bearing: f64,
    pub rmse_map: Option<f64>,
    pub skipped_measurements: usize,
}

impl RunResult {
    pub fn final_estimates(&self) -> Vec<LandmarkEstimate> {
        self.landmarks
            .iter()
            .map(|l| LandmarkEstimate {
                id: l.id,
                mean: Vector2::new(l.x, l.y),
                cov: nalgebra::Matrix2::identity(),
                status: l.status,
            })
            .collect()
    }
}
