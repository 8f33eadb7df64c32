use nalgebra::{DMatrix, DVector, Vector2};

use super::RayHypothesisSet;
use crate::error::{Error, Result};
use crate::sensing::{Measurement, MeasurementKind};
use crate::world::Pose;

/// Log density of a zero-mean Gaussian with covariance `s` at `innovation`.
pub fn gaussian_log_likelihood(innovation: &DVector<f64>, s: &DMatrix<f64>) -> Result<f64> {
    let chol = s.clone().cholesky().ok_or(Error::Numerical("innovation covariance is not SPD".into()))?;
    let m = innovation.len() as f64;
    let maha = innovation.dot(&chol.solve(innovation));
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok(-0.5 * (maha + log_det + m * (2.0 * std::f64::consts::PI).ln()))
}

fn softmax(logs: &[f64]) -> Vec<f64> {
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![0.0; logs.len()];
    }
    let e: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = e.iter().sum();
    e.into_iter().map(|x| x / sum).collect()
}

/// Per-measurement hypothesis weights `ρ_j ∝ λ_j^n` from log likelihoods.
pub fn normalized_weights(log_likelihoods: &[f64], exponent: f64) -> Vec<f64> {
    softmax(&log_likelihoods.iter().map(|l| exponent * l).collect::<Vec<_>>())
}

/// Scores one measurement against every hypothesis of `set`.
///
/// `innovations[j]` and `covariances[j]` are the innovation and its
/// covariance for hypothesis `j`. Returns the per-measurement weights
/// `ρ_j ∝ λ_j^n` and folds `λ_j` into the set's aggregated likelihoods
/// (renormalized to sum to one). All arithmetic stays in the log domain.
pub fn update_hypothesis_weights(
    set: &mut RayHypothesisSet,
    innovations: &[DVector<f64>],
    covariances: &[DMatrix<f64>],
    exponent: f64,
) -> Result<Vec<f64>> {
    let n = set.len();
    if innovations.len() != n || covariances.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} hypotheses but {} innovations and {} covariances",
            n,
            innovations.len(),
            covariances.len()
        )));
    }
    let log_lambda = innovations
        .iter()
        .zip(covariances)
        .map(|(v, s)| gaussian_log_likelihood(v, s))
        .collect::<Result<Vec<f64>>>()?;
    let rho = normalized_weights(&log_lambda, exponent);
    let posterior: Vec<f64> = set
        .hypotheses
        .iter()
        .zip(&log_lambda)
        .map(|(h, l)| h.weight.ln() + l)
        .collect();
    let post = softmax(&posterior);
    if post.iter().all(|&w| w == 0.0) {
        return Err(Error::DegenerateWeights);
    }
    for (h, w) in set.hypotheses.iter_mut().zip(post) {
        h.weight = w;
    }
    Ok(rho)
}

/// Splits a measurement noise covariance across hypotheses so that the
/// information added by the partial updates sums to that of one full update:
/// hypothesis `j` sees `R/ρ_j`. Zero weights yield `None` (no update).
pub fn fis_split(r: &DMatrix<f64>, weights: &[f64]) -> Vec<Option<DMatrix<f64>>> {
    weights
        .iter()
        .map(|&w| if w > 0.0 { Some(r / w) } else { None })
        .collect()
}

/// Index of the heaviest hypothesis, lowest index on ties.
pub fn strongest_hypothesis(set: &RayHypothesisSet) -> usize {
    let mut best = 0;
    for (j, h) in set.hypotheses.iter().enumerate() {
        if h.weight > set.hypotheses[best].weight {
            best = j;
        }
    }
    best
}

/// Removes hypotheses whose aggregated likelihood is below `tau / N`, where
/// `N` is the current count, keeping at least the strongest one. Surviving
/// weights are renormalized. Returns the original indices of the survivors.
pub fn prune(set: &mut RayHypothesisSet, tau: f64) -> Vec<usize> {
    if set.is_empty() {
        return Vec::new();
    }
    let floor = tau / set.len() as f64;
    let best = strongest_hypothesis(set);
    let keep: Vec<usize> = (0..set.len())
        .filter(|&j| j == best || set.hypotheses[j].weight >= floor)
        .collect();
    set.hypotheses = keep.iter().map(|&j| set.hypotheses[j]).collect();
    let sum = set.weight_sum();
    for h in &mut set.hypotheses {
        h.weight /= sum;
    }
    keep
}

/// Outcome of an active observation of a partially initialized landmark.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Promotion {
    /// Index of the hypothesis that survives as the full estimate.
    pub kept: usize,
    /// Its new mean, placed at the measured range along the measured bearing.
    pub mean: Vector2<f64>,
}

/// Collapses a hypothesis set on its first range measurement: the heaviest
/// hypothesis is kept and repositioned at the measured range, the others are
/// discarded by the caller.
pub fn promote_on_active(set: &RayHypothesisSet, pose: &Pose, z: &Measurement) -> Result<Promotion> {
    if z.id != set.id {
        return Err(Error::Association(format!("measurement of {} applied to landmark {}", z.id, set.id)));
    }
    let MeasurementKind::Active { range, bearing } = z.kind else {
        return Err(Error::InvalidInput("promotion needs an active measurement".into()));
    };
    if set.is_empty() {
        return Err(Error::InvalidInput("empty hypothesis set".into()));
    }
    let (s, c) = (pose.theta + bearing).sin_cos();
    Ok(Promotion {
        kept: strongest_hypothesis(set),
        mean: pose.position() + Vector2::new(c, s) * range,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slam::{init_ray, RayConfig, RayHypothesis};
    use proptest::prelude::*;

    fn set_with(weights: &[f64]) -> RayHypothesisSet {
        RayHypothesisSet {
            id: 3,
            origin: Pose::new(0.0, 0.0, 0.0),
            bearing: 0.0,
            hypotheses: weights
                .iter()
                .enumerate()
                .map(|(j, &w)| RayHypothesis { range: 1.0 + j as f64, std: 0.3, weight: w })
                .collect(),
        }
    }

    #[test]
    fn log_likelihood_matches_closed_form() {
        let v = DVector::from_vec(vec![0.3]);
        let s = DMatrix::from_element(1, 1, 0.04);
        let expect = (-0.5f64 * 0.09 / 0.04).exp() / (2.0 * std::f64::consts::PI * 0.04).sqrt();
        assert!((gaussian_log_likelihood(&v, &s).unwrap() - expect.ln()).abs() < 1e-12);
    }

    #[test]
    fn weights_survive_tiny_likelihoods() {
        let mut set = set_with(&[0.25; 4]);
        let v: Vec<_> = [30.0, 31.0, 32.0, 33.0].iter().map(|&x| DVector::from_element(1, x)).collect();
        let s = vec![DMatrix::from_element(1, 1, 0.01); 4];
        let rho = update_hypothesis_weights(&mut set, &v, &s, 1.0).unwrap();
        assert!((rho.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((rho[0] - 1.0).abs() < 1e-12);
        assert!((set.weight_sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exponent_sharpens() {
        let mut a = set_with(&[0.5, 0.5]);
        let mut b = a.clone();
        let v = vec![DVector::from_element(1, 0.1), DVector::from_element(1, 0.2)];
        let s = vec![DMatrix::from_element(1, 1, 0.02); 2];
        let r1 = update_hypothesis_weights(&mut a, &v, &s, 1.0).unwrap();
        let r3 = update_hypothesis_weights(&mut b, &v, &s, 3.0).unwrap();
        assert!(r3[0] > r1[0]);
        assert_eq!(a, b);
    }

    #[test]
    fn prune_keeps_boundary_and_strongest() {
        // N = 4, tau = 0.4: floor 0.1
        let mut set = set_with(&[0.1, 0.05, 0.8, 0.05]);
        assert_eq!(prune(&mut set, 0.4), vec![0, 2]);
        assert!((set.weight_sum() - 1.0).abs() < 1e-15);
        let mut set = set_with(&[0.3, 0.3, 0.3, 0.1]);
        assert_eq!(prune(&mut set, 0.99), vec![0, 1, 2]);
        let mut set = set_with(&[0.25; 4]);
        assert_eq!(prune(&mut set, 0.999), vec![0, 1, 2, 3]);
    }

    #[test]
    fn promotion_uses_measured_range() {
        let set = set_with(&[0.2, 0.7, 0.1]);
        let pose = Pose::new(1.0, 1.0, std::f64::consts::FRAC_PI_2);
        let p = promote_on_active(&set, &pose, &Measurement::active(5, 3, 2.0, 0.0)).unwrap();
        assert_eq!(p.kept, 1);
        assert!((p.mean - Vector2::new(1.0, 3.0)).norm() < 1e-12);
        assert!(promote_on_active(&set, &pose, &Measurement::active(5, 4, 2.0, 0.0)).is_err());
        assert!(promote_on_active(&set, &pose, &Measurement::passive(5, 3, 0.0)).is_err());
    }

    proptest! {
        #[test]
        fn fis_information_identity(ws in proptest::collection::vec(0.0f64..1.0, 1..8), r in 0.001f64..1.0) {
            let sum: f64 = ws.iter().sum();
            prop_assume!(sum > 1e-6);
            let w: Vec<f64> = ws.iter().map(|x| x / sum).collect();
            let big_r = DMatrix::from_element(1, 1, r);
            let info: f64 = fis_split(&big_r, &w).iter().flatten().map(|m| 1.0 / m[(0, 0)]).sum();
            prop_assert!((info - 1.0 / r).abs() <= 1e-12 * (1.0 / r));
        }

        #[test]
        fn weight_update_stays_normalized(
            vs in proptest::collection::vec(-3.0f64..3.0, 4), sig in 0.01f64..2.0, n in 0.5f64..4.0,
        ) {
            let mut set = init_ray(&Pose::new(0.0, 0.0, 0.0), 0.0, 1, &RayConfig::default()).unwrap();
            let v: Vec<_> = vs.iter().map(|&x| DVector::from_element(1, x)).collect();
            let s = vec![DMatrix::from_element(1, 1, sig * sig); 4];
            let rho = update_hypothesis_weights(&mut set, &v, &s, n).unwrap();
            prop_assert!((rho.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!((set.weight_sum() - 1.0).abs() < 1e-12);
            prop_assert!(set.hypotheses.iter().all(|h| h.weight >= 0.0));
        }

        #[test]
        fn prune_never_empties(ws in proptest::collection::vec(0.0f64..1.0, 1..8), tau in 0.01f64..0.99) {
            let sum: f64 = ws.iter().sum();
            prop_assume!(sum > 1e-9);
            let w: Vec<f64> = ws.iter().map(|x| x / sum).collect();
            let mut set = set_with(&w);
            let before = set.len();
            let kept = prune(&mut set, tau);
            prop_assert!(!kept.is_empty() && kept.len() <= before);
            prop_assert!((set.weight_sum() - 1.0).abs() < 1e-12);
        }
    }
}
