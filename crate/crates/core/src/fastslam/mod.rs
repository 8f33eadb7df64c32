//! FastSLAM 2.0: particles carry a pose sample and one small EKF per
//! landmark (or per range hypothesis while a landmark is only known by
//! bearing).
//!
//! Every call to [`SlamFilter::correct`] samples a new pose for each particle
//! from the measurement-informed proposal, weights it, corrects the landmark
//! filters at the sampled pose and resamples when the effective sample size
//! falls below the configured fraction.

mod resample;

pub use resample::{effective_sample_size, stratified_resample};

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::angle::{circular_mean, wrap_angle};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::sensing::Measurement;
use crate::slam::{
    fis_split, gaussian_log_likelihood, init_active, init_ray, jacobians, observation, predict,
    promote_on_active, prune, residual, strongest_hypothesis, update_hypothesis_weights, LandmarkEstimate,
    LandmarkStatus, ModelKind, NoiseConfig, RayConfig, RayHypothesisSet, SlamFilter,
};
use crate::world::{motion_jacobians, propagate, ControlInput, Pose};
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FastSlamConfig {
    pub particles: usize,
    /// Resample when `N_eff < resample_fraction · particles`.
    pub resample_fraction: f64,
}

impl Default for FastSlamConfig {
    fn default() -> Self {
        Self {
            particles: 100,
            resample_fraction: 0.75,
        }
    }
}

impl FastSlamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::Config("at least one particle is required".into()));
        }
        if !(self.resample_fraction > 0.0 && self.resample_fraction <= 1.0) {
            return Err(Error::Config("resample_fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gaussian2 {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
}

/// A particle's belief about one landmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ParticleLandmark {
    Full(Gaussian2),
    Partial {
        rays: RayHypothesisSet,
        gaussians: Vec<Gaussian2>,
    },
}

impl ParticleLandmark {
    pub fn entries(&self) -> usize {
        match self {
            ParticleLandmark::Full(_) => 1,
            ParticleLandmark::Partial { gaussians, .. } => gaussians.len(),
        }
    }

    /// The full estimate, or the heaviest hypothesis.
    pub fn dominant(&self) -> &Gaussian2 {
        match self {
            ParticleLandmark::Full(g) => g,
            ParticleLandmark::Partial { rays, gaussians } => &gaussians[strongest_hypothesis(rays)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub pose: Pose,
    /// Covariance of the predicted pose since the last sample.
    pub pose_cov: Matrix3<f64>,
    pub weight: f64,
    pub landmarks: BTreeMap<u32, ParticleLandmark>,
}

/// One Full-landmark observation used by the proposal.
#[derive(Clone, Debug)]
pub struct ProposalTerm {
    pub z: DVector<f64>,
    pub kind: ModelKind,
    pub landmark: Gaussian2,
}

fn to_d(m: &Matrix2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(2, 2, |i, j| m[(i, j)])
}

fn to_d3(m: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(3, 3, |i, j| m[(i, j)])
}

fn symmetric3(m: Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}

/// Measurement-informed pose proposal: the observations of known landmarks
/// are folded into the predicted pose Gaussian one at a time, relinearizing
/// at the running mean.
pub fn proposal(mean: &Pose, cov: &Matrix3<f64>, terms: &[ProposalTerm], noise: &NoiseConfig) -> Result<(Pose, Matrix3<f64>)> {
    let mut mu = *mean;
    let mut sigma = to_d3(cov);
    for t in terms {
        let zhat = predict(&mu, &t.landmark.mean, t.kind)?;
        let (hx, hm) = jacobians(&mu, &t.landmark.mean, t.kind)?;
        let sf = &hm * to_d(&t.landmark.cov) * hm.transpose() + noise.measurement_cov(t.kind);
        let s = &hx * &sigma * hx.transpose() + sf;
        let chol = s.cholesky().ok_or_else(|| Error::Numerical("proposal innovation not SPD".into()))?;
        let sht = &sigma * hx.transpose();
        let k = chol.solve(&sht.transpose()).transpose();
        let dx = &k * residual(&t.z, &zhat);
        mu = Pose::new(mu.x + dx[0], mu.y + dx[1], mu.theta + dx[2]);
        sigma -= &k * sht.transpose();
        sigma = (&sigma + sigma.transpose()) * 0.5;
    }
    Ok((mu, Matrix3::from_fn(|i, j| sigma[(i, j)])))
}

/// Log of the importance weight factor of a Full-landmark observation:
/// `N(z − h(x̄, m); 0, Hx·P̄·Hxᵀ + Hm·Pm·Hmᵀ + R)` at the predicted pose.
pub fn observation_log_likelihood(
    pose: &Pose,
    pose_cov: &Matrix3<f64>,
    z: &DVector<f64>,
    kind: ModelKind,
    landmark: &Gaussian2,
    noise: &NoiseConfig,
) -> Result<f64> {
    let zhat = predict(pose, &landmark.mean, kind)?;
    let (hx, hm) = jacobians(pose, &landmark.mean, kind)?;
    let l = &hx * to_d3(pose_cov) * hx.transpose() + &hm * to_d(&landmark.cov) * hm.transpose() + noise.measurement_cov(kind);
    gaussian_log_likelihood(&residual(z, &zhat), &l)
}

/// EKF correction of a single landmark Gaussian at a known pose.
pub fn landmark_update(pose: &Pose, z: &DVector<f64>, kind: ModelKind, g: &Gaussian2, r: &DMatrix<f64>) -> Result<Gaussian2> {
    let zhat = predict(pose, &g.mean, kind)?;
    let (_, hm) = jacobians(pose, &g.mean, kind)?;
    let p = to_d(&g.cov);
    let pht = &p * hm.transpose();
    let s = &hm * &pht + r;
    let chol = s.cholesky().ok_or_else(|| Error::Numerical("landmark innovation not SPD".into()))?;
    let k = chol.solve(&pht.transpose()).transpose();
    let dm = &k * residual(z, &zhat);
    let p = &p - &k * pht.transpose();
    let cov = Matrix2::from_fn(|i, j| 0.5 * (p[(i, j)] + p[(j, i)]));
    Ok(Gaussian2 {
        mean: g.mean + Vector2::new(dm[0], dm[1]),
        cov,
    })
}

fn sample_pose<R: rand::Rng>(mean: &Pose, cov: &Matrix3<f64>, rng: &mut R) -> Pose {
    let e = Vector3::from_fn(|_, _| StandardNormal.sample(rng));
    if cov.iter().all(|v| *v == 0.0) {
        return *mean;
    }
    let d = match cov.cholesky() {
        Some(c) => c.l() * e,
        None => {
            let eig = cov.symmetric_eigen();
            let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
            eig.eigenvectors * Matrix3::from_diagonal(&sqrt) * e
        }
    };
    Pose::new(mean.x + d[0], mean.y + d[1], mean.theta + d[2])
}

#[derive(Clone, Debug)]
pub struct FastSlam {
    particles: Vec<Particle>,
    noise: NoiseConfig,
    ray: RayConfig,
    cfg: FastSlamConfig,
    wheelbase: f64,
    rng: SimRng,
    neff: Vec<f64>,
    resamples: usize,
    skipped: usize,
}

impl FastSlam {
    pub fn new(initial: Pose, noise: NoiseConfig, ray: RayConfig, cfg: FastSlamConfig, wheelbase: f64, seed: u64) -> Result<Self> {
        noise.validate()?;
        ray.validate()?;
        cfg.validate()?;
        let mut rng = SimRng::seed_from_u64(seed);
        let p0 = noise.initial_cov();
        let w = 1.0 / cfg.particles as f64;
        let particles = (0..cfg.particles)
            .map(|_| Particle {
                pose: sample_pose(&initial, &p0, &mut rng),
                pose_cov: Matrix3::zeros(),
                weight: w,
                landmarks: BTreeMap::new(),
            })
            .collect();
        Ok(Self {
            particles,
            noise,
            ray,
            cfg,
            wheelbase,
            rng,
            neff: Vec::new(),
            resamples: 0,
            skipped: 0,
        })
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    /// Effective sample size after each weighting pass.
    pub fn neff_log(&self) -> &[f64] {
        &self.neff
    }

    pub fn resample_count(&self) -> usize {
        self.resamples
    }

    fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.weight).collect()
    }

    /// Samples, weights (log factor) and corrects one particle.
    fn process(
        p: &mut Particle,
        zs: &[Measurement],
        noise: &NoiseConfig,
        ray: &RayConfig,
        rng: &mut SimRng,
        skipped: &mut usize,
    ) -> Result<f64> {
        let terms: Vec<ProposalTerm> = zs
            .iter()
            .filter_map(|z| match p.landmarks.get(&z.id) {
                Some(ParticleLandmark::Full(g)) => Some(ProposalTerm {
                    z: observation(z),
                    kind: ModelKind::of(z),
                    landmark: *g,
                }),
                _ => None,
            })
            .collect();
        let (mu, sigma) = match proposal(&p.pose, &p.pose_cov, &terms, noise) {
            Ok(v) => v,
            Err(Error::Numerical(_)) | Err(Error::SingularGeometry) => {
                *skipped += 1;
                (p.pose, p.pose_cov)
            }
            Err(e) => return Err(e),
        };

        let mut log_w = 0.0;
        for z in zs {
            let kind = ModelKind::of(z);
            let zv = observation(z);
            let term = match p.landmarks.get(&z.id) {
                Some(ParticleLandmark::Full(g)) => observation_log_likelihood(&p.pose, &p.pose_cov, &zv, kind, g, noise),
                Some(ParticleLandmark::Partial { rays, gaussians }) => {
                    let mut best = f64::NEG_INFINITY;
                    let logs = gaussians
                        .iter()
                        .zip(&rays.hypotheses)
                        .map(|(g, h)| {
                            observation_log_likelihood(&p.pose, &p.pose_cov, &zv, kind, g, noise).map(|l| {
                                let v = h.weight.ln() + l;
                                best = best.max(v);
                                v
                            })
                        })
                        .collect::<Result<Vec<f64>>>();
                    logs.map(|ls| best + ls.iter().map(|v| (v - best).exp()).sum::<f64>().ln())
                }
                None => Ok(0.0),
            };
            match term {
                Ok(l) => log_w += l,
                Err(Error::Numerical(_)) | Err(Error::SingularGeometry) => *skipped += 1,
                Err(e) => return Err(e),
            }
        }

        p.pose = sample_pose(&mu, &sigma, rng);
        p.pose_cov = Matrix3::zeros();

        for z in zs {
            match Self::correct_landmark(p, z, noise, ray) {
                Ok(()) => {}
                Err(Error::Numerical(_)) | Err(Error::SingularGeometry) => *skipped += 1,
                Err(e) => return Err(e),
            }
        }
        Ok(log_w)
    }

    fn correct_landmark(p: &mut Particle, z: &Measurement, noise: &NoiseConfig, ray: &RayConfig) -> Result<()> {
        let kind = ModelKind::of(z);
        let zv = observation(z);
        let r = noise.measurement_cov(kind);
        let pose = p.pose;
        let Some(entry) = p.landmarks.get_mut(&z.id) else {
            let lm = if z.is_active() {
                let e = init_active(&pose, z, noise)?;
                ParticleLandmark::Full(Gaussian2 { mean: e.mean, cov: e.cov })
            } else {
                let rays = init_ray(&pose, z.bearing(), z.id, ray)?;
                let gaussians = (0..rays.len())
                    .map(|j| {
                        let (mean, cov) = rays.gaussian(j, noise.sigma_bearing);
                        Gaussian2 { mean, cov }
                    })
                    .collect();
                ParticleLandmark::Partial { rays, gaussians }
            };
            p.landmarks.insert(z.id, lm);
            return Ok(());
        };
        match entry {
            ParticleLandmark::Full(g) => {
                *g = landmark_update(&pose, &zv, kind, g, &r)?;
            }
            ParticleLandmark::Partial { rays, gaussians } => {
                if z.is_active() {
                    let promo = promote_on_active(rays, &pose, z)?;
                    let g = Gaussian2 {
                        mean: promo.mean,
                        cov: gaussians[promo.kept].cov,
                    };
                    *entry = ParticleLandmark::Full(g);
                    if let ParticleLandmark::Full(g) = entry {
                        *g = landmark_update(&pose, &zv, kind, g, &r)?;
                    }
                    return Ok(());
                }
                let mut nus = Vec::with_capacity(gaussians.len());
                let mut ss = Vec::with_capacity(gaussians.len());
                for g in gaussians.iter() {
                    let zhat = predict(&pose, &g.mean, kind)?;
                    let (_, hm) = jacobians(&pose, &g.mean, kind)?;
                    nus.push(residual(&zv, &zhat));
                    ss.push(&hm * to_d(&g.cov) * hm.transpose() + &r);
                }
                let mut set = rays.clone();
                let rho = update_hypothesis_weights(&mut set, &nus, &ss, ray.likelihood_exponent)?;
                let mut updated = gaussians.clone();
                for (j, rj) in fis_split(&r, &rho).into_iter().enumerate() {
                    if let Some(rj) = rj {
                        updated[j] = landmark_update(&pose, &zv, kind, &gaussians[j], &rj)?;
                    }
                }
                let kept = prune(&mut set, ray.prune_tau);
                let gs: Vec<Gaussian2> = kept.iter().map(|&j| updated[j]).collect();
                *entry = if gs.len() == 1 {
                    ParticleLandmark::Full(gs[0])
                } else {
                    ParticleLandmark::Partial { rays: set, gaussians: gs }
                };
            }
        }
        Ok(())
    }

    fn resample(&mut self) -> Result<()> {
        let idx = stratified_resample(&self.weights(), &mut self.rng)?;
        let w = 1.0 / self.particles.len() as f64;
        self.particles = idx
            .into_iter()
            .map(|i| {
                let mut p = self.particles[i].clone();
                p.weight = w;
                p
            })
            .collect();
        self.resamples += 1;
        Ok(())
    }

    /// Weighted share of particles holding landmark `id` as Full.
    pub fn full_fraction(&self, id: u32) -> f64 {
        self.particles
            .iter()
            .filter(|p| matches!(p.landmarks.get(&id), Some(ParticleLandmark::Full(_))))
            .map(|p| p.weight)
            .sum()
    }
}

impl SlamFilter for FastSlam {
    fn predict(&mut self, u: &ControlInput) -> Result<()> {
        let q = self.noise.control_cov();
        for p in &mut self.particles {
            let (f, g) = motion_jacobians(&p.pose, u, self.wheelbase);
            p.pose = propagate(&p.pose, u, self.wheelbase)?;
            p.pose_cov = symmetric3(f * p.pose_cov * f.transpose() + g * q * g.transpose());
        }
        Ok(())
    }

    fn correct(&mut self, measurements: &[Measurement]) -> Result<()> {
        let mut logs = Vec::with_capacity(self.particles.len());
        for p in &mut self.particles {
            let l = Self::process(p, measurements, &self.noise, &self.ray, &mut self.rng, &mut self.skipped)?;
            logs.push(p.weight.ln() + l);
        }
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::DegenerateWeights);
        }
        let e: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let sum: f64 = e.iter().sum();
        for (p, w) in self.particles.iter_mut().zip(e) {
            p.weight = w / sum;
        }
        let neff = effective_sample_size(&self.weights());
        self.neff.push(neff);
        if neff < self.cfg.resample_fraction * self.particles.len() as f64 {
            self.resample()?;
        }
        Ok(())
    }

    fn pose(&self) -> Pose {
        let (mut x, mut y) = (0.0, 0.0);
        for p in &self.particles {
            x += p.weight * p.pose.x;
            y += p.weight * p.pose.y;
        }
        let theta = circular_mean(self.particles.iter().map(|p| (p.pose.theta, p.weight)));
        Pose::new(x, y, theta)
    }

    /// Weighted sample covariance of the particle poses.
    fn pose_covariance(&self) -> Matrix3<f64> {
        let mean = self.pose();
        let mut c = Matrix3::zeros();
        for p in &self.particles {
            let d = Vector3::new(p.pose.x - mean.x, p.pose.y - mean.y, wrap_angle(p.pose.theta - mean.theta));
            c += p.weight * d * d.transpose();
        }
        c
    }

    /// Per landmark: Full when particles holding it as Full carry at least
    /// half the weight, with mean and covariance mixed over those particles;
    /// otherwise Partial, mixed over every particle's dominant hypothesis.
    fn landmarks(&self) -> Vec<LandmarkEstimate> {
        let Some(first) = self.particles.first() else {
            return Vec::new();
        };
        let ids: Vec<u32> = first.landmarks.keys().copied().collect();
        let mut out = Vec::with_capacity(ids.len());
        for id in ids {
            let full = self.full_fraction(id) >= 0.5;
            let members: Vec<(f64, &Gaussian2)> = self
                .particles
                .iter()
                .filter_map(|p| {
                    let lm = p.landmarks.get(&id)?;
                    match (full, lm) {
                        (true, ParticleLandmark::Full(g)) => Some((p.weight, g)),
                        (true, _) => None,
                        (false, lm) => Some((p.weight, lm.dominant())),
                    }
                })
                .collect();
            let total: f64 = members.iter().map(|m| m.0).sum();
            if !(total > 0.0) {
                continue;
            }
            let mean = members.iter().fold(Vector2::zeros(), |a, (w, g)| a + g.mean * (*w / total));
            let cov = members.iter().fold(Matrix2::zeros(), |a, (w, g)| {
                let d = g.mean - mean;
                a + (g.cov + d * d.transpose()) * (*w / total)
            });
            out.push(LandmarkEstimate {
                id,
                mean,
                cov,
                status: if full { LandmarkStatus::Full } else { LandmarkStatus::Partial },
            });
        }
        out
    }

    fn skipped(&self) -> usize {
        self.skipped
    }
}
