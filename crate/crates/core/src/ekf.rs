//! EKF-SLAM over the joint vehicle and map Gaussian.
//!
//! The state is `[x, y, θ | m₁ | m₂ | …]` where every landmark owns one 2-D
//! block once fully initialized, or one block per surviving range hypothesis
//! while it is only known by bearing. Corrections are applied one measurement
//! at a time. Within an epoch every linearization uses the prior estimate,
//! which makes the sequential result identical to a single batch update.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2};
use serde::{Deserialize, Serialize};

use crate::angle::wrap_angle;
use crate::error::{Error, Result};
use crate::sensing::{Measurement, MeasurementKind};
use crate::slam::{
    active_init_jacobians, fis_split, init_ray, jacobians, observation, predict, promote_on_active, prune,
    residual, strongest_hypothesis, update_hypothesis_weights, LandmarkEstimate, LandmarkStatus, ModelKind,
    NoiseConfig, RayConfig, RayHypothesisSet, SlamFilter,
};
use crate::world::{motion_jacobians, propagate, ControlInput, Pose};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Layout record of one landmark in the joint state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub id: u32,
    pub status: LandmarkStatus,
    /// Number of 2-D blocks: 1 when Full, one per hypothesis when Partial.
    pub blocks: usize,
    pub rays: Option<RayHypothesisSet>,
}

/// Serialized filter state: mean, packed lower triangle of the covariance
/// (row-major) and the landmark registry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EkfCheckpoint {
    pub version: u32,
    pub state: Vec<f64>,
    pub cov_lower: Vec<f64>,
    pub registry: Vec<RegistryEntry>,
}

struct Innovation {
    nu: DVector<f64>,
    pht: DMatrix<f64>,
    s: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct Ekf {
    state: DVector<f64>,
    cov: DMatrix<f64>,
    registry: Vec<RegistryEntry>,
    noise: NoiseConfig,
    ray: RayConfig,
    wheelbase: f64,
    skipped: usize,
}

impl Ekf {
    pub fn new(initial: Pose, noise: NoiseConfig, ray: RayConfig, wheelbase: f64) -> Result<Self> {
        noise.validate()?;
        ray.validate()?;
        if !(wheelbase > 0.0) {
            return Err(Error::Config("wheelbase must be positive".into()));
        }
        let cov = DMatrix::from_fn(3, 3, |i, j| noise.initial_cov()[(i, j)]);
        Ok(Self {
            state: DVector::from_vec(vec![initial.x, initial.y, initial.theta]),
            cov,
            registry: Vec::new(),
            noise,
            ray,
            wheelbase,
            skipped: 0,
        })
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.state
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn registry(&self) -> &[RegistryEntry] {
        &self.registry
    }

    pub fn dim(&self) -> usize {
        self.state.len()
    }

    /// State offset and registry index of landmark `id`.
    pub fn locate(&self, id: u32) -> Option<(usize, usize)> {
        let mut off = 3;
        for (i, e) in self.registry.iter().enumerate() {
            if e.id == id {
                return Some((off, i));
            }
            off += 2 * e.blocks;
        }
        None
    }

    pub fn full_count(&self) -> usize {
        self.registry.iter().filter(|e| e.status == LandmarkStatus::Full).count()
    }

    fn block(v: &DVector<f64>, off: usize) -> Vector2<f64> {
        Vector2::new(v[off], v[off + 1])
    }

    fn pose_of(v: &DVector<f64>) -> Pose {
        Pose::new(v[0], v[1], v[2])
    }

    fn symmetrize(&mut self) {
        let t = self.cov.transpose();
        self.cov = (&self.cov + t) * 0.5;
    }

    /// Innovation of `z` against the block at `off`, linearized at `lin`.
    fn innovation(
        &self,
        lin: &DVector<f64>,
        off: usize,
        z: &DVector<f64>,
        kind: ModelKind,
        r: &DMatrix<f64>,
    ) -> Result<Innovation> {
        let lin_pose = Self::pose_of(lin);
        let lin_lm = Self::block(lin, off);
        let zhat = predict(&lin_pose, &lin_lm, kind)?;
        let (hx, hm) = jacobians(&lin_pose, &lin_lm, kind)?;
        let mut dpose = self.state.rows(0, 3).clone_owned() - lin.rows(0, 3);
        dpose[2] = wrap_angle(dpose[2]);
        let dlm = self.state.rows(off, 2) - lin.rows(off, 2);
        let nu = residual(z, &zhat) - &hx * dpose - &hm * dlm;
        let pht = self.cov.columns(0, 3) * hx.transpose() + self.cov.columns(off, 2) * hm.transpose();
        let s = &hx * pht.rows(0, 3) + &hm * pht.rows(off, 2) + r;
        Ok(Innovation { nu, pht, s })
    }

    fn apply(&mut self, inn: Innovation) -> Result<()> {
        let chol = inn
            .s
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("innovation covariance is not SPD".into()))?;
        let k = chol.solve(&inn.pht.transpose()).transpose();
        self.state += &k * &inn.nu;
        self.state[2] = wrap_angle(self.state[2]);
        self.cov -= &k * inn.pht.transpose();
        self.symmetrize();
        Ok(())
    }

    fn update_block(&mut self, lin: &DVector<f64>, off: usize, z: &DVector<f64>, kind: ModelKind, r: &DMatrix<f64>) -> Result<()> {
        let inn = self.innovation(lin, off, z, kind, r)?;
        self.apply(inn)
    }

    /// Appends `means` as new blocks whose covariance is the pose uncertainty
    /// mapped through `g_pose` plus the independent `local` term.
    fn augment(&mut self, lin: &mut DVector<f64>, blocks: &[(Vector2<f64>, nalgebra::Matrix2x3<f64>, Matrix2<f64>)]) {
        let n = self.dim();
        let add = 2 * blocks.len();
        let pxx = self.cov.view((0, 0), (3, 3)).clone_owned();
        let px_all = self.cov.rows(0, 3).clone_owned();
        let mut cov = DMatrix::zeros(n + add, n + add);
        cov.view_mut((0, 0), (n, n)).copy_from(&self.cov);
        let gs: Vec<DMatrix<f64>> = blocks
            .iter()
            .map(|(_, g, _)| DMatrix::from_fn(2, 3, |i, j| g[(i, j)]))
            .collect();
        for (a, (_, _, local)) in blocks.iter().enumerate() {
            let ra = n + 2 * a;
            let cross = &gs[a] * &px_all;
            cov.view_mut((ra, 0), (2, n)).copy_from(&cross);
            cov.view_mut((0, ra), (n, 2)).copy_from(&cross.transpose());
            for b in 0..blocks.len() {
                let rb = n + 2 * b;
                let mut blk = &gs[a] * &pxx * gs[b].transpose();
                if a == b {
                    blk += DMatrix::from_fn(2, 2, |i, j| local[(i, j)]);
                }
                cov.view_mut((ra, rb), (2, 2)).copy_from(&blk);
            }
        }
        let mut state = DVector::zeros(n + add);
        state.rows_mut(0, n).copy_from(&self.state);
        let mut new_lin = DVector::zeros(n + add);
        new_lin.rows_mut(0, n).copy_from(lin);
        for (a, (m, _, _)) in blocks.iter().enumerate() {
            state.rows_mut(n + 2 * a, 2).copy_from(m);
            new_lin.rows_mut(n + 2 * a, 2).copy_from(m);
        }
        self.state = state;
        self.cov = cov;
        *lin = new_lin;
        self.symmetrize();
    }

    fn remove_block(&mut self, lin: &mut DVector<f64>, off: usize) {
        self.state = self.state.clone().remove_rows(off, 2);
        *lin = lin.clone().remove_rows(off, 2);
        self.cov = self.cov.clone().remove_rows(off, 2).remove_columns(off, 2);
    }

    /// Adds an unseen landmark from `z` at the current estimate.
    pub fn init_landmark(&mut self, z: &Measurement) -> Result<()> {
        let mut lin = self.state.clone();
        self.init_with(&mut lin, z)
    }

    fn init_with(&mut self, lin: &mut DVector<f64>, z: &Measurement) -> Result<()> {
        if self.locate(z.id).is_some() {
            return Err(Error::Association(format!("landmark {} is already initialized", z.id)));
        }
        let pose = self.pose();
        match z.kind {
            MeasurementKind::Active { range, bearing } => {
                let (mean, g_pose, g_obs) = active_init_jacobians(&pose, range, bearing);
                let local = g_obs * self.noise.range_bearing_cov() * g_obs.transpose();
                self.augment(lin, &[(mean, g_pose, local)]);
                self.registry.push(RegistryEntry {
                    id: z.id,
                    status: LandmarkStatus::Full,
                    blocks: 1,
                    rays: None,
                });
            }
            MeasurementKind::Passive { bearing } => {
                let set = init_ray(&pose, bearing, z.id, &self.ray)?;
                let blocks: Vec<_> = (0..set.len())
                    .map(|j| {
                        let (mean, local) = set.gaussian(j, self.noise.sigma_bearing);
                        (mean, set.pose_jacobian(j), local)
                    })
                    .collect();
                self.augment(lin, &blocks);
                self.registry.push(RegistryEntry {
                    id: z.id,
                    status: if set.len() == 1 { LandmarkStatus::Full } else { LandmarkStatus::Partial },
                    blocks: set.len(),
                    rays: if set.len() == 1 { None } else { Some(set) },
                });
            }
        }
        Ok(())
    }

    fn correct_one(&mut self, lin: &mut DVector<f64>, z: &Measurement) -> Result<()> {
        let Some((off, idx)) = self.locate(z.id) else {
            return self.init_with(lin, z);
        };
        let kind = ModelKind::of(z);
        let zv = observation(z);
        let r = self.noise.measurement_cov(kind);
        if self.registry[idx].status == LandmarkStatus::Full {
            return self.update_block(lin, off, &zv, kind, &r);
        }
        let mut set = self.registry[idx].rays.clone().expect("partial landmark carries rays");
        if z.is_active() {
            let promo = promote_on_active(&set, &self.pose(), z)?;
            for j in (0..set.len()).rev() {
                if j != promo.kept {
                    self.remove_block(lin, off + 2 * j);
                }
            }
            self.state.rows_mut(off, 2).copy_from(&promo.mean);
            lin.rows_mut(off, 2).copy_from(&promo.mean);
            self.registry[idx] = RegistryEntry {
                id: z.id,
                status: LandmarkStatus::Full,
                blocks: 1,
                rays: None,
            };
            return self.update_block(lin, off, &zv, kind, &r);
        }

        let scored = (0..set.len())
            .map(|j| self.innovation(lin, off + 2 * j, &zv, kind, &r).map(|i| (i.nu, i.s)))
            .collect::<Result<Vec<_>>>()?;
        let (nus, ss): (Vec<_>, Vec<_>) = scored.into_iter().unzip();
        let rho = update_hypothesis_weights(&mut set, &nus, &ss, self.ray.likelihood_exponent)?;
        let mut first_err = None;
        for (j, rj) in fis_split(&r, &rho).into_iter().enumerate() {
            if let Some(rj) = rj {
                if let Err(e) = self.update_block(lin, off + 2 * j, &zv, kind, &rj) {
                    self.skipped += 1;
                    first_err.get_or_insert(e);
                }
            }
        }
        let kept = prune(&mut set, self.ray.prune_tau);
        for j in (0..self.registry[idx].blocks).rev() {
            if !kept.contains(&j) {
                self.remove_block(lin, off + 2 * j);
            }
        }
        let entry = &mut self.registry[idx];
        entry.blocks = set.len();
        if set.len() == 1 {
            entry.status = LandmarkStatus::Full;
            entry.rays = None;
        } else {
            entry.rays = Some(set);
        }
        match first_err {
            Some(Error::Numerical(_)) | None => Ok(()),
            Some(e) => Err(e),
        }
    }

    pub fn checkpoint(&self) -> EkfCheckpoint {
        let n = self.dim();
        let mut cov_lower = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in 0..=i {
                cov_lower.push(self.cov[(i, j)]);
            }
        }
        EkfCheckpoint {
            version: CHECKPOINT_VERSION,
            state: self.state.iter().copied().collect(),
            cov_lower,
            registry: self.registry.clone(),
        }
    }

    pub fn restore(cp: &EkfCheckpoint, noise: NoiseConfig, ray: RayConfig, wheelbase: f64) -> Result<Self> {
        if cp.version != CHECKPOINT_VERSION {
            return Err(Error::Schema(format!("checkpoint version {}", cp.version)));
        }
        let n = cp.state.len();
        let blocks: usize = cp.registry.iter().map(|e| e.blocks).sum();
        if n != 3 + 2 * blocks || cp.cov_lower.len() != n * (n + 1) / 2 {
            return Err(Error::Schema("checkpoint dimensions disagree with its registry".into()));
        }
        let mut filter = Self::new(Pose::new(cp.state[0], cp.state[1], cp.state[2]), noise, ray, wheelbase)?;
        filter.state = DVector::from_vec(cp.state.clone());
        let mut cov = DMatrix::zeros(n, n);
        let mut it = cp.cov_lower.iter();
        for i in 0..n {
            for j in 0..=i {
                let v = *it.next().expect("length checked");
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        filter.cov = cov;
        filter.registry = cp.registry.clone();
        Ok(filter)
    }
}

impl SlamFilter for Ekf {
    fn predict(&mut self, u: &ControlInput) -> Result<()> {
        let pose = self.pose();
        let (f, g) = motion_jacobians(&pose, u, self.wheelbase);
        let next = propagate(&pose, u, self.wheelbase)?;
        self.state[0] = next.x;
        self.state[1] = next.y;
        self.state[2] = next.theta;
        let f = DMatrix::from_fn(3, 3, |i, j| f[(i, j)]);
        let g = DMatrix::from_fn(3, 2, |i, j| g[(i, j)]);
        let q = DMatrix::from_fn(2, 2, |i, j| self.noise.control_cov()[(i, j)]);
        let n = self.dim();
        let pxx = &f * self.cov.view((0, 0), (3, 3)) * f.transpose() + &g * q * g.transpose();
        self.cov.view_mut((0, 0), (3, 3)).copy_from(&pxx);
        if n > 3 {
            let pxm = &f * self.cov.view((0, 3), (3, n - 3));
            self.cov.view_mut((0, 3), (3, n - 3)).copy_from(&pxm);
            self.cov.view_mut((3, 0), (n - 3, 3)).copy_from(&pxm.transpose());
        }
        self.symmetrize();
        Ok(())
    }

    fn correct(&mut self, measurements: &[Measurement]) -> Result<()> {
        let mut lin = self.state.clone();
        for z in measurements {
            match self.correct_one(&mut lin, z) {
                Ok(()) => {}
                Err(Error::Numerical(_)) | Err(Error::SingularGeometry) => self.skipped += 1,
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    fn pose(&self) -> Pose {
        Self::pose_of(&self.state)
    }

    fn pose_covariance(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.cov[(i, j)])
    }

    fn landmarks(&self) -> Vec<LandmarkEstimate> {
        let mut out = Vec::with_capacity(self.registry.len());
        let mut off = 3;
        for e in &self.registry {
            let j = e.rays.as_ref().map_or(0, strongest_hypothesis);
            let o = off + 2 * j;
            out.push(LandmarkEstimate {
                id: e.id,
                mean: Self::block(&self.state, o),
                cov: Matrix2::from_fn(|r, c| self.cov[(o + r, o + c)]),
                status: e.status,
            });
            off += 2 * e.blocks;
        }
        out.sort_by_key(|l| l.id);
        out
    }

    fn skipped(&self) -> usize {
        self.skipped
    }
}
