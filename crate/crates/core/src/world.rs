//! Ground truth: vehicle kinematics, trajectories and landmark maps.

use nalgebra::{Matrix3, Matrix3x2, Vector2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::angle::wrap_angle;
use crate::error::{ensure_finite, Error, Result};
use crate::rng::{self, SimRng};

pub const WORLD_FORMAT_VERSION: u32 = 1;

/// Planar vehicle pose. `theta` is kept in `(-π, π]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn distance_to(&self, point: Vector2<f64>) -> f64 {
        (point - self.position()).norm()
    }

    /// Bearing of `point` relative to the heading, wrapped.
    pub fn bearing_to(&self, point: Vector2<f64>) -> f64 {
        let d = point - self.position();
        wrap_angle(d.y.atan2(d.x) - self.theta)
    }
}

/// Speed / steering command held constant over `dt`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub speed: f64,
    pub steer: f64,
    pub dt: f64,
}

/// Bicycle-model motion: the front wheel rolls along its heading without slip.
pub fn propagate(pose: &Pose, u: &ControlInput, wheelbase: f64) -> Result<Pose> {
    ensure_finite("pose", &[pose.x, pose.y, pose.theta])?;
    ensure_finite("control", &[u.speed, u.steer, u.dt])?;
    if !(wheelbase > 0.0 && wheelbase.is_finite()) {
        return Err(Error::InvalidInput(format!("wheelbase must be positive, got {wheelbase}")));
    }
    if u.dt <= 0.0 {
        return Err(Error::InvalidInput(format!("dt must be positive, got {}", u.dt)));
    }
    let step = u.speed * u.dt;
    let heading = pose.theta + u.steer;
    Ok(Pose::new(
        pose.x + step * heading.cos(),
        pose.y + step * heading.sin(),
        pose.theta + step / wheelbase * u.steer.sin(),
    ))
}

/// Jacobians of [`propagate`] with respect to the pose and to `(speed, steer)`.
pub fn motion_jacobians(pose: &Pose, u: &ControlInput, wheelbase: f64) -> (Matrix3<f64>, Matrix3x2<f64>) {
    let step = u.speed * u.dt;
    let heading = pose.theta + u.steer;
    let (s, c) = heading.sin_cos();
    let f = Matrix3::new(
        1.0, 0.0, -step * s, //
        0.0, 1.0, step * c, //
        0.0, 0.0, 1.0,
    );
    let g = Matrix3x2::new(
        u.dt * c,
        -step * s,
        u.dt * s,
        step * c,
        u.dt / wheelbase * u.steer.sin(),
        step / wheelbase * u.steer.cos(),
    );
    (f, g)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

impl Landmark {
    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }
}

/// Static isotropic emitter. It is also a physical reflector and is carried as
/// landmark `id` in the maps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Beacon {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub frequency: f64,
}

impl Beacon {
    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }
}

/// One control interval: the (noisy) control actually applied and the true
/// pose at the end of the interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub pose: Pose,
    pub control: ControlInput,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    pub n_landmarks: usize,
    /// Minimum landmark-to-landmark distance (m).
    pub min_spacing: f64,
    /// Minimum distance from landmarks and beacon to the vehicle path (m).
    pub path_clearance: f64,
    /// Landmarks lie within this distance of the map center (m).
    pub max_range: f64,
    pub beacon_distance: f64,
    pub beacon_frequency: f64,
    /// Sphere radius of every landmark (m).
    pub landmark_radius: f64,
    pub wheelbase: f64,
    pub speed: f64,
    pub steer: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub sigma_speed: f64,
    pub sigma_steer: f64,
    pub max_placement_attempts: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            n_landmarks: 50,
            min_spacing: 3.0,
            path_clearance: 0.5,
            max_range: 25.0,
            beacon_distance: 15.0,
            beacon_frequency: 30e3,
            landmark_radius: 0.05,
            wheelbase: 0.2,
            speed: 0.75,
            steer: 0.027,
            dt: 0.125,
            n_steps: 1500,
            sigma_speed: 0.1,
            sigma_steer: 0.03,
            max_placement_attempts: 100_000,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("wheelbase", self.wheelbase),
            ("dt", self.dt),
            ("max_range", self.max_range),
            ("landmark_radius", self.landmark_radius),
            ("beacon_frequency", self.beacon_frequency),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("speed", self.speed),
            ("min_spacing", self.min_spacing),
            ("path_clearance", self.path_clearance),
            ("beacon_distance", self.beacon_distance),
            ("sigma_speed", self.sigma_speed),
            ("sigma_steer", self.sigma_steer),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.n_steps == 0 {
            return Err(Error::Config("n_steps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn nominal_control(&self) -> ControlInput {
        ControlInput {
            speed: self.speed,
            steer: self.steer,
            dt: self.dt,
        }
    }

    /// Vehicle start: map center, heading along +x.
    pub fn initial_pose(&self) -> Pose {
        Pose::new(0.0, 0.0, 0.0)
    }

    pub fn beacon_id(&self) -> u32 {
        self.n_landmarks as u32 + 1
    }
}

/// Simulates the true path: Gaussian noise is added to the nominal control
/// before every bicycle-model step.
pub fn simulate_trajectory(cfg: &WorldConfig, rng: &mut SimRng) -> Result<Vec<TrajectoryStep>> {
    cfg.validate()?;
    let speed_noise = Normal::new(0.0, cfg.sigma_speed).map_err(|e| Error::Config(e.to_string()))?;
    let steer_noise = Normal::new(0.0, cfg.sigma_steer).map_err(|e| Error::Config(e.to_string()))?;
    let nominal = cfg.nominal_control();
    let mut pose = cfg.initial_pose();
    let mut steps = Vec::with_capacity(cfg.n_steps);
    for _ in 0..cfg.n_steps {
        let control = ControlInput {
            speed: nominal.speed + speed_noise.sample(rng),
            steer: nominal.steer + steer_noise.sample(rng),
            dt: nominal.dt,
        };
        pose = propagate(&pose, &control, cfg.wheelbase)?;
        steps.push(TrajectoryStep { pose, control });
    }
    Ok(steps)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldMap {
    pub version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub config: WorldConfig,
    pub landmarks: Vec<Landmark>,
    pub beacon: Beacon,
    pub initial_pose: Pose,
    pub trajectory: Vec<TrajectoryStep>,
}

impl WorldMap {
    /// Landmarks followed by the beacon as a reflector, in id order.
    pub fn reflectors(&self) -> Vec<Landmark> {
        let mut all = self.landmarks.clone();
        all.push(Landmark {
            id: self.beacon.id,
            x: self.beacon.x,
            y: self.beacon.y,
            radius: self.config.landmark_radius,
        });
        all
    }

    pub fn true_position(&self, id: u32) -> Option<Vector2<f64>> {
        if id == self.beacon.id {
            return Some(self.beacon.position());
        }
        self.landmarks.iter().find(|l| l.id == id).map(Landmark::position)
    }

    /// True pose after `k` control steps (`k = 0` is the initial pose).
    pub fn pose_at(&self, k: usize) -> Pose {
        if k == 0 {
            self.initial_pose
        } else {
            self.trajectory[k - 1].pose
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let world: WorldMap = serde_json::from_str(text)?;
        if world.version != WORLD_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "world format version {} (expected {WORLD_FORMAT_VERSION})",
                world.version
            )));
        }
        if world.config_hash != rng::config_hash(&world.config) {
            return Err(Error::Schema("world config hash does not match its config".into()));
        }
        Ok(world)
    }

    /// Checks every placement constraint; returns the first violation.
    pub fn check_geometry(&self) -> Result<()> {
        let cfg = &self.config;
        let path: Vec<Vector2<f64>> = std::iter::once(self.initial_pose.position())
            .chain(self.trajectory.iter().map(|s| s.pose.position()))
            .collect();
        let violation = |msg: String| Err(Error::Generation { seed: self.seed, reason: msg });
        if (self.beacon.position().norm() - cfg.beacon_distance).abs() > 1e-9 {
            return violation("beacon is not at the configured distance".into());
        }
        if min_distance(self.beacon.position(), &path) < cfg.path_clearance {
            return violation("beacon too close to the path".into());
        }
        for (i, a) in self.landmarks.iter().enumerate() {
            let p = a.position();
            if p.norm() > cfg.max_range {
                return violation(format!("landmark {} outside max range", a.id));
            }
            if (p - self.beacon.position()).norm() < cfg.path_clearance {
                return violation(format!("landmark {} too close to the beacon", a.id));
            }
            if min_distance(p, &path) < cfg.path_clearance {
                return violation(format!("landmark {} too close to the path", a.id));
            }
            for b in &self.landmarks[i + 1..] {
                if (p - b.position()).norm() < cfg.min_spacing {
                    return violation(format!("landmarks {} and {} closer than min spacing", a.id, b.id));
                }
            }
        }
        Ok(())
    }
}

fn min_distance(p: Vector2<f64>, path: &[Vector2<f64>]) -> f64 {
    path.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min)
}

/// Builds the trajectory, beacon and landmark field for one Monte-Carlo
/// iteration. Placement is rejection sampling with a bounded attempt budget.
pub fn generate_world(cfg: &WorldConfig, seed: u64) -> Result<WorldMap> {
    cfg.validate()?;
    let trajectory = simulate_trajectory(cfg, &mut rng::substream(seed, rng::TRAJECTORY, &[]))?;
    let initial_pose = cfg.initial_pose();
    let path: Vec<Vector2<f64>> = std::iter::once(initial_pose.position())
        .chain(trajectory.iter().map(|s| s.pose.position()))
        .collect();

    let mut placement = rng::substream(seed, rng::PLACEMENT, &[]);
    let fail = |reason: &str| Error::Generation {
        seed,
        reason: reason.to_string(),
    };

    let mut beacon_position = None;
    for _ in 0..cfg.max_placement_attempts {
        let bearing = placement.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let p = Vector2::new(bearing.cos(), bearing.sin()) * cfg.beacon_distance;
        if min_distance(p, &path) >= cfg.path_clearance {
            beacon_position = Some(p);
            break;
        }
    }
    let beacon_position = beacon_position.ok_or_else(|| fail("no beacon bearing clears the path"))?;
    let beacon = Beacon {
        id: cfg.beacon_id(),
        x: beacon_position.x,
        y: beacon_position.y,
        frequency: cfg.beacon_frequency,
    };

    let mut landmarks: Vec<Landmark> = Vec::with_capacity(cfg.n_landmarks);
    let mut attempts = 0usize;
    while landmarks.len() < cfg.n_landmarks {
        attempts += 1;
        if attempts > cfg.max_placement_attempts {
            return Err(fail(&format!(
                "placed {} of {} landmarks before the attempt budget ran out",
                landmarks.len(),
                cfg.n_landmarks
            )));
        }
        // Uniform over the disk.
        let r = cfg.max_range * placement.random::<f64>().sqrt();
        let a = placement.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let p = Vector2::new(r * a.cos(), r * a.sin());
        let spaced = landmarks.iter().all(|l| (l.position() - p).norm() >= cfg.min_spacing);
        if spaced
            && (p - beacon_position).norm() >= cfg.path_clearance
            && min_distance(p, &path) >= cfg.path_clearance
        {
            landmarks.push(Landmark {
                id: landmarks.len() as u32 + 1,
                x: p.x,
                y: p.y,
                radius: cfg.landmark_radius,
            });
        }
    }

    Ok(WorldMap {
        version: WORLD_FORMAT_VERSION,
        seed,
        config_hash: rng::config_hash(cfg),
        config: cfg.clone(),
        landmarks,
        beacon,
        initial_pose,
        trajectory,
    })
}
