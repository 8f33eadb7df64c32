mod common;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2};
use proptest::prelude::*;
use rand::Rng;

use sonar_slam::ekf::Ekf;
use sonar_slam::fastslam::{
    effective_sample_size, landmark_update, observation_log_likelihood, proposal, stratified_resample, Gaussian2,
    ProposalTerm,
};
use sonar_slam::harness::{filter_seed, run_filter, simulate_measurements, Algorithm, ExperimentConfig, SensingCell};
use sonar_slam::sensing::{Measurement, Strategy};
use sonar_slam::slam::{
    fis_split, normalized_weights, prune, update_hypothesis_weights, ModelKind, NoiseConfig, RayConfig, RayHypothesis,
    RayHypothesisSet, SlamFilter,
};
use sonar_slam::world::{generate_world, ControlInput, Pose};

fn linearization(s: &[f64; 5], active: bool) -> DMatrix<f64> {
    let (dx, dy) = (s[3] - s[0], s[4] - s[1]);
    let q = dx * dx + dy * dy;
    let d = q.sqrt();
    let b = [dy / q, -dx / q, -1.0, -dy / q, dx / q];
    if active {
        let r = [-dx / d, -dy / d, 0.0, dx / d, dy / d];
        DMatrix::from_fn(2, 5, |i, j| if i == 0 { r[j] } else { b[j] })
    } else {
        DMatrix::from_fn(1, 5, |_, j| b[j])
    }
}

fn spd3<R: Rng>(rng: &mut R) -> Matrix3<f64> {
    let a = Matrix3::from_fn(|_, _| rng.random_range(-0.2..0.2));
    a * a.transpose() + Matrix3::identity() * 0.01
}

fn spd2<R: Rng>(rng: &mut R) -> Matrix2<f64> {
    let a = Matrix2::from_fn(|_, _| rng.random_range(-0.3..0.3));
    a * a.transpose() + Matrix2::identity() * 0.01
}

#[test]
fn single_term_proposal_matches_information_form() {
    let mut rng = common::rng(21);
    let noise = NoiseConfig::default();
    for _ in 0..200 {
        let s = common::random_geometry(&mut rng);
        let active = rng.random_bool(0.5);
        let pose = Pose::new(s[0], s[1], s[2]);
        let cov = spd3(&mut rng);
        let lm = Gaussian2 {
            mean: Vector2::new(s[3], s[4]),
            cov: spd2(&mut rng),
        };
        let h = linearization(&s, active);
        let hx = h.columns(0, 3).clone_owned();
        let hm = h.columns(3, 2).clone_owned();
        let (z, r, nu) = if active {
            let p = common::h_active(&s);
            let z = DVector::from_vec(vec![p[0] + 0.1, p[1] - 0.05]);
            (z, DMatrix::from_diagonal(&DVector::from_vec(vec![0.04, 0.0225])), DVector::from_vec(vec![0.1, -0.05]))
        } else {
            let p = common::h_passive(&s);
            (DVector::from_vec(vec![p[0] + 0.07]), DMatrix::from_element(1, 1, 0.0225), DVector::from_vec(vec![0.07]))
        };
        let lm_cov = DMatrix::from_fn(2, 2, |i, j| lm.cov[(i, j)]);
        let sf = &hm * lm_cov * hm.transpose() + r;
        let sf_inv = sf.try_inverse().unwrap();
        let p0 = DMatrix::from_fn(3, 3, |i, j| cov[(i, j)]);
        let info = p0.clone().try_inverse().unwrap() + hx.transpose() * &sf_inv * &hx;
        let sigma = info.try_inverse().unwrap();
        let shift = &sigma * hx.transpose() * &sf_inv * nu;

        let term = ProposalTerm {
            z,
            kind: if active { ModelKind::RangeBearing } else { ModelKind::Bearing },
            landmark: lm,
        };
        let (mu, cov1) = proposal(&pose, &cov, &[term], &noise).unwrap();
        assert!((mu.x - pose.x - shift[0]).abs() < 1e-9);
        assert!((mu.y - pose.y - shift[1]).abs() < 1e-9);
        assert!((mu.theta - pose.theta - shift[2]).abs() < 1e-9);
        for i in 0..3 {
            for j in 0..3 {
                assert!((cov1[(i, j)] - sigma[(i, j)]).abs() < 1e-9 * sigma.abs().max().max(1.0));
            }
        }
    }
}

#[test]
fn landmark_update_matches_information_form() {
    let mut rng = common::rng(22);
    for _ in 0..200 {
        let s = common::random_geometry(&mut rng);
        let pose = Pose::new(s[0], s[1], s[2]);
        let g = Gaussian2 {
            mean: Vector2::new(s[3], s[4]),
            cov: spd2(&mut rng),
        };
        let hm = linearization(&s, true).columns(3, 2).clone_owned();
        let r = DMatrix::from_diagonal(&DVector::from_vec(vec![0.04, 0.0225]));
        let p = common::h_active(&s);
        let nu = DVector::from_vec(vec![rng.random_range(-0.3..0.3), rng.random_range(-0.2..0.2)]);
        let z = DVector::from_vec(vec![p[0] + nu[0], p[1] + nu[1]]);
        let p0 = DMatrix::from_fn(2, 2, |i, j| g.cov[(i, j)]);
        let r_inv = r.clone().try_inverse().unwrap();
        let post = (p0.try_inverse().unwrap() + hm.transpose() * &r_inv * &hm).try_inverse().unwrap();
        let mean = &post * hm.transpose() * &r_inv * nu;

        let out = landmark_update(&pose, &z, ModelKind::RangeBearing, &g, &r).unwrap();
        assert!((out.mean.x - g.mean.x - mean[0]).abs() < 1e-9);
        assert!((out.mean.y - g.mean.y - mean[1]).abs() < 1e-9);
        for i in 0..2 {
            for j in 0..2 {
                assert!((out.cov[(i, j)] - post[(i, j)]).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn bearing_likelihood_matches_scalar_density() {
    let noise = NoiseConfig::default();
    let pose = Pose::new(0.5, -1.0, 0.3);
    let pose_cov = Matrix3::from_diagonal(&nalgebra::Vector3::new(0.01, 0.02, 0.003));
    let g = Gaussian2 {
        mean: Vector2::new(4.0, 2.0),
        cov: Matrix2::new(0.05, 0.01, 0.01, 0.03),
    };
    let s = [pose.x, pose.y, pose.theta, g.mean.x, g.mean.y];
    let h = linearization(&s, false);
    let mut joint = DMatrix::zeros(5, 5);
    joint.view_mut((0, 0), (3, 3)).copy_from(&DMatrix::from_fn(3, 3, |i, j| pose_cov[(i, j)]));
    joint.view_mut((3, 3), (2, 2)).copy_from(&DMatrix::from_fn(2, 2, |i, j| g.cov[(i, j)]));
    let l = (&h * joint * h.transpose())[(0, 0)] + noise.sigma_bearing.powi(2);
    let nu = 0.11;
    let z = DVector::from_element(1, common::h_passive(&s)[0] + nu);
    let expected = -0.5 * (std::f64::consts::TAU * l).ln() - nu * nu / (2.0 * l);
    let got = observation_log_likelihood(&pose, &pose_cov, &z, ModelKind::Bearing, &g, &noise).unwrap();
    assert!((got - expected).abs() < 1e-12);
}

#[test]
fn hypothesis_weight_and_pruning_examples() {
    let rho = normalized_weights(&[0.2f64.ln(), 0.1f64.ln()], 1.0);
    assert!((rho[0] - 2.0 / 3.0).abs() < 1e-15 && (rho[1] - 1.0 / 3.0).abs() < 1e-15);

    let r = DMatrix::from_diagonal(&DVector::from_vec(vec![0.04, 0.0225]));
    let split = fis_split(&r, &[0.5, 0.5]);
    for rj in split.into_iter().flatten() {
        assert!((rj[(0, 0)] - 0.08).abs() < 1e-15 && (rj[(1, 1)] - 0.045).abs() < 1e-15);
    }

    let mut set = RayHypothesisSet {
        id: 1,
        origin: Pose::new(0.0, 0.0, 0.0),
        bearing: 0.0,
        hypotheses: [0.9, 0.05, 0.03, 0.02]
            .into_iter()
            .enumerate()
            .map(|(i, w)| RayHypothesis {
                range: 1.0 + i as f64,
                std: 0.3,
                weight: w,
            })
            .collect(),
    };
    assert_eq!(prune(&mut set, 0.2), vec![0, 1]);
    assert!((set.weight_sum() - 1.0).abs() < 1e-15);
}

#[test]
fn equal_likelihoods_leave_ray_weights_unchanged() {
    let mut set = RayHypothesisSet {
        id: 1,
        origin: Pose::new(0.0, 0.0, 0.0),
        bearing: 0.0,
        hypotheses: (0..4)
            .map(|i| RayHypothesis {
                range: 1.0 + i as f64,
                std: 0.3,
                weight: 0.25,
            })
            .collect(),
    };
    let nu = vec![DVector::from_element(1, 0.1); 4];
    let s = vec![DMatrix::from_element(1, 1, 0.04); 4];
    let rho = update_hypothesis_weights(&mut set, &nu, &s, 1.0).unwrap();
    assert!(rho.iter().all(|r| (r - 0.25).abs() < 1e-15));
    assert!(set.hypotheses.iter().all(|h| (h.weight - 0.25).abs() < 1e-15));
}

#[test]
fn fastslam_runs_are_reproducible_per_filter_seed() {
    let mut cfg = ExperimentConfig::desk();
    cfg.world.n_steps = 80;
    let seed = cfg.world_seeds()[0];
    let world = generate_world(&cfg.world, seed).unwrap();
    let cell = SensingCell {
        strategy: Strategy::Fused,
        radius_index: Some(4),
    };
    let log = simulate_measurements(&world, &cfg, &cell).unwrap();
    let a = run_filter(&world, &log, Algorithm::Fastslam, &cfg, filter_seed(seed)).unwrap();
    let b = run_filter(&world, &log, Algorithm::Fastslam, &cfg, filter_seed(seed)).unwrap();
    let c = run_filter(&world, &log, Algorithm::Fastslam, &cfg, filter_seed(seed) ^ 1).unwrap();
    assert_eq!(a.estimates, b.estimates);
    assert_eq!(a.neff, b.neff);
    assert_ne!(a.estimates, c.estimates);
}

#[test]
fn repeated_range_bearing_fixes_shrink_landmark_uncertainty() {
    let noise = NoiseConfig::default();
    let mut ekf = Ekf::new(Pose::new(0.0, 0.0, 0.0), noise, RayConfig::default(), 0.2).unwrap();
    ekf.init_landmark(&Measurement::active(0, 1, 5.0, 0.2)).unwrap();
    let (off, _) = ekf.locate(1).unwrap();
    let mut prev = ekf.covariance().view((off, off), (2, 2)).trace();
    for k in 1..20 {
        ekf.correct(&[Measurement::active(k, 1, 5.0, 0.2)]).unwrap();
        let now = ekf.covariance().view((off, off), (2, 2)).trace();
        assert!(now <= prev + 1e-15);
        prev = now;
    }
    let m = ekf.state().rows(off, 2);
    assert!((m[0] - 5.0 * 0.2f64.cos()).abs() < 1e-9 && (m[1] - 5.0 * 0.2f64.sin()).abs() < 1e-9);
}

fn min_eigenvalue(p: &DMatrix<f64>) -> f64 {
    p.clone().symmetric_eigen().eigenvalues.min()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ekf_covariance_stays_symmetric_psd(seed in any::<u64>(), steps in 1usize..30) {
        let mut rng = common::rng(seed);
        let mut ekf = Ekf::new(Pose::new(0.0, 0.0, 0.0), NoiseConfig::default(), RayConfig::default(), 0.2).unwrap();
        let u = ControlInput { speed: 0.75, steer: 0.027, dt: 0.125 };
        let landmarks: Vec<(f64, f64)> = (0..4).map(|_| (rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0))).collect();
        let mut truth = Pose::new(0.0, 0.0, 0.0);
        for k in 0..steps {
            truth = sonar_slam::world::propagate(&truth, &u, 0.2).unwrap();
            ekf.predict(&u).unwrap();
            let mut zs = Vec::new();
            for (i, &(x, y)) in landmarks.iter().enumerate() {
                let p = Vector2::new(x, y);
                let d = truth.distance_to(p);
                if d < 0.5 { continue; }
                let b = truth.bearing_to(p) + rng.random_range(-0.2..0.2);
                zs.push(if rng.random_bool(0.5) {
                    Measurement::active(k, i as u32 + 1, d + rng.random_range(-0.2..0.2), b)
                } else {
                    Measurement::passive(k, i as u32 + 1, b)
                });
            }
            ekf.correct(&zs).unwrap();
        }
        let p = ekf.covariance();
        prop_assert!(max_asym(p) < 1e-12);
        prop_assert!(min_eigenvalue(p) > -1e-9 * p.abs().max().max(1.0));
    }

    #[test]
    fn stratified_copies_stay_within_two_of_expectation(raw in prop::collection::vec(0.0f64..1.0, 1..60), seed in any::<u64>()) {
        let sum: f64 = raw.iter().sum();
        prop_assume!(sum > 1e-9);
        let w: Vec<f64> = raw.iter().map(|v| v / sum).collect();
        let idx = stratified_resample(&w, &mut common::rng(seed)).unwrap();
        prop_assert_eq!(idx.len(), w.len());
        let n = w.len() as f64;
        for (i, wi) in w.iter().enumerate() {
            let copies = idx.iter().filter(|&&j| j == i).count() as f64;
            prop_assert!((copies - n * wi).abs() < 2.0);
        }
        let ess = effective_sample_size(&w);
        prop_assert!(ess >= 1.0 - 1e-9 && ess <= n + 1e-9);
    }
}

fn max_asym(p: &DMatrix<f64>) -> f64 {
    (p - p.transpose()).abs().max()
}
