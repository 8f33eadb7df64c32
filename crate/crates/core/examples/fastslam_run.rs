//! One FastSLAM 2.0 run: particle degeneracy and resampling over time.

use sonar_slam::fastslam::{FastSlam, FastSlamConfig};
use sonar_slam::harness::{parse_cell, simulate_measurements, ExperimentConfig};
use sonar_slam::metrics::{nees, rmse_vehicle};
use sonar_slam::sensing::Measurement;
use sonar_slam::slam::SlamFilter;
use sonar_slam::world::generate_world;

fn main() -> sonar_slam::Result<()> {
    let cfg = ExperimentConfig::desk();
    let seed = cfg.world_seeds()[1];
    let world = generate_world(&cfg.world, seed)?;
    let cell = parse_cell("fastslam-active-r00")?;
    let log = simulate_measurements(&world, &cfg, &cell.sensing)?;

    let mut filter = FastSlam::new(
        world.initial_pose,
        cfg.noise(),
        cfg.filter.ray.clone(),
        FastSlamConfig::default(),
        cfg.world.wheelbase,
        99,
    )?;
    let at = |k: usize| -> Vec<Measurement> { log.iter().filter(|z| z.k == k).copied().collect() };
    let u = cfg.world.nominal_control();
    filter.correct(&at(0))?;
    let mut estimates = Vec::new();
    for k in 1..=world.trajectory.len() {
        filter.predict(&u)?;
        filter.correct(&at(k))?;
        estimates.push(filter.pose());
        if k % 80 == 0 {
            let e = nees(&filter.pose(), &world.pose_at(k), &filter.pose_covariance());
            let neff = filter.neff_log().last().copied().unwrap_or(f64::NAN);
            println!("k {k:>4}: N_eff {neff:>6.1}, NEES {e:>8.2}, landmarks {}", filter.landmarks().len());
        }
    }
    let truth: Vec<_> = (1..=world.trajectory.len()).map(|k| world.pose_at(k)).collect();
    let (pos, bearing) = rmse_vehicle(&estimates, &truth)?;
    println!("{} resampling events; position RMSE {pos:.3} m, bearing RMSE {bearing:.4} rad", filter.resample_count());
    Ok(())
}
