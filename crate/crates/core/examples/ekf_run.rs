//! One EKF-SLAM run with fused sensing on a desk-sized world.

use sonar_slam::harness::{evaluate, filter_seed, parse_cell, run_filter, simulate_measurements, ExperimentConfig};
use sonar_slam::world::generate_world;

fn main() -> sonar_slam::Result<()> {
    let cfg = ExperimentConfig::desk();
    let seed = cfg.world_seeds()[0];
    let world = generate_world(&cfg.world, seed)?;
    let cell = parse_cell("ekf-fused-r04")?;
    let log = simulate_measurements(&world, &cfg, &cell.sensing)?;
    let trace = run_filter(&world, &log, cell.algorithm, &cfg, filter_seed(seed))?;
    let result = evaluate(&world, &cell, &cfg, &trace)?;

    println!("{} measurements, HPBW {:.1} deg", log.len(), result.hpbw_deg.unwrap_or(f64::NAN));
    println!("position RMSE {:.3} m, bearing RMSE {:.4} rad", result.rmse_position, result.rmse_bearing);
    println!("map RMSE {:.3} m over {} full of {} landmarks", result.rmse_map.unwrap_or(f64::NAN), result.full, result.total);
    for k in (0..result.nees.len()).step_by(50) {
        println!("  k {:>4}  NEES {:>7.3}", k + 1, result.nees[k]);
    }
    println!("diverged: {}", result.diverged);
    Ok(())
}
