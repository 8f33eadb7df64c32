//! Generates a ground-truth world and prints its geometry.
//!
//! ```bash
//! cargo run --example world_generation -- 42
//! ```

use sonar_slam::world::{generate_world, WorldConfig};

fn main() -> sonar_slam::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(42);
    let cfg = WorldConfig::default();
    let world = generate_world(&cfg, seed)?;

    println!("seed {seed}, {} landmarks, config {}", world.landmarks.len(), world.config_hash);
    println!(
        "beacon id {} at ({:.2}, {:.2}), {:.0} Hz",
        world.beacon.id, world.beacon.x, world.beacon.y, world.beacon.frequency
    );
    for lm in world.landmarks.iter().take(5) {
        println!("  landmark {:>2} at ({:>6.2}, {:>6.2})", lm.id, lm.x, lm.y);
    }

    let end = world.pose_at(world.trajectory.len());
    let turned: f64 = world
        .trajectory
        .windows(2)
        .map(|w| sonar_slam::angle::wrap_angle(w[1].pose.theta - w[0].pose.theta))
        .sum();
    println!(
        "{} steps over {:.1} s, heading swept {:.2} turns, final pose ({:.2}, {:.2}, {:.3})",
        world.trajectory.len(),
        world.trajectory.len() as f64 * cfg.dt,
        turned / std::f64::consts::TAU,
        end.x,
        end.y,
        end.theta
    );
    world.check_geometry()?;
    println!("geometry constraints hold");
    Ok(())
}
