//! Bearing-only landmark initialization: the ray of range hypotheses is
//! reweighted and pruned as the vehicle moves past the landmark.

use sonar_slam::ekf::Ekf;
use sonar_slam::sensing::Measurement;
use sonar_slam::slam::{init_ray, NoiseConfig, RayConfig, SlamFilter};
use sonar_slam::world::{propagate, ControlInput, Pose};

fn main() -> sonar_slam::Result<()> {
    let ray = RayConfig::default();
    println!("hypotheses (mean, std):");
    for (s, sigma) in ray.range_hypotheses() {
        println!("  {s:>7.3} m  +- {sigma:.3}");
    }

    let set = init_ray(&Pose::new(0.0, 0.0, 0.0), 0.5, 1, &ray)?;
    let (mean, _) = set.gaussian(1, 0.15);
    println!("second hypothesis sits at ({:.2}, {:.2})", mean.x, mean.y);

    // Drive past a landmark at (6, 4) observing only its bearing.
    let landmark = nalgebra::Vector2::new(6.0, 4.0);
    let u = ControlInput { speed: 0.75, steer: 0.0, dt: 0.125 };
    let mut truth = Pose::new(0.0, 0.0, 0.0);
    let mut ekf = Ekf::new(truth, NoiseConfig::default(), ray, 0.2)?;
    for k in 0..=80 {
        if k > 0 {
            truth = propagate(&truth, &u, 0.2)?;
            ekf.predict(&u)?;
        }
        if k % 4 == 0 {
            ekf.correct(&[Measurement::passive(k, 1, truth.bearing_to(landmark))])?;
            let e = &ekf.registry()[0];
            let weights: Vec<String> = e
                .rays
                .as_ref()
                .map(|r| r.hypotheses.iter().map(|h| format!("{:.3}", h.weight)).collect())
                .unwrap_or_default();
            let est = &ekf.landmarks()[0];
            println!(
                "k {k:>3}: {:?} with {} block(s) [{}], estimate ({:.2}, {:.2})",
                e.status,
                e.blocks,
                weights.join(" "),
                est.mean.x,
                est.mean.y
            );
            if e.rays.is_none() && k > 0 {
                break;
            }
        }
    }
    Ok(())
}
