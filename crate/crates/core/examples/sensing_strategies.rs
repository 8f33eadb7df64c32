//! Counts what each sensing strategy reports along one trajectory.

use sonar_slam::acoustics::AcousticsConfig;
use sonar_slam::sensing::{SensingConfig, SensingParams, Sensor, Strategy};
use sonar_slam::world::{generate_world, WorldConfig};

fn main() -> sonar_slam::Result<()> {
    let world = generate_world(&WorldConfig::default(), 7)?;
    let ac = AcousticsConfig::default();

    println!("{:<8} {:>9} {:>6} {:>8} {:>8}", "strategy", "radius mm", "epochs", "active", "passive");
    for strategy in Strategy::ALL {
        for radius in [0.0025, 0.025] {
            if strategy == Strategy::Passive && radius > 0.0025 {
                continue;
            }
            let sensor = Sensor::new(
                &ac,
                &SensingConfig {
                    strategy,
                    emitter_radius: radius,
                    params: SensingParams::default(),
                },
            )?;
            let (mut active, mut passive, mut epochs) = (0, 0, 0);
            for k in (0..=world.trajectory.len()).step_by(4) {
                let zs = sensor.sense(&world, &world.pose_at(k), k)?;
                active += zs.iter().filter(|z| z.is_active()).count();
                passive += zs.iter().filter(|z| !z.is_active()).count();
                epochs += 1;
            }
            println!("{:<8} {:>9.1} {epochs:>6} {active:>8} {passive:>8}", strategy.to_string(), radius * 1e3);
        }
    }
    Ok(())
}
