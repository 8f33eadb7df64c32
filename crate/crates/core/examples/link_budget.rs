//! Echo link budgets and the resulting detection ranges.

use sonar_slam::acoustics::{link_budget, AcousticsConfig, EchoPath};

fn main() -> sonar_slam::Result<()> {
    let ac = AcousticsConfig::default();
    let medium = ac.medium();
    let reflector = 0.05;

    for radius in [0.0025, 0.025] {
        let emitter = ac.vehicle_emitter(radius);
        println!("vehicle piston {:.1} mm", radius * 1e3);
        for off_axis_deg in [0.0f64, 10.0, 30.0] {
            let max_range = (1..=400)
                .map(|i| i as f64 * 0.1)
                .take_while(|&range| {
                    let path = EchoPath::Active {
                        range,
                        off_axis: off_axis_deg.to_radians(),
                        reflector_radius: reflector,
                    };
                    link_budget(&emitter, &path, &medium).is_ok_and(|b| b.detected(ac.detection_threshold_db))
                })
                .last()
                .unwrap_or(0.0);
            println!("  {off_axis_deg:>4.0} deg off axis: detected out to {max_range:.1} m");
        }
    }

    let b = link_budget(
        &ac.beacon_emitter(),
        &EchoPath::Bistatic {
            source_to_target: 10.0,
            target_to_receiver: 6.0,
            scattering_angle: 120f64.to_radians(),
            reflector_radius: reflector,
        },
        &medium,
    )?;
    println!("\nbeacon echo, 10 m + 6 m legs, 120 deg scattering angle:");
    println!(
        "  SL {:.1} - spreading {:.1} - absorption {:.2} + TS {:.1} = {:.1} dB (threshold {:.0} dB)",
        b.source_level, b.spreading_loss, b.atmospheric_loss, b.target_strength, b.received_level, ac.detection_threshold_db
    );
    Ok(())
}
