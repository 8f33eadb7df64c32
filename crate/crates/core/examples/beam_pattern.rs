//! Piston emitter directivity and the half-power beamwidth grid.

use sonar_slam::acoustics::{hpbw_from_radius, log_spaced_radii, piston_response, AcousticsConfig};

fn main() {
    let ac = AcousticsConfig::default();
    let (f, c) = (ac.vehicle_frequency, ac.speed_of_sound);

    println!("{:>3} {:>10} {:>9}", "idx", "radius mm", "HPBW deg");
    for (i, a) in log_spaced_radii(12, 0.0025, 0.025).iter().enumerate() {
        println!("{i:>3} {:>10.3} {:>9.1}", a * 1e3, hpbw_from_radius(*a, f, c));
    }

    let a = 0.025;
    println!("\npressure ratio of a {:.0} mm piston at {:.0} kHz", a * 1e3, f / 1e3);
    for deg in [0.0, 2.0, 4.0, 5.7, 8.0, 12.0, 20.0, 45.0, 90.0] {
        let p = piston_response(f64::to_radians(deg), f, a, c);
        let bar = "#".repeat((p * 40.0).round() as usize);
        println!("{deg:>5.1} deg {p:>6.3} {bar}");
    }
}
