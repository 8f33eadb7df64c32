//! Conventional beamscan direction finding on one receiving array.

use num_complex::Complex64;
use sonar_slam::acoustics::AcousticsConfig;
use sonar_slam::sensing::{beamscan_doa, UlaConfig, UlaSpec};

fn main() -> sonar_slam::Result<()> {
    let ac = AcousticsConfig::default();
    let ula = UlaSpec::new(&UlaConfig::default(), &ac);
    let f = ac.beacon_frequency;
    println!("{} elements, spacing {:.2} mm", ula.config.elements, ula.spacing * 1e3);

    for sources in [vec![30.0], vec![-40.0, 40.0], vec![-10.0, 5.0]] {
        let mut snapshot = vec![Complex64::new(0.0, 0.0); ula.config.elements];
        for deg in &sources {
            for (s, a) in snapshot.iter_mut().zip(ula.steering(f64::to_radians(*deg), f)) {
                *s += a;
            }
        }
        let peaks = beamscan_doa(&snapshot, &ula, f, &ula.grid())?;
        let found: Vec<String> = peaks.iter().map(|(d, p)| format!("{d:.2} deg ({p:.2})")).collect();
        println!("sources {sources:?} -> {}", found.join(", "));
    }
    Ok(())
}
