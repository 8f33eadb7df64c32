//! Runs the reduced experiment grid and prints the summary table.
//!
//! ```bash
//! cargo run --release --example desk_experiment -- out/desk
//! ```

use sonar_slam::harness::{run_experiment, ExperimentConfig};

fn main() -> sonar_slam::Result<()> {
    let mut cfg = ExperimentConfig::desk();
    let write = match std::env::args().nth(1) {
        Some(dir) => {
            cfg.experiment.out_dir = dir.into();
            true
        }
        None => false,
    };
    let outcome = run_experiment(&cfg, write)?;

    println!(
        "{:<22} {:>6} {:>4} {:>8} {:>7} {:>7} {:>8}",
        "cell", "HPBW", "div", "RMSE m", "full", "total", "ANEES"
    );
    for row in &outcome.summary {
        let m = |p: Option<(f64, f64)>| p.map_or(f64::NAN, |x| x.0);
        println!(
            "{:<22} {:>6.1} {:>4} {:>8.3} {:>7.2} {:>7.2} {:>8.2}",
            row.cell.label(),
            row.hpbw_deg.unwrap_or(f64::NAN),
            row.diverged,
            m(row.rmse_pos),
            m(row.full),
            m(row.total),
            row.anees_final.unwrap_or(f64::NAN)
        );
    }
    if write {
        println!("artifacts in {}", cfg.experiment.out_dir.display());
    }
    Ok(())
}
