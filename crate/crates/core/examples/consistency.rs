//! ANEES of a small Monte-Carlo batch against its chi-square region.

use sonar_slam::harness::{filter_seed, run_filter, simulate_measurements, Algorithm, ExperimentConfig, SensingCell};
use sonar_slam::metrics::{anees, chi2_region, gate_divergence};
use sonar_slam::sensing::Strategy;
use sonar_slam::world::generate_world;

fn main() -> sonar_slam::Result<()> {
    for runs in [100, 107] {
        let (lo, hi) = chi2_region(runs, 3, 0.05)?;
        println!("95% region for {runs} runs: [{lo:.3}, {hi:.3}]");
    }

    let mut cfg = ExperimentConfig::desk();
    cfg.experiment.n_mc = 6;
    let cell = SensingCell { strategy: Strategy::Active, radius_index: Some(0) };
    let cap = cfg.nees_cap(Algorithm::Ekf);
    let mut kept = Vec::new();
    for seed in cfg.world_seeds() {
        let world = generate_world(&cfg.world, seed)?;
        let log = simulate_measurements(&world, &cfg, &cell)?;
        let trace = run_filter(&world, &log, Algorithm::Ekf, &cfg, filter_seed(seed))?;
        let diverged = gate_divergence(&trace.nees, cap);
        println!("seed {seed:>20}: max NEES {:>7.2}{}", trace.nees.iter().cloned().fold(0.0, f64::max), if diverged { "  (gated)" } else { "" });
        if !diverged {
            kept.push(trace.nees);
        }
    }
    if kept.is_empty() {
        println!("every run diverged");
        return Ok(());
    }
    let curve = anees(&kept)?;
    let (lo, hi) = chi2_region(kept.len(), 3, 0.05)?;
    let inside = curve.iter().filter(|a| (lo..=hi).contains(*a)).count();
    println!(
        "{} runs kept; ANEES at the last step {:.2}, inside [{lo:.2}, {hi:.2}] for {inside} of {} steps",
        kept.len(),
        curve.last().unwrap(),
        curve.len()
    );
    Ok(())
}
