//! Writes the artifacts of a tiny experiment, then replays one run from its
//! world file and measurement log.

use sonar_slam::harness::{artifact_paths, parse_cell, read_result, replay, run_experiment, ExperimentConfig};

fn main() -> sonar_slam::Result<()> {
    let dir = std::env::temp_dir().join(format!("sonar-slam-replay-{}", std::process::id()));
    let mut cfg = ExperimentConfig::desk();
    cfg.world.n_steps = 120;
    cfg.experiment.n_mc = 1;
    cfg.experiment.radius_indices = vec![8];
    cfg.experiment.out_dir = dir.clone();
    run_experiment(&cfg, true)?;

    let seed = cfg.world_seeds()[0];
    let cell = parse_cell("fastslam-fused-r08")?;
    let (world, log) = artifact_paths(&dir, seed, &cell);
    let stored = read_result(&dir.join(format!("result_{seed}_{}.json", cell.label())))?;
    let (same, _) = replay(&world, &log, &cell, &cfg, None)?;
    let (other, _) = replay(&world, &log, &cell, &cfg, Some(1))?;

    println!("replay with the recorded filter seed reproduces the run: {}", same == stored);
    println!(
        "another filter seed: final NEES {:.3} vs {:.3}",
        other.nees.last().unwrap(),
        stored.nees.last().unwrap()
    );
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
