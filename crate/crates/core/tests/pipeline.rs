use std::fs;
use std::path::Path;
use std::process::Command;

use sonar_slam::harness::{
    self, parse_cell, read_result, run_experiment, summarize_dir, write_summary, Algorithm, ExperimentConfig,
};
use sonar_slam::sensing::{read_measurement_log, Strategy};
use sonar_slam::world::WorldMap;

fn tiny(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::desk();
    cfg.world.n_landmarks = 6;
    cfg.world.n_steps = 60;
    cfg.experiment.n_mc = 2;
    cfg.experiment.radius_indices = vec![0, 11];
    cfg.experiment.jobs = 2;
    cfg.experiment.out_dir = out.to_path_buf();
    cfg
}

#[test]
fn experiment_writes_every_artifact_and_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    let outcome = run_experiment(&cfg, true).unwrap();
    assert!(outcome.failures.is_empty());
    // 2 algorithms x (2 strategies x 2 radii + passive) x 2 worlds.
    assert_eq!(outcome.results.len(), 20);

    let out = dir.path();
    for seed in cfg.world_seeds() {
        let world = WorldMap::from_json(&fs::read_to_string(out.join(format!("world_{seed}.json"))).unwrap()).unwrap();
        assert_eq!(world.seed, seed);
        for cell in cfg.cells() {
            let tag = format!("{seed}_{}", cell.label());
            assert!(out.join(format!("run_{tag}.csv")).exists());
            let stored = read_result(&out.join(format!("result_{tag}.json"))).unwrap();
            let (replayed, _) = {
                let (w, m) = harness::artifact_paths(out, seed, &cell);
                harness::replay(&w, &m, &cell, &cfg, None).unwrap()
            };
            assert_eq!(stored, replayed, "replay of {tag}");
            assert_eq!(out.join(format!("neff_{tag}.csv")).exists(), cell.algorithm == Algorithm::Fastslam);
        }
    }
    for cell in cfg.cells() {
        assert!(out.join(format!("anees_{}.csv", cell.label())).exists() || outcome.results.iter().all(|(c, r)| *c != cell || r.diverged));
    }

    let first = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(first.starts_with("algorithm,strategy,radius_index,hpbw_deg,runs,diverged,"));

    // Rebuilding from the result files gives the same bytes.
    let rows = summarize_dir(out, &cfg).unwrap();
    assert_eq!(rows, outcome.summary);
    let rebuilt = out.join("rebuilt.csv");
    write_summary(&rebuilt, &rows).unwrap();
    assert_eq!(fs::read_to_string(&rebuilt).unwrap(), first);

    // A second run into a fresh directory is byte-identical.
    let dir2 = tempfile::tempdir().unwrap();
    run_experiment(&tiny(dir2.path()), true).unwrap();
    assert_eq!(fs::read_to_string(dir2.path().join("summary.csv")).unwrap(), first);
}

#[test]
fn measurement_logs_are_shared_by_algorithms() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    run_experiment(&cfg, true).unwrap();
    let seed = cfg.world_seeds()[0];
    let ekf = parse_cell("ekf-fused-r11").unwrap();
    let fast = parse_cell("fastslam-fused-r11").unwrap();
    assert_eq!(
        harness::artifact_paths(dir.path(), seed, &ekf),
        harness::artifact_paths(dir.path(), seed, &fast)
    );
    let (_, log) = harness::artifact_paths(dir.path(), seed, &ekf);
    let zs = read_measurement_log(fs::File::open(log).unwrap()).unwrap();
    assert!(zs.iter().all(|z| z.k % cfg.sensing.every_steps == 0));

    // Replaying the FastSLAM cell with another filter seed changes the trace.
    let (w, m) = harness::artifact_paths(dir.path(), seed, &fast);
    let (a, _) = harness::replay(&w, &m, &fast, &cfg, None).unwrap();
    let (b, _) = harness::replay(&w, &m, &fast, &cfg, Some(7)).unwrap();
    assert_ne!(a.nees, b.nees);
    assert_eq!(a.strategy, Strategy::Fused.to_string());
}

#[test]
fn summarize_rejects_results_from_another_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    run_experiment(&cfg, true).unwrap();
    let mut other = cfg.clone();
    other.world.n_steps += 1;
    assert!(summarize_dir(dir.path(), &other).is_err());
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sonar-slam"))
}

#[test]
fn command_line_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = tiny(&out);
    let cfg_path = dir.path().join("tiny.toml");
    fs::write(&cfg_path, toml::to_string(&cfg).unwrap()).unwrap();

    let status = cli().arg("run").arg("--config").arg(&cfg_path).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let summary = fs::read(out.join("summary.csv")).unwrap();

    let seed = cfg.world_seeds()[1];
    let replay = cli()
        .args(["replay", "--seed", &seed.to_string(), "--cell", "ekf-active-r00", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert_eq!(replay.status.code(), Some(0));
    let stored = fs::read(out.join(format!("run_{seed}_ekf-active-r00.csv"))).unwrap();
    assert_eq!(replay.stdout, stored);

    fs::remove_file(out.join("summary.csv")).unwrap();
    let status = cli().arg("summarize").arg("--config").arg(&cfg_path).status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert_eq!(fs::read(out.join("summary.csv")).unwrap(), summary);

    let bad = cli().args(["replay", "--seed", "1", "--cell", "ekf-bogus"]).arg("--config").arg(&cfg_path).status().unwrap();
    assert_eq!(bad.code(), Some(2));
}
