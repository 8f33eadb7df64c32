//! Experiment orchestration: the algorithm × strategy × beamwidth grid,
//! Monte-Carlo execution, persistence and summaries.
//!
//! Every seed gets one world. Measurement logs depend only on the world and
//! the sensing cell, so both algorithms consume identical measurements, and
//! the filter seed depends only on the world seed.

mod config;
mod output;

pub use config::{Algorithm, ExperimentConfig, ExperimentSection, FilterConfig, Grid};
pub use output::{
    read_result, summarize, summarize_dir, write_anees, write_run_trace, write_summary, SummaryRow, SUMMARY_HEADER,
};

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::ekf::Ekf;
use crate::error::{Error, Result};
use crate::fastslam::FastSlam;
use crate::metrics::{self, count_landmarks, gate_divergence, rmse_map, rmse_vehicle, FinalLandmark, MapSubset, RunResult};
use crate::rng;
use crate::sensing::{read_measurement_log, write_measurement_log, Measurement, SensingConfig, Sensor, Strategy};
use crate::slam::SlamFilter;
use crate::world::{generate_world, Pose, WorldMap};

/// Sensing half of a cell: which strategy and, unless passive, which radius.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SensingCell {
    pub strategy: Strategy,
    pub radius_index: Option<usize>,
}

impl SensingCell {
    pub fn label(&self) -> String {
        match self.radius_index {
            Some(i) => format!("{}-r{i:02}", self.strategy),
            None => self.strategy.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub algorithm: Algorithm,
    pub sensing: SensingCell,
}

impl Cell {
    pub fn label(&self) -> String {
        format!("{}-{}", self.algorithm.label(), self.sensing.label())
    }
}

impl ExperimentConfig {
    pub fn sensing_cells(&self) -> Vec<SensingCell> {
        let mut out = Vec::new();
        for &strategy in &self.experiment.strategies {
            if strategy.uses_active() {
                for &i in &self.experiment.radius_indices {
                    out.push(SensingCell {
                        strategy,
                        radius_index: Some(i),
                    });
                }
            } else {
                out.push(SensingCell {
                    strategy,
                    radius_index: None,
                });
            }
        }
        out
    }

    pub fn cells(&self) -> Vec<Cell> {
        let sensing = self.sensing_cells();
        self.experiment
            .algorithms
            .iter()
            .flat_map(|&algorithm| sensing.iter().map(move |&s| Cell { algorithm, sensing: s }))
            .collect()
    }

    pub fn sensing_config(&self, cell: &SensingCell) -> SensingConfig {
        let radius = cell.radius_index.map(|i| self.radii()[i]).unwrap_or(0.0);
        SensingConfig {
            strategy: cell.strategy,
            emitter_radius: radius,
            params: self.sensing.clone(),
        }
    }

    pub fn world_seeds(&self) -> Vec<u64> {
        (0..self.experiment.n_mc as u64)
            .map(|i| rng::iteration_seed(self.experiment.master_seed, i))
            .collect()
    }

    /// Hash of every setting that affects results. The output directory and
    /// the worker count are excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.experiment.out_dir = PathBuf::new();
        c.experiment.jobs = 0;
        rng::config_hash(&c)
    }
}

/// Seed of the filter randomness for runs on a given world.
pub fn filter_seed(world_seed: u64) -> u64 {
    rng::derive_seed(world_seed, rng::FILTER, &[])
}

/// Measurements at every sensing step, `k = 0, e, 2e, … ≤ N_T`, where `k`
/// counts completed control steps.
pub fn simulate_measurements(world: &WorldMap, cfg: &ExperimentConfig, cell: &SensingCell) -> Result<Vec<Measurement>> {
    let sensor = Sensor::new(&cfg.acoustics, &cfg.sensing_config(cell))?;
    let every = cfg.sensing.every_steps;
    let mut out = Vec::new();
    for k in (0..=world.trajectory.len()).step_by(every) {
        out.extend(sensor.sense(world, &world.pose_at(k), k)?);
    }
    Ok(out)
}

/// Trace of one filter run before metrics are derived.
pub struct FilterTrace {
    pub estimates: Vec<Pose>,
    pub nees: Vec<f64>,
    pub landmarks: Vec<crate::slam::LandmarkEstimate>,
    pub neff: Option<Vec<f64>>,
    pub skipped: usize,
}

fn drive<F: SlamFilter>(mut filter: F, world: &WorldMap, measurements: &[Measurement], u: &crate::world::ControlInput) -> Result<(F, Vec<Pose>, Vec<f64>)> {
    let n = world.trajectory.len();
    let mut by_step: Vec<Vec<Measurement>> = vec![Vec::new(); n + 1];
    for m in measurements {
        if m.k > n {
            return Err(Error::Schema(format!("measurement at step {} beyond {} steps", m.k, n)));
        }
        by_step[m.k].push(*m);
    }
    filter.correct(&by_step[0])?;
    let mut estimates = Vec::with_capacity(n);
    let mut nees = Vec::with_capacity(n);
    for (k, zs) in by_step.iter().enumerate().skip(1) {
        filter.predict(u)?;
        filter.correct(zs)?;
        let est = filter.pose();
        nees.push(metrics::nees(&est, &world.pose_at(k), &filter.pose_covariance()));
        estimates.push(est);
    }
    Ok((filter, estimates, nees))
}

/// Runs one estimator over a measurement log.
pub fn run_filter(
    world: &WorldMap,
    measurements: &[Measurement],
    algorithm: Algorithm,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<FilterTrace> {
    let u = cfg.world.nominal_control();
    let start = world.initial_pose;
    let noise = cfg.noise();
    let ray = cfg.filter.ray.clone();
    match algorithm {
        Algorithm::Ekf => {
            let f = Ekf::new(start, noise, ray, cfg.world.wheelbase)?;
            let (f, estimates, nees) = drive(f, world, measurements, &u)?;
            Ok(FilterTrace {
                estimates,
                nees,
                landmarks: f.landmarks(),
                neff: None,
                skipped: f.skipped(),
            })
        }
        Algorithm::Fastslam => {
            let f = FastSlam::new(start, noise, ray, cfg.filter.fastslam.clone(), cfg.world.wheelbase, seed)?;
            let (f, estimates, nees) = drive(f, world, measurements, &u)?;
            Ok(FilterTrace {
                estimates,
                nees,
                landmarks: f.landmarks(),
                neff: Some(f.neff_log().to_vec()),
                skipped: f.skipped(),
            })
        }
    }
}

/// Derives the metrics of a run.
pub fn evaluate(world: &WorldMap, cell: &Cell, cfg: &ExperimentConfig, trace: &FilterTrace) -> Result<RunResult> {
    let truth: Vec<Pose> = (1..=world.trajectory.len()).map(|k| world.pose_at(k)).collect();
    let (rmse_position, rmse_bearing) = rmse_vehicle(&trace.estimates, &truth)?;
    let (full, total) = count_landmarks(&trace.landmarks);
    Ok(RunResult {
        seed: world.seed,
        algorithm: cell.algorithm.label().to_string(),
        strategy: cell.sensing.strategy.to_string(),
        hpbw_deg: cell.sensing.radius_index.map(|i| cfg.hpbw_deg(cfg.radii()[i])),
        config_hash: cfg.hash(),
        errors: trace
            .estimates
            .iter()
            .zip(&truth)
            .map(|(e, t)| {
                let d = metrics::pose_error(e, t);
                [d.x, d.y, d.z]
            })
            .collect(),
        diverged: gate_divergence(&trace.nees, cfg.nees_cap(cell.algorithm)),
        nees: trace.nees.clone(),
        landmarks: trace
            .landmarks
            .iter()
            .map(|l| FinalLandmark {
                id: l.id,
                x: l.mean.x,
                y: l.mean.y,
                status: l.status,
            })
            .collect(),
        full,
        total,
        rmse_position,
        rmse_bearing,
        rmse_map: rmse_map(&trace.landmarks, |id| world.true_position(id), MapSubset::AllFull),
        skipped_measurements: trace.skipped,
    })
}

/// A cell that returned an error instead of a result.
#[derive(Clone, Debug, PartialEq)]
pub struct CellFailure {
    pub seed: u64,
    pub cell: String,
    pub message: String,
}

pub struct ExperimentOutcome {
    pub results: Vec<(Cell, RunResult)>,
    pub failures: Vec<CellFailure>,
    pub summary: Vec<SummaryRow>,
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Runs the whole grid, writing every artifact under `experiment.out_dir`
/// when `write` is set. Results are ordered by (seed, cell) regardless of
/// scheduling.
pub fn run_experiment(cfg: &ExperimentConfig, write: bool) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let out = cfg.experiment.out_dir.clone();
    if write {
        fs::create_dir_all(&out)?;
        fs::write(out.join("config.toml"), toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))?)?;
    }
    let seeds = cfg.world_seeds();
    let cells = cfg.cells();
    let sensing_cells = cfg.sensing_cells();

    pool(cfg.experiment.jobs)?.install(|| -> Result<ExperimentOutcome> {
        let worlds = seeds
            .par_iter()
            .map(|&s| generate_world(&cfg.world, s))
            .collect::<Vec<Result<WorldMap>>>();

        let mut tasks = Vec::new();
        for (w, world) in worlds.iter().enumerate() {
            if let Ok(world) = world {
                if write {
                    fs::write(out.join(format!("world_{}.json", world.seed)), world.to_json()?)?;
                }
                for sc in &sensing_cells {
                    tasks.push((w, *sc));
                }
            }
        }
        let logs: Vec<Result<Vec<Measurement>>> = tasks
            .par_iter()
            .map(|(w, sc)| {
                let world = worlds[*w].as_ref().expect("filtered above");
                let log = simulate_measurements(world, cfg, sc)?;
                if write && cfg.experiment.write_measurements {
                    let path = out.join(format!("meas_{}_{}.csv", world.seed, sc.label()));
                    write_measurement_log(fs::File::create(path)?, &log)?;
                }
                Ok(log)
            })
            .collect();

        let runs: Vec<(usize, usize, Cell)> = tasks
            .iter()
            .enumerate()
            .flat_map(|(t, (w, sc))| {
                cells
                    .iter()
                    .filter(move |c| c.sensing == *sc)
                    .map(move |c| (t, *w, *c))
            })
            .collect();
        let outcomes: Vec<std::result::Result<(Cell, RunResult), CellFailure>> = runs
            .par_iter()
            .map(|&(t, w, cell)| {
                let world = worlds[w].as_ref().expect("filtered above");
                let fail = |e: Error| CellFailure {
                    seed: world.seed,
                    cell: cell.label(),
                    message: e.to_string(),
                };
                let log = logs[t].as_ref().map_err(|e| fail(Error::InvalidInput(e.to_string())))?;
                let trace = run_filter(world, log, cell.algorithm, cfg, filter_seed(world.seed)).map_err(fail)?;
                let result = evaluate(world, &cell, cfg, &trace).map_err(fail)?;
                if write {
                    persist_run(&out, &cell, &result, &trace).map_err(fail)?;
                }
                Ok((cell, result))
            })
            .collect();

        let mut failures: Vec<CellFailure> = seeds
            .iter()
            .zip(&worlds)
            .filter_map(|(s, w)| {
                w.as_ref().err().map(|e| CellFailure {
                    seed: *s,
                    cell: "world".into(),
                    message: e.to_string(),
                })
            })
            .collect();
        let mut results = Vec::new();
        for o in outcomes {
            match o {
                Ok(r) => results.push(r),
                Err(f) => failures.push(f),
            }
        }
        let ok_worlds: Vec<WorldMap> = worlds.into_iter().filter_map(|w| w.ok()).collect();
        let summary = summarize(cfg, &results, &ok_worlds);
        if write {
            write_summary(&out.join("summary.csv"), &summary)?;
            output::write_anees_files(&out, cfg, &results)?;
            output::write_failures(&out.join("failures.csv"), &failures)?;
        }
        Ok(ExperimentOutcome {
            results,
            failures,
            summary,
        })
    })
}

fn persist_run(out: &Path, cell: &Cell, result: &RunResult, trace: &FilterTrace) -> Result<()> {
    let tag = format!("{}_{}", result.seed, cell.label());
    write_run_trace(fs::File::create(out.join(format!("run_{tag}.csv")))?, result)?;
    fs::write(out.join(format!("result_{tag}.json")), serde_json::to_string_pretty(result)?)?;
    if let Some(neff) = &trace.neff {
        output::write_neff(fs::File::create(out.join(format!("neff_{tag}.csv")))?, neff)?;
    }
    Ok(())
}

/// Re-runs a filter on a saved world and measurement log.
pub fn replay(
    world_path: &Path,
    log_path: &Path,
    cell: &Cell,
    cfg: &ExperimentConfig,
    seed: Option<u64>,
) -> Result<(RunResult, FilterTrace)> {
    let world = WorldMap::from_json(&fs::read_to_string(world_path)?)?;
    if world.config != cfg.world {
        return Err(Error::Schema("world file was generated with a different world configuration".into()));
    }
    let log = read_measurement_log(fs::File::open(log_path)?)?;
    let trace = run_filter(&world, &log, cell.algorithm, cfg, seed.unwrap_or_else(|| filter_seed(world.seed)))?;
    let result = evaluate(&world, cell, cfg, &trace)?;
    Ok((result, trace))
}

/// Parses a cell label of the form `<algorithm>-<strategy>[-rNN]`.
pub fn parse_cell(label: &str) -> Result<Cell> {
    let bad = || Error::InvalidInput(format!("bad cell label '{label}'"));
    let mut parts = label.split('-');
    let algorithm: Algorithm = parts.next().ok_or_else(bad)?.parse()?;
    let strategy: Strategy = parts.next().ok_or_else(bad)?.parse()?;
    let radius_index = match parts.next() {
        Some(r) => Some(r.strip_prefix('r').ok_or_else(bad)?.parse::<usize>().map_err(|_| bad())?),
        None => None,
    };
    if parts.next().is_some() || strategy.uses_active() != radius_index.is_some() {
        return Err(bad());
    }
    Ok(Cell {
        algorithm,
        sensing: SensingCell { strategy, radius_index },
    })
}

/// Default artifact paths of a run inside an output directory.
pub fn artifact_paths(out: &Path, seed: u64, cell: &Cell) -> (PathBuf, PathBuf) {
    (
        out.join(format!("world_{seed}.json")),
        out.join(format!("meas_{seed}_{}.csv", cell.sensing.label())),
    )
}
