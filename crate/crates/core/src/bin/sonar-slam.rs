use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sonar_slam::harness::{self, ExperimentConfig, Grid};

#[derive(Parser)]
#[command(version, about = "Acoustic SLAM simulation workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML experiment configuration; overrides the grid preset.
    #[arg(long, env = "SONAR_SLAM_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "desk", env = "SONAR_SLAM_GRID")]
    grid: Grid,
    #[arg(long, env = "SONAR_SLAM_OUT")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte-Carlo grid and write every artifact.
    Run {
        #[command(flatten)]
        common: Common,
        /// Master seed.
        #[arg(long, env = "SONAR_SLAM_SEED")]
        seed: Option<u64>,
        #[arg(long, env = "SONAR_SLAM_JOBS")]
        jobs: Option<usize>,
    },
    /// Re-run one filter on a saved world and measurement log.
    Replay {
        #[command(flatten)]
        common: Common,
        /// World seed of the run.
        #[arg(long)]
        seed: u64,
        /// Cell label, for example `ekf-fused-r04`.
        #[arg(long)]
        cell: String,
        /// Filter seed; defaults to the one the experiment used.
        #[arg(long)]
        filter_seed: Option<u64>,
    },
    /// Rebuild summary.csv from the results in an output directory.
    Summarize {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> sonar_slam::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_toml(&std::fs::read_to_string(path)?)?,
        None => ExperimentConfig::preset(common.grid),
    };
    if let Some(out) = &common.out {
        cfg.experiment.out_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> sonar_slam::Result<bool> {
    match cli.command {
        Command::Run { common, seed, jobs } => {
            let mut cfg = load(&common)?;
            if let Some(s) = seed {
                cfg.experiment.master_seed = s;
            }
            if let Some(j) = jobs {
                cfg.experiment.jobs = j;
            }
            let outcome = harness::run_experiment(&cfg, true)?;
            for f in &outcome.failures {
                eprintln!("seed {} cell {}: {}", f.seed, f.cell, f.message);
            }
            println!(
                "{} runs, {} failures, summary in {}",
                outcome.results.len(),
                outcome.failures.len(),
                cfg.experiment.out_dir.join("summary.csv").display()
            );
            Ok(outcome.failures.is_empty())
        }
        Command::Replay {
            common,
            seed,
            cell,
            filter_seed,
        } => {
            let cfg = load(&common)?;
            let cell = harness::parse_cell(&cell)?;
            let (world, log) = harness::artifact_paths(&cfg.experiment.out_dir, seed, &cell);
            let (result, _) = harness::replay(&world, &log, &cell, &cfg, filter_seed)?;
            harness::write_run_trace(std::io::stdout().lock(), &result)?;
            Ok(true)
        }
        Command::Summarize { common } => {
            let cfg = load(&common)?;
            let rows = harness::summarize_dir(&cfg.experiment.out_dir, &cfg)?;
            harness::write_summary(&cfg.experiment.out_dir.join("summary.csv"), &rows)?;
            println!("{} rows", rows.len());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
