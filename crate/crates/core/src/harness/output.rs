use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{parse_cell, Cell, CellFailure, ExperimentConfig};
use crate::error::{Error, Result};
use crate::metrics::{anees, chi2_region, full_ids, mean_std, rmse_map, MapSubset, RunResult};
use crate::sensing::Strategy;
use crate::world::WorldMap;

/// Column order of `summary.csv`. Statistics cover undiverged runs only;
/// `_std` columns are sample standard deviations.
pub const SUMMARY_HEADER: [&str; 24] = [
    "algorithm",
    "strategy",
    "radius_index",
    "hpbw_deg",
    "runs",
    "diverged",
    "rmse_pos_mean",
    "rmse_pos_std",
    "rmse_bearing_mean",
    "rmse_bearing_std",
    "rmse_map_mean",
    "rmse_map_std",
    "rmse_map_common_mean",
    "rmse_map_common_std",
    "full_mean",
    "full_std",
    "total_mean",
    "total_std",
    "anees_final",
    "anees_mean",
    "chi2_lo",
    "chi2_hi",
    "skipped_measurements",
    "config_hash",
];

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub cell: Cell,
    pub hpbw_deg: Option<f64>,
    pub runs: usize,
    pub diverged: usize,
    pub rmse_pos: Option<(f64, f64)>,
    pub rmse_bearing: Option<(f64, f64)>,
    pub rmse_map: Option<(f64, f64)>,
    pub rmse_map_common: Option<(f64, f64)>,
    pub full: Option<(f64, f64)>,
    pub total: Option<(f64, f64)>,
    pub anees_final: Option<f64>,
    pub anees_mean: Option<f64>,
    pub chi2: Option<(f64, f64)>,
    pub skipped: usize,
    pub config_hash: String,
}

fn cell_order(cfg: &ExperimentConfig, cell: &Cell) -> usize {
    cfg.cells().iter().position(|c| c == cell).unwrap_or(usize::MAX)
}

/// Ids that are Full in every strategy of the same algorithm, seed and
/// radius (the passive run is shared by every radius).
fn common_sets(results: &[(Cell, RunResult)]) -> BTreeMap<(Cell, u64), BTreeSet<u32>> {
    let mut by_key: BTreeMap<(Cell, u64), BTreeSet<u32>> = BTreeMap::new();
    for (c, r) in results {
        by_key.insert((*c, r.seed), full_ids(&r.final_estimates()));
    }
    let mut out = BTreeMap::new();
    for (c, r) in results {
        let Some(radius) = c.sensing.radius_index else { continue };
        let mut set = by_key[&(*c, r.seed)].clone();
        let siblings = [
            (Strategy::Active, Some(radius)),
            (Strategy::Fused, Some(radius)),
            (Strategy::Passive, None),
        ];
        for (strategy, radius_index) in siblings {
            let mut key = *c;
            key.sensing.strategy = strategy;
            key.sensing.radius_index = radius_index;
            if let Some(other) = by_key.get(&(key, r.seed)) {
                set = set.intersection(other).copied().collect();
            }
        }
        out.insert((*c, r.seed), set);
    }
    out
}

/// Aggregates run results per cell, in the configuration's cell order.
/// `worlds` supplies ground truth for the common-subset map RMSE.
pub fn summarize(cfg: &ExperimentConfig, results: &[(Cell, RunResult)], worlds: &[WorldMap]) -> Vec<SummaryRow> {
    summarize_with(cfg, results, |seed| worlds.iter().find(|w| w.seed == seed).cloned())
}

fn summarize_with(
    cfg: &ExperimentConfig,
    results: &[(Cell, RunResult)],
    worlds: impl Fn(u64) -> Option<WorldMap>,
) -> Vec<SummaryRow> {
    let seeds = cfg.world_seeds();
    let seed_pos = |s: u64| seeds.iter().position(|&x| x == s).unwrap_or(usize::MAX);
    let mut sorted: Vec<&(Cell, RunResult)> = results.iter().collect();
    sorted.sort_by_key(|(c, r)| (cell_order(cfg, c), seed_pos(r.seed), r.seed));
    let common = common_sets(results);
    let mut world_cache: BTreeMap<u64, Option<WorldMap>> = BTreeMap::new();

    let mut rows = Vec::new();
    for cell in cfg.cells() {
        let runs: Vec<&RunResult> = sorted.iter().filter(|(c, _)| *c == cell).map(|(_, r)| r).collect();
        if runs.is_empty() {
            continue;
        }
        let kept: Vec<&RunResult> = runs.iter().copied().filter(|r| !r.diverged).collect();
        let col = |f: &dyn Fn(&RunResult) -> Option<f64>| -> Option<(f64, f64)> {
            mean_std(&kept.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
        };
        let common_rmse: Vec<f64> = kept
            .iter()
            .filter_map(|r| {
                let ids = common.get(&(cell, r.seed))?;
                let world = world_cache.entry(r.seed).or_insert_with(|| worlds(r.seed)).clone();
                let world = world.as_ref()?;
                rmse_map(&r.final_estimates(), |id| world.true_position(id), MapSubset::Common(ids))
            })
            .collect();
        let traces: Vec<&Vec<f64>> = kept.iter().map(|r| &r.nees).collect();
        let curve = anees(&traces).ok();
        rows.push(SummaryRow {
            cell,
            hpbw_deg: runs[0].hpbw_deg,
            runs: runs.len(),
            diverged: runs.len() - kept.len(),
            rmse_pos: col(&|r| Some(r.rmse_position)),
            rmse_bearing: col(&|r| Some(r.rmse_bearing)),
            rmse_map: col(&|r| r.rmse_map),
            rmse_map_common: mean_std(&common_rmse),
            full: col(&|r| Some(r.full as f64)),
            total: col(&|r| Some(r.total as f64)),
            anees_final: curve.as_ref().and_then(|c| c.last().copied()),
            anees_mean: curve.as_ref().map(|c| c.iter().sum::<f64>() / c.len().max(1) as f64),
            chi2: (!kept.is_empty()).then(|| chi2_region(kept.len(), 3, 0.05).ok()).flatten(),
            skipped: runs.iter().map(|r| r.skipped_measurements).sum(),
            config_hash: runs[0].config_hash.clone(),
        });
    }
    rows
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        let pair = |p: Option<(f64, f64)>| [opt(p.map(|x| x.0)), opt(p.map(|x| x.1))];
        let mut rec = vec![
            r.cell.algorithm.label().to_string(),
            r.cell.sensing.strategy.to_string(),
            r.cell.sensing.radius_index.map(|i| i.to_string()).unwrap_or_default(),
            opt(r.hpbw_deg),
            r.runs.to_string(),
            r.diverged.to_string(),
        ];
        for p in [r.rmse_pos, r.rmse_bearing, r.rmse_map, r.rmse_map_common, r.full, r.total] {
            rec.extend(pair(p));
        }
        rec.push(opt(r.anees_final));
        rec.push(opt(r.anees_mean));
        rec.extend(pair(r.chi2));
        rec.push(r.skipped.to_string());
        rec.push(r.config_hash.clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-step trace: `k, nees, ex, ey, etheta`.
pub fn write_run_trace<W: Write>(writer: W, result: &RunResult) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(["k", "nees", "ex", "ey", "etheta"])?;
    for (i, (n, e)) in result.nees.iter().zip(&result.errors).enumerate() {
        w.write_record([(i + 1).to_string(), n.to_string(), e[0].to_string(), e[1].to_string(), e[2].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub(super) fn write_neff<W: Write>(writer: W, neff: &[f64]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(["k", "neff"])?;
    for (k, n) in neff.iter().enumerate() {
        w.write_record([k.to_string(), n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// ANEES curve over undiverged runs with its concentration region.
pub fn write_anees<W: Write>(writer: W, curve: &[f64], region: (f64, f64)) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(["k", "anees", "chi2_lo", "chi2_hi"])?;
    for (i, a) in curve.iter().enumerate() {
        w.write_record([(i + 1).to_string(), a.to_string(), region.0.to_string(), region.1.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub(super) fn write_anees_files(out: &Path, cfg: &ExperimentConfig, results: &[(Cell, RunResult)]) -> Result<()> {
    let seeds = cfg.world_seeds();
    for cell in cfg.cells() {
        let mut kept: Vec<&RunResult> = results
            .iter()
            .filter(|(c, r)| *c == cell && !r.diverged)
            .map(|(_, r)| r)
            .collect();
        kept.sort_by_key(|r| seeds.iter().position(|&s| s == r.seed));
        if kept.is_empty() {
            continue;
        }
        let curve = anees(&kept.iter().map(|r| &r.nees).collect::<Vec<_>>())?;
        let region = chi2_region(kept.len(), 3, 0.05)?;
        write_anees(fs::File::create(out.join(format!("anees_{}.csv", cell.label())))?, &curve, region)?;
    }
    Ok(())
}

pub(super) fn write_failures(path: &Path, failures: &[CellFailure]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(["seed", "cell", "message"])?;
    for f in failures {
        w.write_record([f.seed.to_string(), f.cell.clone(), f.message.clone()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_result(path: &Path) -> Result<RunResult> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Rebuilds the summary from the `result_*.json` files in `dir`.
pub fn summarize_dir(dir: &Path, cfg: &ExperimentConfig) -> Result<Vec<SummaryRow>> {
    let mut results = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let Some(stem) = name.strip_prefix("result_").and_then(|n| n.strip_suffix(".json")) else {
            continue;
        };
        let (_, label) = stem
            .split_once('_')
            .ok_or_else(|| Error::Schema(format!("unexpected result file name {name}")))?;
        let cell = parse_cell(label)?;
        let r = read_result(&path)?;
        if r.config_hash != cfg.hash() {
            return Err(Error::Schema(format!("{name} was produced by a different configuration")));
        }
        results.push((cell, r));
    }
    Ok(summarize_with(cfg, &results, |seed| {
        fs::read_to_string(dir.join(format!("world_{seed}.json")))
            .ok()
            .and_then(|t| WorldMap::from_json(&t).ok())
    }))
}
