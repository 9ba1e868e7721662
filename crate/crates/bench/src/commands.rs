//! The four subcommands as library functions.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mpsca::channelgen::{draw_instance, ChannelModelConfig};
use mpsca::oracle::{oracle, OracleResult};
use mpsca::select::solve_joint;
use mpsca::{ProblemInstance, SelectionResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::instance::{instance_file_name, InstanceFile};
use crate::results::{
    summarize, write_json, write_results_csv, write_summary_csv, ResultRow, ResultsDocument,
    SummaryRow, METHOD_ORACLE, METHOD_SPMP, RESULTS_FORMAT_VERSION,
};

pub const DEFAULT_GEN_DIR: &str = "instances";
pub const DEFAULT_BENCH_DIR: &str = "bench_out";
pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_JSON: &str = "results.json";
pub const SUMMARY_CSV: &str = "summary.csv";

fn channel_config(cfg: &ExperimentConfig) -> ChannelModelConfig {
    ChannelModelConfig {
        noise_var: cfg.noise_var,
        ..ChannelModelConfig::new(cfg.n, cfg.m, cfg.seed)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start {workers} workers: {e}")))
}

fn elapsed_ms(start: Instant, timing: bool) -> Option<f64> {
    timing.then(|| start.elapsed().as_secs_f64() * 1e3)
}

/// Writes `instance_0000.json`, ... for each trial and returns the paths.
pub fn cmd_gen(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_GEN_DIR));
    create_dir(&dir)?;
    let chan = channel_config(cfg);
    (0..cfg.trials)
        .map(|trial| {
            let inst = draw_instance(&chan, trial, cfg.power)?;
            let path = dir.join(instance_file_name(trial));
            InstanceFile::generated(&chan, trial, &inst).write(&path)?;
            Ok(path)
        })
        .collect()
}

pub fn load_instance(path: &Path) -> Result<(InstanceFile, ProblemInstance)> {
    let file = InstanceFile::read(path)?;
    let inst = file.to_instance()?;
    Ok((file, inst))
}

/// Joint selection on one instance file with the single K in `cfg`.
pub fn cmd_solve(instance: &Path, cfg: &ExperimentConfig) -> Result<SelectionResult> {
    let (_, inst) = load_instance(instance)?;
    let k = cfg.single_k(inst.n_antennas())?;
    let result = pool(cfg.workers)?.install(|| solve_joint(&inst, k, &cfg.sca, &cfg.bisection))?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOutput {
    pub row: ResultRow,
    pub oracle: OracleResult,
}

fn oracle_row(trial: u64, k: usize, res: &OracleResult, wall_ms: Option<f64>) -> ResultRow {
    ResultRow {
        trial,
        k,
        method: METHOD_ORACLE.to_string(),
        min_snr_db: Some(res.best_min_snr.db),
        subset: res.best_subset.clone(),
        lambda_star: None,
        sca_iters: None,
        mp_iters: None,
        wall_ms,
        error: None,
    }
}

fn spmp_row(trial: u64, k: usize, res: &SelectionResult, wall_ms: Option<f64>) -> ResultRow {
    ResultRow {
        trial,
        k,
        method: METHOD_SPMP.to_string(),
        min_snr_db: Some(res.min_snr.db),
        subset: res.selected.clone(),
        lambda_star: Some(res.lambda_star),
        sca_iters: Some(res.sca_iterations),
        mp_iters: Some(res.mp_iterations),
        wall_ms,
        error: None,
    }
}

/// Exhaustive (or, for one user, analytic) reference on one instance file.
pub fn cmd_oracle(instance: &Path, cfg: &ExperimentConfig, restarts: usize) -> Result<OracleOutput> {
    let (file, inst) = load_instance(instance)?;
    let k = cfg.single_k(inst.n_antennas())?;
    let start = Instant::now();
    let res = pool(cfg.workers)?.install(|| oracle(&inst, k, &cfg.sca, restarts, cfg.subset_cap))?;
    Ok(OracleOutput {
        row: oracle_row(file.trial(), k, &res, elapsed_ms(start, cfg.timing)),
        oracle: res,
    })
}

fn trial_rows(cfg: &ExperimentConfig, chan: &ChannelModelConfig, trial: u64) -> Vec<ResultRow> {
    let inst = match draw_instance(chan, trial, cfg.power) {
        Ok(inst) => inst,
        Err(e) => {
            let mut rows = Vec::new();
            for &k in &cfg.ks {
                rows.push(ResultRow::failed(trial, k, METHOD_SPMP, e.to_string()));
                if cfg.oracle {
                    rows.push(ResultRow::failed(trial, k, METHOD_ORACLE, e.to_string()));
                }
            }
            return rows;
        }
    };
    let mut rows = Vec::new();
    for &k in &cfg.ks {
        let start = Instant::now();
        rows.push(match solve_joint(&inst, k, &cfg.sca, &cfg.bisection) {
            Ok(res) => spmp_row(trial, k, &res, elapsed_ms(start, cfg.timing)),
            Err(e) => ResultRow::failed(trial, k, METHOD_SPMP, e.to_string()),
        });
        if cfg.oracle {
            let start = Instant::now();
            rows.push(match oracle(&inst, k, &cfg.sca, cfg.oracle_restarts, cfg.subset_cap) {
                Ok(res) => oracle_row(trial, k, &res, elapsed_ms(start, cfg.timing)),
                Err(e) => ResultRow::failed(trial, k, METHOD_ORACLE, e.to_string()),
            });
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    pub files: Vec<PathBuf>,
}

impl BenchReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.is_ok()).count()
    }
}

/// Monte-Carlo sweep over trials and K. Rows come out in `(trial, K,
/// method)` order whatever the worker count.
pub fn cmd_bench(cfg: &ExperimentConfig) -> Result<BenchReport> {
    cfg.check_ks(cfg.n)?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_BENCH_DIR));
    create_dir(&dir)?;
    let chan = channel_config(cfg);
    let per_trial: Vec<Vec<ResultRow>> = pool(cfg.workers)?.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|trial| trial_rows(cfg, &chan, trial))
            .collect()
    });
    let rows: Vec<ResultRow> = per_trial.into_iter().flatten().collect();
    let summary = summarize(&rows);

    let mut files = Vec::new();
    if cfg.format.csv() {
        let path = dir.join(RESULTS_CSV);
        write_results_csv(&rows, &path)?;
        files.push(path);
        let path = dir.join(SUMMARY_CSV);
        write_summary_csv(&summary, &path)?;
        files.push(path);
    }
    if cfg.format.json() {
        let path = dir.join(RESULTS_JSON);
        let doc = ResultsDocument {
            format_version: RESULTS_FORMAT_VERSION,
            config: cfg.clone(),
            rows: rows.clone(),
            summary: summary.clone(),
        };
        write_json(&doc, &path)?;
        files.push(path);
    }
    Ok(BenchReport { rows, summary, files })
}
