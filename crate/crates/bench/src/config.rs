//! Experiment settings. Every value can come from a flag, a JSON config file
//! (`--config`) or a built-in default, in that order of precedence. The worker
//! count additionally falls back to `MPSCA_WORKERS` before the default.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use mpsca::oracle::{DEFAULT_ORACLE_RESTARTS, DEFAULT_SUBSET_CAP};
use mpsca::{BisectionConfig, LambdaScale, ProbeInit, ScaConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const WORKERS_ENV: &str = "MPSCA_WORKERS";

/// Inclusive range of K values: `3`, `2-5` or `2..=5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "KSpecRaw", into = "String")]
pub struct KRange {
    pub lo: usize,
    pub hi: usize,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum KSpecRaw {
    One(usize),
    Text(String),
}

impl TryFrom<KSpecRaw> for KRange {
    type Error = String;

    fn try_from(raw: KSpecRaw) -> std::result::Result<Self, String> {
        match raw {
            KSpecRaw::One(k) => Ok(KRange { lo: k, hi: k }),
            KSpecRaw::Text(s) => s.parse(),
        }
    }
}

impl FromStr for KRange {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad K value {t:?} in {s:?}"))
        };
        let (lo, hi) = match s.split_once("..=").or_else(|| s.split_once('-')) {
            Some((a, b)) => (parse(a)?, parse(b)?),
            None => {
                let k = parse(s)?;
                (k, k)
            }
        };
        if lo > hi {
            return Err(format!("empty K range {s:?}"));
        }
        Ok(KRange { lo, hi })
    }
}

impl fmt::Display for KRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lo == self.hi {
            write!(f, "{}", self.lo)
        } else {
            write!(f, "{}-{}", self.lo, self.hi)
        }
    }
}

impl From<KRange> for String {
    fn from(r: KRange) -> String {
        r.to_string()
    }
}

/// Expands ranges into a sorted, de-duplicated K list.
pub fn expand_ks(ranges: &[KRange]) -> Vec<usize> {
    let mut ks: Vec<usize> = ranges.iter().flat_map(|r| r.lo..=r.hi).collect();
    ks.sort_unstable();
    ks.dedup();
    ks
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "both" => Ok(OutputFormat::Both),
            _ => Err(format!("unknown format {s:?} (csv, json or both)")),
        }
    }
}

fn parse_lambda_scale(s: &str) -> std::result::Result<LambdaScale, String> {
    match s {
        "normalized" => Ok(LambdaScale::Normalized),
        "absolute" => Ok(LambdaScale::Absolute),
        _ => Err(format!("unknown lambda scale {s:?} (normalized or absolute)")),
    }
}

fn parse_probe_init(s: &str) -> std::result::Result<ProbeInit, String> {
    match s {
        "anchor" => Ok(ProbeInit::Anchor),
        "fresh" => Ok(ProbeInit::Fresh),
        "warm" => Ok(ProbeInit::Warm),
        _ => Err(format!("unknown probe init {s:?} (anchor, fresh or warm)")),
    }
}

/// Settings shared by all subcommands; each field is optional so flags and
/// config files can be layered.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Number of antennas
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of users
    #[arg(long)]
    pub m: Option<usize>,
    /// Active antenna counts: repeat the flag or use 2,3 or 2-5
    #[arg(long = "k", value_delimiter = ',')]
    pub k: Option<Vec<KRange>>,
    /// Total transmit power
    #[arg(long)]
    pub power: Option<f64>,
    /// Receiver noise variance (all users)
    #[arg(long)]
    pub noise_var: Option<f64>,
    /// Monte-Carlo trials
    #[arg(long)]
    pub trials: Option<u64>,
    /// Base seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// SCA iterations per solve [default: 10]
    #[arg(long)]
    pub sca_iters: Option<usize>,
    /// Mirror-prox iterations per SCA subproblem [default: 1000]
    #[arg(long)]
    pub mp_iters: Option<usize>,
    /// Lower end of the regularization search [default: 0]
    #[arg(long)]
    pub lambda_lb: Option<f64>,
    /// Upper end of the regularization search [default: 2]
    #[arg(long)]
    pub lambda_ub: Option<f64>,
    /// Bisection depth [default: 30]
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Relative threshold for active antenna groups [default: 1e-3]
    #[arg(long)]
    pub tau_rel: Option<f64>,
    /// Restarts of the final re-solve; for `oracle`, restarts per subset
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Restarts per subset for oracle rows in `bench` [default: 5]
    #[arg(long)]
    pub oracle_restarts: Option<usize>,
    /// Largest number of subsets the exhaustive oracle will enumerate
    #[arg(long)]
    pub subset_cap: Option<u128>,
    /// normalized or absolute
    #[arg(long, value_parser = parse_lambda_scale)]
    pub lambda_scale: Option<LambdaScale>,
    /// Start of each bisection probe: anchor, fresh or warm
    #[arg(long, value_parser = parse_probe_init)]
    pub probe_init: Option<ProbeInit>,
    /// Worker threads (also MPSCA_WORKERS)
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory (gen, bench) or file (solve, oracle)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv, json or both
    #[arg(long)]
    pub format: Option<OutputFormat>,
    /// Also run the exhaustive oracle in `bench`
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub oracle: Option<bool>,
    /// Record wall-clock times (results are then not byte-reproducible)
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub timing: Option<bool>,
}

macro_rules! layer {
    ($top:expr, $bottom:expr, $($field:ident),+) => {
        Settings { $($field: $top.$field.clone().or_else(|| $bottom.$field.clone())),+ }
    };
}

impl Settings {
    /// Fields set in `self` win over those in `lower`.
    pub fn over(&self, lower: &Settings) -> Settings {
        layer!(
            self, lower, n, m, k, power, noise_var, trials, seed, sca_iters, mp_iters, lambda_lb,
            lambda_ub, max_depth, tau_rel, restarts, oracle_restarts, subset_cap, lambda_scale,
            probe_init, workers, out, format, oracle, timing
        )
    }

    pub fn read(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::json(path, &e))
    }
}

/// Fully resolved settings, echoed into result metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m: usize,
    pub ks: Vec<usize>,
    pub power: f64,
    pub noise_var: f64,
    pub trials: u64,
    pub seed: u64,
    pub sca: ScaConfig,
    pub bisection: BisectionConfig,
    pub oracle: bool,
    pub oracle_restarts: usize,
    pub subset_cap: u128,
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub timing: bool,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn env_workers() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Validation(format!("{WORKERS_ENV}={v:?} is not a worker count"))),
        Err(_) => Ok(None),
    }
}

impl ExperimentConfig {
    /// Resolves flags over an optional config file over defaults. The
    /// defaults are the N = 30, M = 50, P = 10 setup with unit noise.
    pub fn resolve(flags: &Settings, file: Option<&Settings>) -> Result<ExperimentConfig> {
        let s = match file {
            Some(f) => flags.over(f),
            None => flags.clone(),
        };
        let d = ScaConfig::default();
        let b = BisectionConfig::default();
        let cfg = ExperimentConfig {
            n: s.n.unwrap_or(30),
            m: s.m.unwrap_or(50),
            ks: expand_ks(s.k.as_deref().unwrap_or(&[])),
            power: s.power.unwrap_or(10.0),
            noise_var: s.noise_var.unwrap_or(1.0),
            trials: s.trials.unwrap_or(200),
            seed: s.seed.unwrap_or(0),
            sca: ScaConfig {
                sca_iters: s.sca_iters.unwrap_or(d.sca_iters),
                mp_iters: s.mp_iters.unwrap_or(d.mp_iters),
                tau_rel: s.tau_rel.unwrap_or(d.tau_rel),
                seed: s.seed.unwrap_or(0),
                restarts: s.restarts.unwrap_or(d.restarts),
                lambda_scale: s.lambda_scale.unwrap_or(d.lambda_scale),
                probe_init: s.probe_init.unwrap_or(d.probe_init),
                ..d
            },
            bisection: BisectionConfig {
                lambda_lb: s.lambda_lb.unwrap_or(b.lambda_lb),
                lambda_ub: s.lambda_ub.unwrap_or(b.lambda_ub),
                max_depth: s.max_depth.unwrap_or(b.max_depth),
            },
            oracle: s.oracle.unwrap_or(false),
            oracle_restarts: s.oracle_restarts.unwrap_or(DEFAULT_ORACLE_RESTARTS),
            subset_cap: s.subset_cap.unwrap_or(DEFAULT_SUBSET_CAP),
            workers: match s.workers {
                Some(w) => w,
                None => env_workers()?.unwrap_or_else(default_workers),
            },
            out: s.out.clone(),
            format: s.format.unwrap_or(OutputFormat::Both),
            timing: s.timing.unwrap_or(false),
        };
        cfg.validate_common()?;
        Ok(cfg)
    }

    fn validate_common(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Validation(msg));
        if self.n == 0 || self.m == 0 {
            return bad("n and m must be at least 1".into());
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return bad(format!("power must be positive, got {}", self.power));
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            return bad(format!("noise variance must be positive, got {}", self.noise_var));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.oracle_restarts == 0 {
            return bad("oracle restarts must be at least 1".into());
        }
        self.sca.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        self.bisection.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(())
    }

    /// K list non-empty and inside `[1, n]`.
    pub fn check_ks(&self, n: usize) -> Result<()> {
        if self.ks.is_empty() {
            return Err(CliError::Validation("no K values given (use --k)".into()));
        }
        if let Some(&k) = self.ks.iter().find(|&&k| k == 0 || k > n) {
            return Err(CliError::Validation(format!("K = {k} outside [1, {n}]")));
        }
        Ok(())
    }

    pub fn single_k(&self, n: usize) -> Result<usize> {
        self.check_ks(n)?;
        match self.ks.as_slice() {
            [k] => Ok(*k),
            ks => Err(CliError::Validation(format!("expected a single K, got {ks:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_specs() {
        assert_eq!("3".parse::<KRange>().unwrap(), KRange { lo: 3, hi: 3 });
        assert_eq!("2-5".parse::<KRange>().unwrap(), KRange { lo: 2, hi: 5 });
        assert_eq!("2..=4".parse::<KRange>().unwrap(), KRange { lo: 2, hi: 4 });
        assert!("5-2".parse::<KRange>().is_err());
        assert!("x".parse::<KRange>().is_err());
        let ks = expand_ks(&["4".parse().unwrap(), "2-4".parse().unwrap()]);
        assert_eq!(ks, vec![2, 3, 4]);
    }

    #[test]
    fn k_from_json_numbers_or_strings() {
        let s: Settings = serde_json::from_str(r#"{"k": [5, "10-12"]}"#).unwrap();
        let ks = expand_ks(s.k.as_deref().unwrap());
        assert_eq!(ks, vec![5, 10, 11, 12]);
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file: Settings = serde_json::from_str(r#"{"n": 8, "m": 4, "trials": 3, "mp_iters": 200}"#).unwrap();
        let flags = Settings {
            n: Some(6),
            workers: Some(1),
            ..Default::default()
        };
        let cfg = ExperimentConfig::resolve(&flags, Some(&file)).unwrap();
        assert_eq!((cfg.n, cfg.m, cfg.trials), (6, 4, 3));
        assert_eq!(cfg.sca.mp_iters, 200);
        assert_eq!(cfg.sca.sca_iters, 10);
        assert_eq!(cfg.power, 10.0);
        assert_eq!(cfg.format, OutputFormat::Both);
    }

    #[test]
    fn unknown_config_key_rejected() {
        assert!(serde_json::from_str::<Settings>(r#"{"antennas": 4}"#).is_err());
    }

    #[test]
    fn zero_trials_rejected() {
        let flags = Settings {
            trials: Some(0),
            workers: Some(1),
            ..Default::default()
        };
        assert!(matches!(
            ExperimentConfig::resolve(&flags, None),
            Err(CliError::Validation(_))
        ));
    }

    #[test]
    fn k_bounds() {
        let flags = Settings {
            k: Some(vec!["2-7".parse().unwrap()]),
            workers: Some(1),
            ..Default::default()
        };
        let cfg = ExperimentConfig::resolve(&flags, None).unwrap();
        assert!(cfg.check_ks(7).is_ok());
        assert!(cfg.check_ks(6).is_err());
        assert!(cfg.single_k(7).is_err());
    }
}
