//! Instance files: one JSON document per problem instance.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "n": 2, "m": 1, "power": 10.0, "noise_vars": [1.0],
//!   "channels": [[[1.0, 0.0], [0.0, -1.0]]],
//!   "generator": { "seed": 7, "trial": 0, "min_paths": 4, "max_paths": 10 }
//! }
//! ```
//!
//! `channels[m][j]` is `[re, im]` of `h_m(j)`. `generator` is optional.

use std::fs;
use std::path::Path;

use mpsca::channelgen::ChannelModelConfig;
use mpsca::realcplx::ComplexVector;
use mpsca::ProblemInstance;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const INSTANCE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorMeta {
    pub seed: u64,
    pub trial: u64,
    pub min_paths: usize,
    pub max_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub format_version: u32,
    pub n: usize,
    pub m: usize,
    pub power: f64,
    pub noise_vars: Vec<f64>,
    pub channels: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorMeta>,
}

impl InstanceFile {
    pub fn from_instance(inst: &ProblemInstance, generator: Option<GeneratorMeta>) -> Self {
        Self {
            format_version: INSTANCE_FORMAT_VERSION,
            n: inst.n_antennas(),
            m: inst.n_users(),
            power: inst.power(),
            noise_vars: inst.noise_vars().to_vec(),
            channels: inst
                .channels()
                .iter()
                .map(|h| h.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
            generator,
        }
    }

    pub fn generated(cfg: &ChannelModelConfig, trial: u64, inst: &ProblemInstance) -> Self {
        Self::from_instance(
            inst,
            Some(GeneratorMeta {
                seed: cfg.seed,
                trial,
                min_paths: cfg.min_paths,
                max_paths: cfg.max_paths,
            }),
        )
    }

    /// Checks the declared shape against the payload and builds the instance.
    pub fn to_instance(&self) -> Result<ProblemInstance> {
        if self.format_version != INSTANCE_FORMAT_VERSION {
            return Err(CliError::Validation(format!(
                "unsupported instance format_version {} (expected {INSTANCE_FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.channels.len() != self.m || self.noise_vars.len() != self.m {
            return Err(CliError::Validation(format!(
                "declared m = {} but found {} channels and {} noise variances",
                self.m,
                self.channels.len(),
                self.noise_vars.len()
            )));
        }
        if let Some((user, h)) = self.channels.iter().enumerate().find(|(_, h)| h.len() != self.n) {
            return Err(CliError::Validation(format!(
                "declared n = {} but channel {user} has {} entries",
                self.n,
                h.len()
            )));
        }
        let channels = self
            .channels
            .iter()
            .map(|h| ComplexVector::from_iterator(h.len(), h.iter().map(|&[re, im]| Complex64::new(re, im))))
            .collect();
        Ok(ProblemInstance::new(channels, self.noise_vars.clone(), self.power)?)
    }

    pub fn trial(&self) -> u64 {
        self.generator.as_ref().map_or(0, |g| g.trial)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::json(path, &e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| CliError::io(path, e))
    }
}

/// File name of trial `trial` inside a `gen` output directory.
pub fn instance_file_name(trial: u64) -> String {
    format!("instance_{trial:04}.json")
}
