//! Synthetic multipath downlink channels for a half-wavelength uniform
//! linear array.
//!
//! User `m` sees `L_m ~ U{min_paths..=max_paths}` paths, each with a gain
//! `α ~ CN(0, 1)` and departure angle `θ ~ U[-π/2, π/2]`, and
//!
//! ```text
//! h_mᴴ = √(N / L_m) Σ_l α_l a(θ_l)ᴴ,   a(θ)_n = exp(iπ n sin θ)
//! ```
//!
//! so the stored vector is `h_m = √(N / L_m) Σ_l conj(α_l) a(θ_l)`.
//!
//! Draw order (part of the instance file contract): one `ChaCha8Rng` per
//! `(seed, trial, user)` via [`crate::rng::derive_seed`] with path
//! `[CHANNEL_STREAM, trial, user]`; from it `L_m`, then for each path the real
//! and imaginary parts of `α` (standard normal scaled by `√½`) and `θ`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ProblemInstance;
use crate::realcplx::ComplexVector;
use crate::rng::{rng_from, CHANNEL_STREAM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModelConfig {
    pub n_antennas: usize,
    pub n_users: usize,
    pub min_paths: usize,
    pub max_paths: usize,
    pub noise_var: f64,
    pub seed: u64,
}

impl ChannelModelConfig {
    pub fn new(n_antennas: usize, n_users: usize, seed: u64) -> Self {
        Self {
            n_antennas,
            n_users,
            min_paths: 4,
            max_paths: 10,
            noise_var: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_antennas == 0 || self.n_users == 0 {
            return Err(Error::Validation("need at least one antenna and one user".into()));
        }
        if self.min_paths == 0 || self.min_paths > self.max_paths {
            return Err(Error::Validation(format!(
                "path range [{}, {}] is empty",
                self.min_paths, self.max_paths
            )));
        }
        if !(self.noise_var > 0.0) {
            return Err(Error::Validation("noise variance must be positive".into()));
        }
        Ok(())
    }
}

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub gain: Complex64,
    pub angle: f64,
}

/// ULA response with `k·d = π`.
pub fn steering_vector(theta: f64, n: usize) -> ComplexVector {
    let phase = PI * theta.sin();
    DVector::from_fn(n, |i, _| Complex64::from_polar(1.0, phase * i as f64))
}

pub fn channel_from_paths(n: usize, paths: &[Path]) -> ComplexVector {
    let mut h = ComplexVector::zeros(n);
    if paths.is_empty() {
        return h;
    }
    for p in paths {
        h += steering_vector(p.angle, n) * p.gain.conj();
    }
    h * Complex64::new((n as f64 / paths.len() as f64).sqrt(), 0.0)
}

pub fn draw_paths(cfg: &ChannelModelConfig, rng: &mut ChaCha8Rng) -> Vec<Path> {
    let count = rng.random_range(cfg.min_paths..=cfg.max_paths);
    (0..count)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            let angle = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
            Path {
                gain: Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2),
                angle,
            }
        })
        .collect()
}

pub fn draw_channel(cfg: &ChannelModelConfig, rng: &mut ChaCha8Rng) -> ComplexVector {
    channel_from_paths(cfg.n_antennas, &draw_paths(cfg, rng))
}

/// The RNG that drives user `user` of trial `trial`.
pub fn user_rng(seed: u64, trial: u64, user: u64) -> ChaCha8Rng {
    rng_from(seed, &[CHANNEL_STREAM, trial, user])
}

pub fn draw_channels(cfg: &ChannelModelConfig, trial: u64) -> Result<Vec<ComplexVector>> {
    cfg.validate()?;
    Ok((0..cfg.n_users)
        .map(|m| draw_channel(cfg, &mut user_rng(cfg.seed, trial, m as u64)))
        .collect())
}

/// Draws all `M` channels of one trial into a [`ProblemInstance`].
pub fn draw_instance(cfg: &ChannelModelConfig, trial: u64, power: f64) -> Result<ProblemInstance> {
    let channels = draw_channels(cfg, trial)?;
    ProblemInstance::new(channels, vec![cfg.noise_var; cfg.n_users], power)
}
