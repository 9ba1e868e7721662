//! Reference solutions: the closed-form single-user optimum and an exhaustive
//! search over antenna subsets.
//!
//! The exhaustive search solves every `K`-subset with multi-restart SCA. Each
//! per-subset problem is itself nonconvex for `M > 1`, so the result is a
//! strong heuristic bound rather than a certified optimum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{top_groups, ProblemInstance, Snr};
use crate::realcplx::ComplexVector;
use crate::select::{solve_on_support, ScaConfig};

pub const DEFAULT_SUBSET_CAP: u128 = 10_000;
pub const DEFAULT_ORACLE_RESTARTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    Analytic,
    ExhaustiveSca,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetValue {
    pub subset: Vec<usize>,
    pub min_snr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// 0-based, ascending.
    pub best_subset: Vec<usize>,
    pub best_min_snr: Snr,
    pub beamformer: Vec<[f64; 2]>,
    pub per_subset: Vec<SubsetValue>,
    pub method: OracleMethod,
    pub subsets_evaluated: u128,
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::Validation(format!("K must lie in [1, {n}], got {k}")));
    }
    Ok(())
}

/// Closed form for one user: keep the `k` strongest antennas and
/// matched-filter on them, giving `P Σ_selected |h(i)|² / σ²`.
pub fn single_user_optimum(h: &ComplexVector, noise_var: f64, power: f64, k: usize) -> Result<OracleResult> {
    check_k(h.len(), k)?;
    if !(noise_var > 0.0 && power > 0.0) {
        return Err(Error::Validation("noise variance and power must be positive".into()));
    }
    let mags: Vec<f64> = h.iter().map(|z| z.norm()).collect();
    let subset = top_groups(&mags, k);
    let gain: f64 = subset.iter().map(|&i| h[i].norm_sqr()).sum();
    let scale = if gain > 0.0 { (power / gain).sqrt() } else { 0.0 };
    let beamformer = (0..h.len())
        .map(|i| {
            if subset.contains(&i) {
                let z = h[i] * scale;
                [z.re, z.im]
            } else {
                [0.0, 0.0]
            }
        })
        .collect();
    Ok(OracleResult {
        best_subset: subset,
        best_min_snr: Snr::from(power * gain / noise_var),
        beamformer,
        per_subset: Vec::new(),
        method: OracleMethod::Analytic,
        subsets_evaluated: 0,
    })
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact: acc * (n - i) is divisible by (i + 1)
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Lexicographic `k`-subsets of `0..n`.
pub struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            current: (k <= n).then(|| (0..k).collect()),
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

/// Multi-restart SCA on every `k`-subset. Restart seeds match those of the
/// reduced re-solve in [`crate::select::solve_joint`] for the same `cfg`, so
/// with `restarts` at least the pipeline's restart count the oracle dominates
/// the pipeline on every subset.
pub fn exhaustive_subsets(
    inst: &ProblemInstance,
    k: usize,
    cfg: &ScaConfig,
    restarts: usize,
    cap: u128,
) -> Result<OracleResult> {
    let n = inst.n_antennas();
    check_k(n, k)?;
    let count = binomial(n, k);
    if count > cap {
        return Err(Error::SubsetCap { count, cap });
    }
    let subsets: Vec<Vec<usize>> = Combinations::new(n, k).collect();
    let solved = subsets
        .par_iter()
        .map(|s| solve_on_support(inst, s, cfg, restarts))
        .collect::<Result<Vec<_>>>()?;

    let mut best = 0;
    for (i, sol) in solved.iter().enumerate() {
        if sol.min_snr > solved[best].min_snr {
            best = i;
        }
    }
    let w = solved[best].beamformer.to_complex();
    Ok(OracleResult {
        best_subset: subsets[best].clone(),
        best_min_snr: Snr::from(solved[best].min_snr),
        beamformer: w.iter().map(|z| [z.re, z.im]).collect(),
        per_subset: subsets
            .into_iter()
            .zip(&solved)
            .map(|(subset, sol)| SubsetValue {
                subset,
                min_snr: sol.min_snr,
            })
            .collect(),
        method: OracleMethod::ExhaustiveSca,
        subsets_evaluated: count,
    })
}

/// Analytic path for single-user instances, exhaustive search otherwise.
pub fn oracle(inst: &ProblemInstance, k: usize, cfg: &ScaConfig, restarts: usize, cap: u128) -> Result<OracleResult> {
    if inst.n_users() == 1 {
        single_user_optimum(&inst.channels()[0], inst.noise_vars()[0], inst.power(), k)
    } else {
        exhaustive_subsets(inst, k, cfg, restarts, cap)
    }
}
