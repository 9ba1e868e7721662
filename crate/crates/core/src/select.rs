//! Joint beamforming and antenna selection.
//!
//! [`sca_solve`] runs the successive convex approximation loop for a fixed
//! regularization weight, [`bisect_lambda`] searches the weight that leaves
//! exactly `K` active antennas, and [`solve_joint`] re-solves the unregularized
//! problem on the chosen antennas.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{
    group_norms, group_support, min_snr, regularized_objective, top_groups, Beamformer,
    ProblemInstance, Snr, DEFAULT_TAU_REL,
};
use crate::realcplx::ComplexVector;
use crate::rng::{derive_seed, rng_from, RESTART_STREAM};
use crate::spmp::{solve_subproblem, SaddleState, SolverConfig};
use crate::surrogate::linearize;

/// How bisection weights map onto the regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaScale {
    /// Weights are multiplied by [`lambda_unit`], a bound on every antenna
    /// group's surrogate gradient over the power ball. `λ ≥ 1` then switches
    /// all antennas off, so `[0, 2]` always spans the whole sparsity range.
    Normalized,
    /// Weights are used as given.
    Absolute,
}

/// Starting point of each bisection probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeInit {
    /// Random feasible point drawn from the probe's own seed.
    Fresh,
    /// The previous probe's solution (fresh for the first probe).
    Warm,
    /// The unregularized SCA solution from the base seed, computed once.
    Anchor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaConfig {
    pub sca_iters: usize,
    pub mp_iters: usize,
    pub gap_tol: Option<f64>,
    pub gap_every: usize,
    pub step_safety: f64,
    pub tau_rel: f64,
    pub seed: u64,
    /// Random restarts of the final reduced re-solve.
    pub restarts: usize,
    pub lambda_scale: LambdaScale,
    pub probe_init: ProbeInit,
}

impl Default for ScaConfig {
    fn default() -> Self {
        Self {
            sca_iters: 10,
            mp_iters: 1000,
            gap_tol: None,
            gap_every: 25,
            step_safety: 1.0,
            tau_rel: DEFAULT_TAU_REL,
            seed: 0,
            restarts: 3,
            lambda_scale: LambdaScale::Normalized,
            probe_init: ProbeInit::Anchor,
        }
    }
}

impl ScaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sca_iters == 0 || self.mp_iters == 0 {
            return Err(Error::Validation("sca_iters and mp_iters must be at least 1".into()));
        }
        if !(self.tau_rel > 0.0 && self.tau_rel < 1.0) {
            return Err(Error::Validation(format!("tau_rel must lie in (0, 1), got {}", self.tau_rel)));
        }
        if self.restarts == 0 {
            return Err(Error::Validation("restarts must be at least 1".into()));
        }
        if !(self.step_safety > 0.0) {
            return Err(Error::Validation("step_safety must be positive".into()));
        }
        Ok(())
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            max_iters: self.mp_iters,
            gap_tol: self.gap_tol,
            gap_every: self.gap_every,
            step_safety: self.step_safety,
        }
    }

    fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectionConfig {
    pub lambda_lb: f64,
    pub lambda_ub: f64,
    pub max_depth: usize,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        Self {
            lambda_lb: 0.0,
            lambda_ub: 2.0,
            max_depth: 30,
        }
    }
}

impl BisectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_lb >= 0.0 && self.lambda_lb < self.lambda_ub && self.lambda_ub.is_finite()) {
            return Err(Error::Validation(format!(
                "need 0 <= lambda_lb < lambda_ub, got [{}, {}]",
                self.lambda_lb, self.lambda_ub
            )));
        }
        if self.max_depth == 0 {
            return Err(Error::Validation("max_depth must be at least 1".into()));
        }
        Ok(())
    }
}

/// One SCA iteration as seen by the acceptance rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaStep {
    pub iteration: usize,
    /// Regularized objective at the expansion point.
    pub objective_before: f64,
    /// Regularized objective at the subproblem solution.
    pub candidate_objective: f64,
    /// Certified suboptimality of the subproblem solution.
    pub subproblem_gap: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct ScaOutcome {
    pub beamformer: Beamformer,
    /// Regularized objective at the start and after every accepted step.
    pub objective_trace: Vec<f64>,
    pub steps: Vec<ScaStep>,
    pub mp_iterations: usize,
}

/// Complex Gaussian direction scaled to `‖w‖₂ = √P`.
pub fn random_feasible(n_antennas: usize, power: f64, rng: &mut ChaCha8Rng) -> Beamformer {
    loop {
        let w = DVector::from_fn(2 * n_antennas, |_, _| StandardNormal.sample(rng));
        let norm: f64 = w.norm();
        if norm > 0.0 {
            return Beamformer::new(w * (power.sqrt() / norm)).expect("even length");
        }
        // practically unreachable; keep the stream moving
        let _: u64 = rng.random();
    }
}

/// Successive convex approximation for a fixed weight `lambda` (in the
/// instance's own units). A step is accepted only if it strictly lowers the
/// regularized objective; the loop stops at the first rejected step.
pub fn sca_solve(
    inst: &ProblemInstance,
    lambda: f64,
    cfg: &ScaConfig,
    init: Option<&Beamformer>,
) -> Result<ScaOutcome> {
    cfg.validate()?;
    let mut w = match init {
        Some(w) => {
            if w.len() != inst.dim() || !w.is_feasible(inst.power()) {
                return Err(Error::Validation("initial beamformer is infeasible".into()));
            }
            w.clone()
        }
        None => random_feasible(inst.n_antennas(), inst.power(), &mut rng_from(cfg.seed, &[])),
    };
    let solver = cfg.solver();
    let mut obj = regularized_objective(inst, &w, lambda)?;
    let mut trace = vec![obj];
    let mut steps = Vec::with_capacity(cfg.sca_iters);
    let mut mp_iterations = 0;
    for n in 0..cfg.sca_iters {
        let model = linearize(inst, &w, lambda)?.with_iteration(n);
        let init = SaddleState::initial(&model, &w)?;
        let (candidate, report) = solve_subproblem(&model, init, &solver)?;
        mp_iterations += report.iterations;
        let cand_obj = regularized_objective(inst, &candidate, lambda)?;
        let accepted = cand_obj < obj;
        steps.push(ScaStep {
            iteration: n,
            objective_before: obj,
            candidate_objective: cand_obj,
            subproblem_gap: report.final_gap,
            accepted,
        });
        if !accepted {
            break;
        }
        w = candidate;
        obj = cand_obj;
        trace.push(obj);
    }
    Ok(ScaOutcome {
        beamformer: w,
        objective_trace: trace,
        steps,
        mp_iterations,
    })
}

/// Beamformers whose largest antenna group is below `ZERO_FLOOR · √P` are
/// treated as the zero vector by the selection logic.
pub const ZERO_FLOOR: f64 = 1e-9;

/// Number of active antenna groups.
pub fn count_active(w: &Beamformer, tau_rel: f64) -> usize {
    group_support(w.as_vector(), tau_rel)
        .expect("even length")
        .len()
}

/// [`group_support`] with an absolute floor: a beamformer that has collapsed
/// numerically (largest group below `ZERO_FLOOR · √P`) has empty support.
pub fn active_support(w: &Beamformer, tau_rel: f64, power: f64) -> Vec<usize> {
    let norms = group_norms(w.as_vector()).expect("even length");
    let max = norms.iter().cloned().fold(0.0, f64::max);
    if max <= ZERO_FLOOR * power.sqrt() {
        return Vec::new();
    }
    group_support(w.as_vector(), tau_rel).expect("even length")
}

/// `max_m 2√P · max_j |h_m(j)| · ‖h_m‖ / σ_m²`, an upper bound on the norm of
/// every antenna group of every surrogate gradient `a_m` over the power ball.
pub fn lambda_unit(inst: &ProblemInstance) -> f64 {
    let sqrt_p = inst.power().sqrt();
    inst.channels()
        .iter()
        .zip(inst.noise_vars())
        .map(|(h, s2)| {
            let peak = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
            2.0 * sqrt_p * peak * h.norm() / s2
        })
        .fold(0.0, f64::max)
}

fn lambda_multiplier(inst: &ProblemInstance, scale: LambdaScale) -> f64 {
    match scale {
        LambdaScale::Normalized => {
            let u = lambda_unit(inst);
            if u > 0.0 {
                u
            } else {
                1.0
            }
        }
        LambdaScale::Absolute => 1.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionProbe {
    pub lambda: f64,
    pub lambda_effective: f64,
    pub active: usize,
    pub group_norms: Vec<f64>,
    pub objective: f64,
    pub sca_iterations: usize,
    pub mp_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionOutcome {
    pub lambda_star: f64,
    pub lambda_effective: f64,
    /// Selected antennas, 0-based and ascending.
    pub support: Vec<usize>,
    pub trace: Vec<BisectionProbe>,
    /// True when a probe hit exactly `K` active groups; false when the
    /// fallback picked the support.
    pub exact: bool,
}

fn check_k(inst: &ProblemInstance, k: usize) -> Result<()> {
    if k == 0 || k > inst.n_antennas() {
        return Err(Error::Validation(format!(
            "K must lie in [1, {}], got {k}",
            inst.n_antennas()
        )));
    }
    Ok(())
}

/// Bisection on the regularization weight until exactly `k` antenna groups
/// survive. Probe `i` uses seed `sca.seed + i`. If no probe hits `k`, the
/// probe with the fewest active groups not below `k` (or, failing that, the
/// most active groups) supplies the `k` strongest groups.
pub fn bisect_lambda(
    inst: &ProblemInstance,
    k: usize,
    sca: &ScaConfig,
    bis: &BisectionConfig,
) -> Result<BisectionOutcome> {
    check_k(inst, k)?;
    sca.validate()?;
    bis.validate()?;
    let n = inst.n_antennas();
    if k == n {
        return Ok(BisectionOutcome {
            lambda_star: bis.lambda_lb,
            lambda_effective: bis.lambda_lb * lambda_multiplier(inst, sca.lambda_scale),
            support: (0..n).collect(),
            trace: Vec::new(),
            exact: true,
        });
    }

    let unit = lambda_multiplier(inst, sca.lambda_scale);
    let (mut lb, mut ub) = (bis.lambda_lb, bis.lambda_ub);
    let mut trace: Vec<BisectionProbe> = Vec::new();
    let anchor = match sca.probe_init {
        ProbeInit::Anchor => Some(sca_solve(inst, 0.0, sca, None)?.beamformer),
        _ => None,
    };
    let mut previous: Option<Beamformer> = None;
    for depth in 0..bis.max_depth {
        let lambda = lb + (ub - lb) / 2.0;
        let cfg = sca.with_seed(sca.seed.wrapping_add(depth as u64));
        let init = match sca.probe_init {
            ProbeInit::Fresh => None,
            ProbeInit::Warm => previous.as_ref().filter(|w| w.power() > 0.0),
            ProbeInit::Anchor => anchor.as_ref(),
        };
        let out = sca_solve(inst, lambda * unit, &cfg, init)?;
        let support = active_support(&out.beamformer, sca.tau_rel, inst.power());
        let active = support.len();
        trace.push(BisectionProbe {
            lambda,
            lambda_effective: lambda * unit,
            active,
            group_norms: group_norms(out.beamformer.as_vector())?,
            objective: *out.objective_trace.last().expect("trace starts non-empty"),
            sca_iterations: out.steps.len(),
            mp_iterations: out.mp_iterations,
        });
        if active == k {
            return Ok(BisectionOutcome {
                lambda_star: lambda,
                lambda_effective: lambda * unit,
                support,
                trace,
                exact: true,
            });
        }
        if active > k {
            lb = lambda;
        } else {
            ub = lambda;
        }
        previous = Some(out.beamformer);
    }

    let pick = trace
        .iter()
        .enumerate()
        .filter(|(_, p)| p.active >= k)
        .min_by_key(|(i, p)| (p.active, *i))
        .or_else(|| {
            trace
                .iter()
                .enumerate()
                .max_by_key(|(i, p)| (p.active, std::cmp::Reverse(*i)))
        })
        .map(|(_, p)| p)
        .expect("max_depth >= 1 guarantees a probe");
    Ok(BisectionOutcome {
        lambda_star: pick.lambda,
        lambda_effective: pick.lambda_effective,
        support: top_groups(&pick.group_norms, k),
        trace,
        exact: false,
    })
}

/// Best of several unregularized SCA runs restricted to `support`.
#[derive(Debug, Clone)]
pub struct SupportSolve {
    /// Padded back to the full array, zero off the support.
    pub beamformer: Beamformer,
    /// Min-SNR of the padded beamformer on the full instance.
    pub min_snr: f64,
    pub sca_iterations: usize,
    pub mp_iterations: usize,
}

/// Runs `restarts` SCA solves with `λ = 0` on the antennas in `support`.
/// Restart `r` is seeded with `derive_seed(cfg.seed, [RESTART_STREAM, r])`
/// regardless of the support, so two callers sharing `cfg` evaluate identical
/// runs on identical supports. Ties keep the lowest restart index.
pub fn solve_on_support(
    inst: &ProblemInstance,
    support: &[usize],
    cfg: &ScaConfig,
    restarts: usize,
) -> Result<SupportSolve> {
    if restarts == 0 {
        return Err(Error::Validation("restarts must be at least 1".into()));
    }
    let reduced = inst.restrict(support)?;
    let runs: Vec<Result<SupportSolve>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let run_cfg = cfg.with_seed(derive_seed(cfg.seed, &[RESTART_STREAM, r as u64]));
            let out = sca_solve(&reduced, 0.0, &run_cfg, None)?;
            let padded = out.beamformer.pad(support, inst.n_antennas())?;
            Ok(SupportSolve {
                min_snr: min_snr(inst, &padded)?,
                beamformer: padded,
                sca_iterations: out.steps.len(),
                mp_iterations: out.mp_iterations,
            })
        })
        .collect();
    let mut best: Option<SupportSolve> = None;
    let (mut sca_total, mut mp_total) = (0, 0);
    for run in runs {
        let run = run?;
        sca_total += run.sca_iterations;
        mp_total += run.mp_iterations;
        if best.as_ref().is_none_or(|b| run.min_snr > b.min_snr) {
            best = Some(run);
        }
    }
    let mut best = best.expect("restarts >= 1");
    best.sca_iterations = sca_total;
    best.mp_iterations = mp_total;
    Ok(best)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Selected antennas, 0-based and ascending.
    pub selected: Vec<usize>,
    pub beamformer: Vec<[f64; 2]>,
    pub min_snr: Snr,
    pub lambda_star: f64,
    pub lambda_effective: f64,
    pub exact_k: bool,
    pub bisection: Vec<BisectionProbe>,
    pub sca_iterations: usize,
    pub mp_iterations: usize,
}

impl SelectionResult {
    pub fn beamformer_complex(&self) -> ComplexVector {
        DVector::from_iterator(
            self.beamformer.len(),
            self.beamformer.iter().map(|&[re, im]| Complex64::new(re, im)),
        )
    }
}

/// Bisection followed by a fresh unregularized SCA on the selected antennas.
pub fn solve_joint(
    inst: &ProblemInstance,
    k: usize,
    sca: &ScaConfig,
    bis: &BisectionConfig,
) -> Result<SelectionResult> {
    let outcome = bisect_lambda(inst, k, sca, bis)?;
    let resolved = solve_on_support(inst, &outcome.support, sca, sca.restarts)?;
    let w = resolved.beamformer.to_complex();
    let sca_iterations = resolved.sca_iterations
        + outcome.trace.iter().map(|p| p.sca_iterations).sum::<usize>();
    let mp_iterations = resolved.mp_iterations
        + outcome.trace.iter().map(|p| p.mp_iterations).sum::<usize>();
    Ok(SelectionResult {
        selected: outcome.support,
        beamformer: w.iter().map(|z| [z.re, z.im]).collect(),
        min_snr: Snr::from(resolved.min_snr),
        lambda_star: outcome.lambda_star,
        lambda_effective: outcome.lambda_effective,
        exact_k: outcome.exact,
        bisection: outcome.trace,
        sca_iterations,
        mp_iterations,
    })
}
