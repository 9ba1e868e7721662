//! Saddle-point mirror-prox for the bilinear SCA subproblem
//!
//! ```text
//! min_{w̄ ∈ W} max_{(y, s) ∈ Δ_M × S}  yᵀ(A w̄ + b) + λ sᵀw̄
//! ```
//!
//! with `W` the ball of radius `√P`, `Δ_M` the probability simplex and `S`
//! the set where every antenna pair `(s(j), s(j+N))` has norm at most one.
//!
//! The mirror map is `½‖w̄‖² + Σ y_m log y_m + ½‖s‖²`. Its Bregman projection
//! splits into a Euclidean projection on the ball, independent projections of
//! each pair of `s` onto the unit disc, and a KL projection on the simplex
//! (plain renormalization). Each iteration takes an extrapolation step from
//! `z_t` to `r_{t+1}` and a correction step from `z_t` along the field at
//! `r_{t+1}`; the average of the `r_t` carries the `O(1/T)` gap certificate.

use std::time::{Duration, Instant};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::problem::{Beamformer, POWER_SLACK};
use crate::surrogate::SurrogateModel;

/// Lower clamp applied to simplex weights before taking logarithms.
pub const Y_FLOOR: f64 = 1e-300;

/// Tolerance on `Σ y = 1` for a point to count as already on the simplex.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A joint primal/dual point `z = (w̄, y, s)`. The same layout is used for
/// mirror (dual) coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddlePoint {
    pub w: DVector<f64>,
    pub y: DVector<f64>,
    pub s: DVector<f64>,
}

impl SaddlePoint {
    /// Uniform `y`, zero `s`.
    pub fn centered(w: DVector<f64>, n_users: usize) -> Self {
        let dim = w.len();
        Self {
            w,
            y: DVector::from_element(n_users, 1.0 / n_users as f64),
            s: DVector::zeros(dim),
        }
    }

    fn check_shapes(&self, model: &SurrogateModel) -> Result<()> {
        check_dim("saddle point w", model.dim(), self.w.len())?;
        check_dim("saddle point y", model.n_users(), self.y.len())?;
        check_dim("saddle point s", model.dim(), self.s.len())
    }

    /// Checks membership in `W × Δ_M × S` with the stated tolerances.
    pub fn check_feasible(&self, radius: f64) -> Result<()> {
        let power = radius * radius;
        if self.w.norm_squared() > power * (1.0 + POWER_SLACK) {
            return Err(Error::Domain(format!(
                "w outside the power ball: {} > {power}",
                self.w.norm_squared()
            )));
        }
        if self.y.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Domain("y must be strictly positive".into()));
        }
        let sum: f64 = self.y.sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL * self.y.len().max(1) as f64 {
            return Err(Error::Domain(format!("y sums to {sum}, not 1")));
        }
        let n = self.s.len() / 2;
        for j in 0..n {
            if self.s[j].hypot(self.s[j + n]) > 1.0 + 1e-12 {
                return Err(Error::Domain(format!("s pair {j} outside the unit disc")));
            }
        }
        Ok(())
    }
}

/// Mirror-prox iterate with ergodic averages of the extrapolated points.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleState {
    pub point: SaddlePoint,
    pub leading: SaddlePoint,
    pub average: SaddlePoint,
    pub t: usize,
}

impl SaddleState {
    pub fn new(point: SaddlePoint) -> Self {
        Self {
            leading: point.clone(),
            average: point.clone(),
            point,
            t: 0,
        }
    }

    /// Starts from `w̄` with uniform `y` and `s = 0`.
    pub fn initial(model: &SurrogateModel, w: &Beamformer) -> Result<Self> {
        check_dim("initial w", model.dim(), w.len())?;
        Ok(Self::new(SaddlePoint::centered(w.as_vector().clone(), model.n_users())))
    }
}

/// The monotone field `ψ(z) = (∇_w φ, -∇_y φ, -∇_s φ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldValue {
    pub g_w: DVector<f64>,
    pub g_y: DVector<f64>,
    pub g_s: DVector<f64>,
}

pub fn vector_field(model: &SurrogateModel, z: &SaddlePoint) -> FieldValue {
    FieldValue {
        g_w: model.adjoint(&z.y, &z.s),
        g_y: -model.affine(&z.w),
        g_s: &z.w * -model.lambda(),
    }
}

/// `(w̄, 1 + log y, s)`.
pub fn mirror_grad(z: &SaddlePoint) -> Result<SaddlePoint> {
    if let Some(bad) = z.y.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::Domain(format!("mirror map needs y > 0, got {bad}")));
    }
    Ok(SaddlePoint {
        w: z.w.clone(),
        y: z.y.map(|v| 1.0 + v.max(Y_FLOOR).ln()),
        s: z.s.clone(),
    })
}

/// `(w̄, exp(θ - 1), s)`.
pub fn mirror_grad_inverse(dual: &SaddlePoint) -> SaddlePoint {
    SaddlePoint {
        w: dual.w.clone(),
        y: dual.y.map(|v| (v - 1.0).exp()),
        s: dual.s.clone(),
    }
}

/// Euclidean projection onto the ball of the given radius.
pub fn project_ball(u: &DVector<f64>, radius: f64) -> DVector<f64> {
    let norm = u.norm();
    if norm <= radius {
        u.clone()
    } else {
        u * (radius / norm)
    }
}

/// Projects each pair `(s(j), s(j+N))` onto the unit disc.
pub fn project_group_ball(s: &DVector<f64>) -> Result<DVector<f64>> {
    if !s.len().is_multiple_of(2) {
        return Err(Error::Validation(format!(
            "group projection needs an even length, got {}",
            s.len()
        )));
    }
    let n = s.len() / 2;
    let mut out = s.clone();
    for j in 0..n {
        let norm = s[j].hypot(s[j + n]);
        if norm > 1.0 {
            out[j] /= norm;
            out[j + n] /= norm;
        }
    }
    Ok(out)
}

/// KL projection of a positive vector onto the simplex: unchanged when it
/// already sums to one, otherwise divided by its ℓ1 norm.
pub fn project_simplex_kl(y: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(bad) = y.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::Domain(format!("simplex projection needs y > 0, got {bad}")));
    }
    let sum = y.sum();
    if (sum - 1.0).abs() <= SIMPLEX_TOL {
        Ok(y.clone())
    } else {
        Ok(y / sum)
    }
}

fn prox_step(
    model: &SurrogateModel,
    z: &SaddlePoint,
    field: &FieldValue,
    step: f64,
) -> Result<SaddlePoint> {
    let mut dual = mirror_grad(z)?;
    dual.w.axpy(-step, &field.g_w, 1.0);
    dual.y.axpy(-step, &field.g_y, 1.0);
    dual.s.axpy(-step, &field.g_s, 1.0);
    let mut primal = mirror_grad_inverse(&dual);
    if primal.y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "exp overflow in the simplex update (step {step:e}, L = {:e}); step size too large",
            model.lipschitz()
        )));
    }
    primal.y.apply(|v| *v = v.max(Y_FLOOR));
    Ok(SaddlePoint {
        w: project_ball(&primal.w, model.radius()),
        y: project_simplex_kl(&primal.y)?,
        s: project_group_ball(&primal.s)?,
    })
}

/// One extragradient iteration: `r_{t+1}` from `z_t` along `ψ(z_t)`, then
/// `z_{t+1}` from `z_t` along `ψ(r_{t+1})`.
pub fn mp_iteration(model: &SurrogateModel, state: &SaddleState, step: f64) -> Result<SaddleState> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Validation(format!("step size must be positive, got {step}")));
    }
    state.point.check_shapes(model)?;
    let z = &state.point;
    let r = prox_step(model, z, &vector_field(model, z), step)?;
    let z_next = prox_step(model, z, &vector_field(model, &r), step)?;

    let t = state.t + 1;
    let weight = 1.0 / t as f64;
    let avg = &state.average;
    let average = SaddlePoint {
        w: &avg.w + (&r.w - &avg.w) * weight,
        y: &avg.y + (&r.y - &avg.y) * weight,
        s: &avg.s + (&r.s - &avg.s) * weight,
    };
    Ok(SaddleState {
        point: z_next,
        leading: r,
        average,
        t,
    })
}

/// `min_{w̄ ∈ W} yᵀ(A w̄ + b) + λ sᵀw̄ = yᵀb - √P ‖Aᵀy + λs‖₂`.
pub fn dual_envelope(model: &SurrogateModel, y: &DVector<f64>, s: &DVector<f64>) -> f64 {
    y.dot(model.b()) - model.radius() * model.adjoint(y, s).norm()
}

/// Primal envelope minus dual envelope. Nonnegative up to rounding for
/// feasible candidates and zero exactly at a saddle point.
pub fn duality_gap(model: &SurrogateModel, w: &DVector<f64>, y: &DVector<f64>, s: &DVector<f64>) -> f64 {
    model.value(w) - dual_envelope(model, y, s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Absolute stopping tolerance on the ergodic gap. `None` selects
    /// `1e-5 · (1 + |surrogate value at the initial point|)`; a non-finite
    /// value disables gap-based stopping.
    pub gap_tol: Option<f64>,
    /// Gap evaluation period in iterations.
    pub gap_every: usize,
    /// Multiplier on the step `1/(2L)`.
    pub step_safety: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            gap_tol: None,
            gap_every: 25,
            step_safety: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnedIterate {
    Average,
    Last,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapSample {
    pub iteration: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    /// Certified suboptimality of the returned `w̄` on the surrogate: its
    /// primal envelope minus the best dual envelope seen at termination.
    pub final_gap: f64,
    /// Ergodic gap sampled every `gap_every` iterations.
    pub gap_trace: Vec<GapSample>,
    pub returned: ReturnedIterate,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Runs mirror-prox with step `step_safety / (2L)` until `max_iters` or the
/// ergodic gap drops below the tolerance. Returns the better of the last
/// extrapolated iterate and the ergodic average by surrogate value (ties go
/// to the average).
pub fn solve_subproblem(
    model: &SurrogateModel,
    init: SaddleState,
    cfg: &SolverConfig,
) -> Result<(Beamformer, SolverReport)> {
    let (w, report, _) = run_mirror_prox(model, init, cfg)?;
    Ok((w, report))
}

/// Same as [`solve_subproblem`] but also hands back the final state.
pub fn run_mirror_prox(
    model: &SurrogateModel,
    init: SaddleState,
    cfg: &SolverConfig,
) -> Result<(Beamformer, SolverReport, SaddleState)> {
    if cfg.max_iters == 0 {
        return Err(Error::Validation("max_iters must be at least 1".into()));
    }
    if cfg.gap_every == 0 {
        return Err(Error::Validation("gap_every must be at least 1".into()));
    }
    init.point.check_shapes(model)?;
    init.point.check_feasible(model.radius())?;

    let started = Instant::now();
    let step = model.step_size(cfg.step_safety);
    let tol = cfg
        .gap_tol
        .unwrap_or_else(|| 1e-5 * (1.0 + model.value(&init.point.w).abs()));
    let mut state = init;
    let mut trace = Vec::new();
    while state.t < cfg.max_iters {
        state = mp_iteration(model, &state, step)?;
        if state.t.is_multiple_of(cfg.gap_every) || state.t == cfg.max_iters {
            let avg = &state.average;
            let gap = duality_gap(model, &avg.w, &avg.y, &avg.s);
            trace.push(GapSample {
                iteration: state.t,
                gap,
            });
            if tol.is_finite() && gap <= tol {
                break;
            }
        }
    }

    let last_val = model.value(&state.leading.w);
    let avg_val = model.value(&state.average.w);
    let (w, val, returned) = if last_val < avg_val {
        (state.leading.w.clone(), last_val, ReturnedIterate::Last)
    } else {
        (state.average.w.clone(), avg_val, ReturnedIterate::Average)
    };
    let best_dual = dual_envelope(model, &state.average.y, &state.average.s)
        .max(dual_envelope(model, &state.leading.y, &state.leading.s));
    let report = SolverReport {
        iterations: state.t,
        final_gap: val - best_dual,
        gap_trace: trace,
        returned,
        wall_time: started.elapsed(),
    };
    Ok((Beamformer::new(w)?, report, state))
}
