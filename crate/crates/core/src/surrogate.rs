//! Per-iteration convex surrogate of the regularized objective.
//!
//! Each concave quadratic `w̄ᵀQ̃_m w̄` is replaced by its tangent plane at the
//! expansion point `w̄⁽ⁿ⁾`, which upper-bounds it everywhere. The resulting
//! subproblem
//!
//! ```text
//! min_{‖w̄‖² ≤ P}  max_m (a_mᵀw̄ + b_m) + λ‖w̄‖₁,₂
//! ```
//!
//! is rewritten as a bilinear saddle point over `W × (Δ_M × S)` with the
//! stacked operator `Ā = [A; λI]` and offset `b̄ = [b; 0]`. The stacked
//! operator is never materialized.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::problem::{group_l12_norm, Beamformer, ProblemInstance};

#[derive(Debug, Clone)]
pub struct SurrogateModel {
    iteration: usize,
    a: DMatrix<f64>,
    b: DVector<f64>,
    lambda: f64,
    lipschitz: f64,
    radius: f64,
}

impl SurrogateModel {
    /// Builds a model from explicit coefficients. `a` is `M×2N`, `b` has
    /// length `M` and the primal set is the ball of radius `√power`.
    pub fn from_parts(a: DMatrix<f64>, b: DVector<f64>, lambda: f64, power: f64) -> Result<Self> {
        check_dim("surrogate offsets", a.nrows(), b.len())?;
        if !a.ncols().is_multiple_of(2) {
            return Err(Error::Validation("surrogate needs an even real dimension".into()));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Validation(format!("lambda must be nonnegative, got {lambda}")));
        }
        if !(power > 0.0) {
            return Err(Error::Validation(format!("power must be positive, got {power}")));
        }
        let row_max = a
            .row_iter()
            .map(|r| r.norm())
            .fold(0.0, f64::max);
        Ok(Self {
            iteration: 0,
            lipschitz: row_max.max(lambda),
            a,
            b,
            lambda,
            radius: power.sqrt(),
        })
    }

    pub fn with_iteration(mut self, iteration: usize) -> Self {
        self.iteration = iteration;
        self
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Rows are `a_m = 2 Q̃_m w̄⁽ⁿ⁾`.
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Entries are `b_m = -w̄⁽ⁿ⁾ᵀ Q̃_m w̄⁽ⁿ⁾`.
    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `L = max(max_m ‖a_m‖₂, λ)`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Radius `√P` of the primal ball.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn power(&self) -> f64 {
        self.radius * self.radius
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn n_users(&self) -> usize {
        self.a.nrows()
    }

    /// Mirror-prox step `safety / (2L)`. A vanishing coupling (`L = 0`) has a
    /// constant field in `y` only, for which any step is stable; unit
    /// Lipschitz constant is used then.
    pub fn step_size(&self, safety: f64) -> f64 {
        let l = if self.lipschitz > 0.0 { self.lipschitz } else { 1.0 };
        safety / (2.0 * l)
    }

    /// `A w̄ + b`.
    pub fn affine(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.a * w + &self.b
    }

    /// `Āᵀ x = Aᵀy + λs`.
    pub fn adjoint(&self, y: &DVector<f64>, s: &DVector<f64>) -> DVector<f64> {
        let mut g = self.a.tr_mul(y);
        g.axpy(self.lambda, s, 1.0);
        g
    }

    /// `max_m (a_mᵀw̄ + b_m) + λ‖w̄‖₁,₂`, i.e. the bilinear form maximized over
    /// the dual set.
    pub fn value(&self, w: &DVector<f64>) -> f64 {
        let lin = self.affine(w).max();
        let reg = if self.lambda > 0.0 {
            self.lambda * group_l12_norm(w).expect("even dimension is an invariant")
        } else {
            0.0
        };
        lin + reg
    }
}

/// Linearizes every user's concave SNR term about `w_n`.
pub fn linearize(inst: &ProblemInstance, w_n: &Beamformer, lambda: f64) -> Result<SurrogateModel> {
    check_dim("expansion point", inst.dim(), w_n.len())?;
    if !w_n.is_feasible(inst.power()) {
        return Err(Error::Validation(format!(
            "expansion point violates the power budget: {} > {}",
            w_n.power(),
            inst.power()
        )));
    }
    let m = inst.n_users();
    let dim = inst.dim();
    let w = w_n.as_vector();
    let mut a = DMatrix::zeros(m, dim);
    let mut b = DVector::zeros(m);
    for (i, q) in inst.q_bar().iter().enumerate() {
        // Q̃ = -Q̄
        let qw = q * w;
        a.row_mut(i).copy_from(&(qw.transpose() * -2.0));
        b[i] = w.dot(&qw);
    }
    SurrogateModel::from_parts(a, b, lambda, inst.power())
}

/// Convenience wrapper around [`SurrogateModel::value`].
pub fn surrogate_value(model: &SurrogateModel, w: &Beamformer) -> Result<f64> {
    check_dim("beamformer", model.dim(), w.len())?;
    Ok(model.value(w.as_vector()))
}
