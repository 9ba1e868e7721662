//! Complex to real embedding of channels, quadratic forms and beamformers.
//!
//! A complex vector `w` of length `N` is stored as the real vector
//! `[Re w; Im w]` of length `2N`, and a Hermitian matrix `Q` as the symmetric
//! block matrix
//!
//! ```text
//! [ Re Q  -Im Q ]
//! [ Im Q   Re Q ]
//! ```
//!
//! so that `w^H Q w == w̄ᵀ Q̄ w̄`. Everything downstream works on real vectors.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex matrix type used for Hermitian quadratic forms.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Complex vector type used for channels and beamformers.
pub type ComplexVector = DVector<Complex64>;

/// Absolute entry-wise tolerance used when checking Hermitian symmetry.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Returns true when `q` is square and `q[(i,j)]` matches `conj(q[(j,i)])`
/// within `tol` in both parts.
pub fn is_hermitian(q: &ComplexMatrix, tol: f64) -> bool {
    if q.nrows() != q.ncols() {
        return false;
    }
    let n = q.nrows();
    for i in 0..n {
        for j in i..n {
            let a = q[(i, j)];
            let b = q[(j, i)].conj();
            if (a.re - b.re).abs() > tol || (a.im - b.im).abs() > tol {
                return false;
            }
        }
    }
    true
}

/// Embeds a Hermitian `N×N` matrix as the real `2N×2N` block matrix.
pub fn embed_quadratic(q: &ComplexMatrix) -> Result<DMatrix<f64>> {
    if q.nrows() != q.ncols() {
        return Err(Error::Validation(format!(
            "quadratic form must be square, got {}x{}",
            q.nrows(),
            q.ncols()
        )));
    }
    if !is_hermitian(q, HERMITIAN_TOL) {
        return Err(Error::Validation(
            "quadratic form is not Hermitian within tolerance".into(),
        ));
    }
    let n = q.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        for i in 0..n {
            let z = q[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + n, j)] = z.im;
        }
    }
    Ok(out)
}

/// `[Re w; Im w]`.
pub fn embed_vector(w: &ComplexVector) -> DVector<f64> {
    let n = w.len();
    DVector::from_fn(2 * n, |i, _| if i < n { w[i].re } else { w[i - n].im })
}

/// Inverse of [`embed_vector`].
pub fn extract_complex(w: &DVector<f64>) -> Result<ComplexVector> {
    if !w.len().is_multiple_of(2) {
        return Err(Error::Validation(format!(
            "real embedding must have even length, got {}",
            w.len()
        )));
    }
    let n = w.len() / 2;
    Ok(DVector::from_fn(n, |i, _| Complex64::new(w[i], w[i + n])))
}

/// Rank-one SNR form `h h^H / σ²`.
pub fn snr_form(h: &ComplexVector, noise_var: f64) -> ComplexMatrix {
    let n = h.len();
    DMatrix::from_fn(n, n, |i, j| h[i] * h[j].conj() / noise_var)
}

/// Evaluates `w^H q w` directly in complex arithmetic. The imaginary part of
/// the result vanishes for Hermitian `q` and is discarded.
pub fn complex_quadratic(q: &ComplexMatrix, w: &ComplexVector) -> f64 {
    let qw = q * w;
    w.iter().zip(qw.iter()).map(|(a, b)| (a.conj() * b).re).sum()
}
