//! Spectral matrix functions f(S) = Σ f(λ_i) u_i u_iᵀ and the eigenvalue
//! floor projection onto the SPD cone.

use crate::error::{Error, Result};
use crate::spd::eigen::{eig_sym, EigenDecomposition};
use crate::spd::matrix::{Matrix, SymMatrix};
use crate::spd::SpdMatrix;

/// S† = Σ max{λ_i, eps}·u_i u_iᵀ.
pub fn project_to_spd(x: &SymMatrix, eps: f64) -> Result<SpdMatrix> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!(
            "projection threshold must be positive, got {eps}"
        )));
    }
    let e = eig_sym(x)?;
    let projected = e.map(|l| l.max(eps));
    Ok(SpdMatrix::from_parts_unchecked(projected, eps))
}

/// Projection of a raw (possibly non-symmetric) matrix: symmetrize with
/// ½(X + Xᵀ) first.
pub fn project_matrix_to_spd(x: &Matrix, eps: f64) -> Result<SpdMatrix> {
    project_to_spd(&x.symmetrize(), eps)
}

fn positive_spectrum(s: &SymMatrix, what: &str) -> Result<EigenDecomposition> {
    let e = eig_sym(s)?;
    if !(e.min_eigenvalue() > 0.0) {
        return Err(Error::Domain(format!(
            "{what} requires a positive definite matrix (smallest eigenvalue {:e})",
            e.min_eigenvalue()
        )));
    }
    Ok(e)
}

pub fn mat_log(s: &SpdMatrix) -> Result<SymMatrix> {
    let e = positive_spectrum(s.as_sym(), "matrix logarithm")?;
    Ok(e.map(f64::ln))
}

pub fn mat_exp(m: &SymMatrix) -> Result<SpdMatrix> {
    let e = eig_sym(m)?;
    let floor = e.min_eigenvalue().exp();
    if !(floor > 0.0) || !e.max_eigenvalue().exp().is_finite() {
        return Err(Error::Domain("matrix exponential out of floating-point range".into()));
    }
    Ok(SpdMatrix::from_parts_unchecked(e.map(f64::exp), floor))
}

pub fn mat_sqrt(s: &SpdMatrix) -> Result<SpdMatrix> {
    let e = positive_spectrum(s.as_sym(), "matrix square root")?;
    Ok(SpdMatrix::from_parts_unchecked(
        e.map(f64::sqrt),
        e.min_eigenvalue().sqrt(),
    ))
}

pub fn mat_inv_sqrt(s: &SpdMatrix) -> Result<SpdMatrix> {
    let e = positive_spectrum(s.as_sym(), "inverse square root")?;
    Ok(SpdMatrix::from_parts_unchecked(
        e.map(|l| 1.0 / l.sqrt()),
        1.0 / e.max_eigenvalue().sqrt(),
    ))
}

/// S^p for real p.
pub fn mat_pow(s: &SpdMatrix, p: f64) -> Result<SpdMatrix> {
    let e = positive_spectrum(s.as_sym(), "matrix power")?;
    let lo = e.min_eigenvalue().powf(p);
    let hi = e.max_eigenvalue().powf(p);
    Ok(SpdMatrix::from_parts_unchecked(e.map(|l| l.powf(p)), lo.min(hi)))
}

/// (S^{1/2}, S^{-1/2}) from a single eigendecomposition.
pub(crate) fn sqrt_and_inv_sqrt(s: &SpdMatrix) -> Result<(SymMatrix, SymMatrix)> {
    let e = positive_spectrum(s.as_sym(), "matrix square root")?;
    Ok((e.map(f64::sqrt), e.map(|l| 1.0 / l.sqrt())))
}
