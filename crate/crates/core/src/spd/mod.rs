//! Symmetric and SPD linear algebra plus the affine-invariant Riemannian
//! geometry used to compare covariance matrices.

mod eigen;
mod functions;
mod matrix;
mod riemann;

pub use eigen::{eig_sym, EigenDecomposition, MAX_SWEEPS, RELATIVE_TOLERANCE};
pub use functions::{mat_exp, mat_inv_sqrt, mat_log, mat_pow, mat_sqrt, project_matrix_to_spd, project_to_spd};
pub use matrix::{dim_from_upper_len, upper_len, Matrix, SymMatrix};
pub use riemann::{airm_distance, frechet_mean, geodesic, FrechetMean, KarcherOptions};

use crate::error::{Error, Result};

/// Absolute slack allowed when checking an eigenvalue floor, scaled by the
/// matrix magnitude.
pub const FLOOR_TOLERANCE: f64 = 1e-10;

/// A symmetric matrix whose eigenvalues are all at least `floor_eps`.
#[derive(Clone, PartialEq)]
pub struct SpdMatrix {
    base: SymMatrix,
    floor_eps: f64,
}

impl SpdMatrix {
    /// Validates strict positive definiteness. The recorded floor is the
    /// smallest eigenvalue.
    pub fn new(base: SymMatrix) -> Result<Self> {
        let e = eig_sym(&base)?;
        let min = e.min_eigenvalue();
        if !(min > 0.0) || base.cholesky().is_none() {
            return Err(Error::Domain(format!(
                "matrix is not positive definite (smallest eigenvalue {min:e})"
            )));
        }
        Ok(Self { base, floor_eps: min })
    }

    /// Validates that every eigenvalue is at least `floor_eps` (up to rounding).
    pub fn with_floor(base: SymMatrix, floor_eps: f64) -> Result<Self> {
        if !(floor_eps > 0.0) {
            return Err(Error::invalid("eigenvalue floor must be positive"));
        }
        let e = eig_sym(&base)?;
        let slack = FLOOR_TOLERANCE * e.max_eigenvalue().abs().max(1.0);
        if e.min_eigenvalue() < floor_eps - slack || base.cholesky().is_none() {
            return Err(Error::Domain(format!(
                "smallest eigenvalue {:e} below floor {floor_eps:e}",
                e.min_eigenvalue()
            )));
        }
        Ok(Self { base, floor_eps })
    }

    pub(crate) fn from_parts_unchecked(base: SymMatrix, floor_eps: f64) -> Self {
        Self { base, floor_eps }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            base: SymMatrix::identity(n),
            floor_eps: 1.0,
        }
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.base
    }

    pub fn into_sym(self) -> SymMatrix {
        self.base
    }

    pub fn floor_eps(&self) -> f64 {
        self.floor_eps
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Aᵀ·S·A for invertible A; the floor is recomputed.
    pub fn congruence(&self, a: &Matrix) -> Result<SpdMatrix> {
        SpdMatrix::new(self.base.congruence(a))
    }
}

impl std::fmt::Debug for SpdMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Spd(floor={:e}, {:?})", self.floor_eps, self.base)
    }
}

impl AsRef<SymMatrix> for SpdMatrix {
    fn as_ref(&self) -> &SymMatrix {
        &self.base
    }
}
