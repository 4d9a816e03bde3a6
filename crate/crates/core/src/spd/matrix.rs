use std::fmt;

use crate::error::{Error, Result};

/// Dense square matrix in row-major order. Used for raw (possibly
/// non-symmetric) sampler output and for congruence transforms.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("matrix dimension must be at least 1"));
        }
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        Ok(Self { n, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j];
            }
        }
        Matrix { n, data }
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.n, other.n, "matmul dimension mismatch");
        Matrix {
            n: self.n,
            data: matmul_raw(self.n, &self.data, &other.data),
        }
    }

    /// ½(X + Xᵀ).
    pub fn symmetrize(&self) -> SymMatrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = self.data[i * n + i];
            for j in (i + 1)..n {
                let v = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        SymMatrix { n, data }
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_rows(f, "Matrix", self.n, &self.data)
    }
}

/// Dense real symmetric matrix. Symmetry is exact: entry (i, j) and (j, i)
/// hold the same bits.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds a symmetric matrix from row-major entries, symmetrizing with
    /// ½(X + Xᵀ).
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        Ok(Matrix::from_row_major(n, data)?.symmetrize())
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self::from_row_major(n, data)
    }

    pub fn identity(n: usize) -> Self {
        let Matrix { n, data } = Matrix::identity(n);
        Self { n, data }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut data = vec![0.0; n * n];
        for (i, v) in values.iter().enumerate() {
            data[i * n + i] = *v;
        }
        Self { n, data }
    }

    /// Entries of the upper triangle (row by row, diagonal included); length n(n+1)/2.
    pub fn to_upper(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            out.extend_from_slice(&self.data[i * n + i..(i + 1) * n]);
        }
        out
    }

    /// Inverse of [`SymMatrix::to_upper`]; the result is symmetric by construction.
    pub fn from_upper(n: usize, upper: &[f64]) -> Result<Self> {
        if upper.len() != upper_len(n) {
            return Err(Error::DimensionMismatch {
                expected: upper_len(n),
                found: upper.len(),
            });
        }
        if upper.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        let mut data = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                data[i * n + j] = upper[k];
                data[j * n + i] = upper[k];
                k += 1;
            }
        }
        Ok(Self { n, data })
    }

    pub(crate) fn from_raw_unchecked(n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix {
            n: self.n,
            data: self.data.clone(),
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix {
            n: self.n,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, other.n, "add dimension mismatch");
        SymMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, other.n, "sub dimension mismatch");
        SymMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Aᵀ·S·A.
    pub fn congruence(&self, a: &Matrix) -> SymMatrix {
        assert_eq!(self.n, a.dim(), "congruence dimension mismatch");
        let at = a.transpose();
        let sa = matmul_raw(self.n, &self.data, a.as_slice());
        let full = matmul_raw(self.n, at.as_slice(), &sa);
        Matrix { n: self.n, data: full }.symmetrize()
    }

    /// B·S·B for symmetric B; the result is re-symmetrized to absorb rounding.
    pub fn sandwich(&self, outer: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, outer.n, "sandwich dimension mismatch");
        let tmp = matmul_raw(self.n, &outer.data, &self.data);
        let full = matmul_raw(self.n, &tmp, &outer.data);
        Matrix { n: self.n, data: full }.symmetrize()
    }

    /// Lower Cholesky factor, or `None` when the matrix is not positive definite.
    pub fn cholesky(&self) -> Option<Matrix> {
        let n = self.n;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = self.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) {
                return None;
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Some(Matrix { n, data: l })
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_rows(f, "SymMatrix", self.n, &self.data)
    }
}

pub fn upper_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Matrix dimension n such that n(n+1)/2 == len.
pub fn dim_from_upper_len(len: usize) -> Option<usize> {
    let n = (((8 * len + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
    (n >= 1 && upper_len(n) == len).then_some(n)
}

pub(crate) fn matmul_raw(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let row = &mut out[i * n..(i + 1) * n];
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b[k * n..(k + 1) * n];
            for (o, bv) in row.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    }
    out
}

fn fmt_rows(f: &mut fmt::Formatter<'_>, name: &str, n: usize, data: &[f64]) -> fmt::Result {
    write!(f, "{name}{n}x{n}[")?;
    for i in 0..n {
        if i > 0 {
            write!(f, "; ")?;
        }
        for j in 0..n {
            if j > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{:.6}", data[i * n + j])?;
        }
    }
    write!(f, "]")
}
