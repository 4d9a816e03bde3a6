//! Cyclic Jacobi eigensolver for dense symmetric matrices.
//!
//! Each sweep visits every (p, q) pair with p < q in row order and applies
//! the plane rotation that annihilates entry (p, q). The sweep order is
//! fixed, so the decomposition is a deterministic function of the input.

use crate::error::{Error, Result};
use crate::spd::matrix::SymMatrix;

pub const MAX_SWEEPS: usize = 100;
/// Convergence when the off-diagonal Frobenius norm drops below this fraction
/// of the input Frobenius norm.
pub const RELATIVE_TOLERANCE: f64 = 1e-12;

/// Spectral decomposition `S = Σ λ_i u_i u_iᵀ`, eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    n: usize,
    eigenvalues: Vec<f64>,
    /// Row-major n×n; column i is the eigenvector for `eigenvalues[i]`.
    eigenvectors: Vec<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvector(&self, i: usize) -> Vec<f64> {
        (0..self.n).map(|r| self.eigenvectors[r * self.n + i]).collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.n - 1]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Σ f(λ_i) u_i u_iᵀ. Only the upper triangle is accumulated and then
    /// mirrored, so the result is exactly symmetric.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.n;
        let fl: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let u = &self.eigenvectors;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += u[i * n + k] * fl[k] * u[j * n + k];
                }
                data[i * n + j] = s;
                data[j * n + i] = s;
            }
        }
        SymMatrix::from_raw_unchecked(n, data)
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.map(|l| l)
    }
}

pub fn eig_sym(m: &SymMatrix) -> Result<EigenDecomposition> {
    let n = m.dim();
    let mut a = m.as_slice().to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let threshold = RELATIVE_TOLERANCE * m.frobenius_norm();
    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(n, &a);
        if off <= threshold {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::EigenNoConvergence { sweeps, residual: off });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(n, &mut a, &mut v, p, q);
            }
        }
        sweeps += 1;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let eigenvalues = order.iter().map(|&i| a[i * n + i]).collect();
    let mut eigenvectors = vec![0.0; n * n];
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            eigenvectors[r * n + dst] = v[r * n + src];
        }
    }
    Ok(EigenDecomposition {
        n,
        eigenvalues,
        eigenvectors,
    })
}

fn off_diagonal_norm(n: usize, a: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j] * a[i * n + j];
            }
        }
    }
    s.sqrt()
}

fn rotate(n: usize, a: &mut [f64], v: &mut [f64], p: usize, q: usize) {
    let apq = a[p * n + q];
    if apq == 0.0 {
        return;
    }
    let app = a[p * n + p];
    let aqq = a[q * n + q];
    let tau = (aqq - app) / (2.0 * apq);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    // A <- A J
    for k in 0..n {
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        a[k * n + p] = c * akp - s * akq;
        a[k * n + q] = s * akp + c * akq;
    }
    // A <- Jᵀ A
    for k in 0..n {
        let apk = a[p * n + k];
        let aqk = a[q * n + k];
        a[p * n + k] = c * apk - s * aqk;
        a[q * n + k] = s * apk + c * aqk;
    }
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;
    for k in 0..n {
        let vkp = v[k * n + p];
        let vkq = v[k * n + q];
        v[k * n + p] = c * vkp - s * vkq;
        v[k * n + q] = s * vkp + c * vkq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
        SymMatrix::from_fn(n, |_, _| rng.random_range(-1.0..1.0)).unwrap()
    }

    fn check_invariants(m: &SymMatrix, e: &EigenDecomposition) {
        let n = m.dim();
        let err = e.reconstruct().sub(m).frobenius_norm();
        assert!(err <= 1e-9 * m.frobenius_norm().max(1e-300), "reconstruction {err}");
        for i in 0..n {
            let ui = e.eigenvector(i);
            for j in 0..n {
                let uj = e.eigenvector(j);
                let dot: f64 = ui.iter().zip(&uj).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() <= 1e-9);
            }
        }
        for w in e.eigenvalues().windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn diagonal_case() {
        let e = eig_sym(&SymMatrix::diag(&[1.0, 3.0])).unwrap();
        assert_eq!(e.eigenvalues(), &[3.0, 1.0]);
        assert_eq!(e.eigenvector(0), vec![0.0, 1.0]);
        assert_eq!(e.eigenvector(1), vec![1.0, 0.0]);
    }

    #[test]
    fn identity_case() {
        let e = eig_sym(&SymMatrix::identity(4)).unwrap();
        assert_eq!(e.eigenvalues(), &[1.0; 4]);
    }

    #[test]
    fn two_by_two_hand_solved() {
        // det([[2-λ,1],[1,2-λ]]) = (2-λ)² - 1 → λ ∈ {3, 1}
        let m = SymMatrix::from_row_major(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let e = eig_sym(&m).unwrap();
        assert!((e.eigenvalues()[0] - 3.0).abs() < 1e-14);
        assert!((e.eigenvalues()[1] - 1.0).abs() < 1e-14);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let u0 = e.eigenvector(0);
        let u1 = e.eigenvector(1);
        // eigenvectors are defined up to sign
        assert!((u0[0].abs() - r).abs() < 1e-14 && (u0[0] - u0[1]).abs() < 1e-14);
        assert!((u1[0].abs() - r).abs() < 1e-14 && (u1[0] + u1[1]).abs() < 1e-14);
        check_invariants(&m, &e);
    }

    #[test]
    fn zero_matrix() {
        let e = eig_sym(&SymMatrix::zeros(3)).unwrap();
        assert_eq!(e.eigenvalues(), &[0.0; 3]);
    }

    #[test]
    fn random_matrices_satisfy_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 3, 5, 8, 20, 40] {
            let m = random_sym(&mut rng, n);
            let e = eig_sym(&m).unwrap();
            check_invariants(&m, &e);
        }
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_sym(&mut rng, 7);
        let a = eig_sym(&m).unwrap();
        let b = eig_sym(&m).unwrap();
        assert_eq!(a.eigenvalues, b.eigenvalues);
        assert_eq!(a.eigenvectors, b.eigenvectors);
    }

    #[test]
    fn trace_matches_eigenvalue_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_sym(&mut rng, 6);
        let e = eig_sym(&m).unwrap();
        let s: f64 = e.eigenvalues().iter().sum();
        assert!((s - m.trace()).abs() < 1e-12);
    }
}
