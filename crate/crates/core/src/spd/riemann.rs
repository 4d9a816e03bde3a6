//! Affine-invariant Riemannian metric (AIRM) on the SPD manifold.

use crate::error::{Error, Result};
use crate::spd::eigen::eig_sym;
use crate::spd::functions::{mat_exp, mat_pow, project_to_spd, sqrt_and_inv_sqrt};
use crate::spd::matrix::SymMatrix;
use crate::spd::SpdMatrix;

/// d(S₁, S₂) = ‖log(S₁^{-1/2} S₂ S₁^{-1/2})‖_F.
///
/// The whitened form is congruent to S₁⁻¹S₂ and has the same spectrum, but
/// stays symmetric so the symmetric eigensolver applies.
pub fn airm_distance(s1: &SpdMatrix, s2: &SpdMatrix) -> Result<f64> {
    if s1.dim() != s2.dim() {
        return Err(Error::DimensionMismatch {
            expected: s1.dim(),
            found: s2.dim(),
        });
    }
    let (_, inv_sqrt) = sqrt_and_inv_sqrt(s1)?;
    let whitened = s2.as_sym().sandwich(&inv_sqrt);
    let e = eig_sym(&whitened)?;
    if !(e.min_eigenvalue() > 0.0) {
        return Err(Error::Domain("whitened matrix lost positivity".into()));
    }
    Ok(e.eigenvalues().iter().map(|l| l.ln().powi(2)).sum::<f64>().sqrt())
}

/// Point at parameter `t` on the AIRM geodesic from `a` (t = 0) to `b` (t = 1).
pub fn geodesic(a: &SpdMatrix, b: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let (sqrt, inv_sqrt) = sqrt_and_inv_sqrt(a)?;
    let whitened = SpdMatrix::from_parts_unchecked(b.as_sym().sandwich(&inv_sqrt), 0.0);
    let inner = mat_pow(&whitened, t)?;
    SpdMatrix::new(inner.as_sym().sandwich(&sqrt))
}

#[derive(Debug, Clone, Copy)]
pub struct KarcherOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub step: f64,
}

impl Default for KarcherOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 100,
            step: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FrechetMean {
    pub mean: SpdMatrix,
    pub iterations: usize,
    /// ‖(1/N) Σ log(μ^{-1/2} Sⁱ μ^{-1/2})‖_F at the returned mean.
    pub gradient_norm: f64,
}

/// Mean whitened log at `mu`, the Fréchet cost Σ d²(mu, Sⁱ), and mu^{1/2}.
fn karcher_gradient(set: &[SpdMatrix], mu: &SpdMatrix) -> Result<(SymMatrix, f64, SymMatrix)> {
    let (sqrt, inv_sqrt) = sqrt_and_inv_sqrt(mu)?;
    let mut grad = SymMatrix::zeros(mu.dim());
    let mut cost = 0.0;
    for s in set {
        let w = eig_sym(&s.as_sym().sandwich(&inv_sqrt))?;
        if !(w.min_eigenvalue() > 0.0) {
            return Err(Error::Domain("whitened matrix lost positivity".into()));
        }
        cost += w.eigenvalues().iter().map(|l| l.ln().powi(2)).sum::<f64>();
        grad = grad.add(&w.map(f64::ln));
    }
    Ok((grad.scale(1.0 / set.len() as f64), cost, sqrt))
}

fn exp_step(sqrt: &SymMatrix, grad: &SymMatrix, step: f64) -> Result<SpdMatrix> {
    let e = mat_exp(&grad.scale(step))?;
    let next = e.as_sym().sandwich(sqrt);
    let floor = eig_sym(&next)?.min_eigenvalue();
    Ok(SpdMatrix::from_parts_unchecked(next, floor))
}

/// Karcher mean under AIRM by the fixed-point iteration
/// μ ← μ^{1/2} exp(step·Ḡ) μ^{1/2}, where Ḡ is the mean of the whitened logs.
/// Starts from the arithmetic mean. A step that increases the Fréchet cost
/// is retried from the previous iterate with half the step, which keeps
/// widely spread sets from oscillating; accepted steps grow back toward
/// `opts.step`.
pub fn frechet_mean(set: &[SpdMatrix], opts: &KarcherOptions) -> Result<FrechetMean> {
    let first = set
        .first()
        .ok_or_else(|| Error::invalid("frechet mean of an empty set"))?;
    let n = first.dim();
    if let Some(bad) = set.iter().find(|s| s.dim() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.dim(),
        });
    }
    if set.len() == 1 {
        return Ok(FrechetMean {
            mean: first.clone(),
            iterations: 0,
            gradient_norm: 0.0,
        });
    }

    let mut acc = SymMatrix::zeros(n);
    for s in set {
        acc = acc.add(s.as_sym());
    }
    let arith = acc.scale(1.0 / set.len() as f64);
    let floor = set
        .iter()
        .map(|s| s.floor_eps())
        .fold(f64::INFINITY, f64::min)
        .max(f64::MIN_POSITIVE);
    let mut mu = project_to_spd(&arith, floor)?;

    let mut residual = f64::INFINITY;
    let mut step = opts.step;
    let mut accepted: Option<(SpdMatrix, SymMatrix, SymMatrix, f64)> = None;
    for iter in 0..=opts.max_iter {
        let (grad, cost, sqrt) = karcher_gradient(set, &mu)?;
        let norm = grad.frobenius_norm();
        if !norm.is_finite() || !cost.is_finite() {
            return Err(Error::NumericalAbort(format!(
                "non-finite karcher gradient at iteration {iter}"
            )));
        }
        if norm <= opts.tol {
            return Ok(FrechetMean {
                mean: mu,
                iterations: iter,
                gradient_norm: norm,
            });
        }
        if let Some((prev, prev_sqrt, prev_grad, prev_cost)) = &accepted {
            if cost > *prev_cost * (1.0 + 1e-12) {
                step *= 0.5;
                mu = if iter == opts.max_iter {
                    prev.clone()
                } else {
                    exp_step(prev_sqrt, prev_grad, step)?
                };
                continue;
            }
        }
        residual = norm;
        if iter == opts.max_iter {
            break;
        }
        let next = exp_step(&sqrt, &grad, step)?;
        accepted = Some((mu, sqrt, grad, cost));
        step = (step * 1.5).min(opts.step);
        mu = next;
    }
    Err(Error::MeanNoConvergence {
        iterations: opts.max_iter,
        residual,
        last: Box::new(mu),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spd::functions::mat_sqrt;
    use crate::spd::Matrix;

    fn spd(n: usize, v: Vec<f64>) -> SpdMatrix {
        SpdMatrix::new(SymMatrix::from_row_major(n, v).unwrap()).unwrap()
    }

    fn rel_err(a: &SymMatrix, b: &SymMatrix) -> f64 {
        a.sub(b).frobenius_norm() / b.frobenius_norm()
    }

    #[test]
    fn self_distance_is_zero() {
        let s = spd(2, vec![2.0, 0.3, 0.3, 1.0]);
        assert!(airm_distance(&s, &s).unwrap() < 1e-14);
    }

    #[test]
    fn distance_identity_to_diag() {
        let e2 = std::f64::consts::E.powi(2);
        let d = airm_distance(
            &SpdMatrix::identity(2),
            &SpdMatrix::new(SymMatrix::diag(&[e2, 1.0])).unwrap(),
        )
        .unwrap();
        assert!((d - 2.0).abs() < 1e-14);
    }

    #[test]
    fn distance_commuting_scalars() {
        // eigenvalues of (2I)⁻¹(8I) are (4, 4) → √2·ln 4
        let a = SpdMatrix::new(SymMatrix::diag(&[2.0, 2.0])).unwrap();
        let b = SpdMatrix::new(SymMatrix::diag(&[8.0, 8.0])).unwrap();
        let d = airm_distance(&a, &b).unwrap();
        assert!((d - 4f64.ln() * 2f64.sqrt()).abs() < 1e-14);
        assert!((d - 1.9605).abs() < 1e-4);
    }

    #[test]
    fn dimension_mismatch() {
        let r = airm_distance(&SpdMatrix::identity(2), &SpdMatrix::identity(3));
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn mean_of_duplicates() {
        let a = spd(2, vec![3.0, 0.5, 0.5, 1.0]);
        let m = frechet_mean(&[a.clone(), a.clone()], &KarcherOptions::default()).unwrap();
        assert!(rel_err(m.mean.as_sym(), a.as_sym()) < 1e-12);
    }

    #[test]
    fn single_input_returned_unchanged() {
        let a = spd(2, vec![3.0, 0.5, 0.5, 1.0]);
        let m = frechet_mean(std::slice::from_ref(&a), &KarcherOptions::default()).unwrap();
        assert_eq!(m.mean, a);
        assert_eq!(m.iterations, 0);
    }

    #[test]
    fn two_point_mean_is_geodesic_midpoint() {
        let a = SpdMatrix::new(SymMatrix::diag(&[1.0, 1.0])).unwrap();
        let b = SpdMatrix::new(SymMatrix::diag(&[4.0, 4.0])).unwrap();
        let m = frechet_mean(&[a.clone(), b.clone()], &KarcherOptions::default()).unwrap();
        let want = SymMatrix::diag(&[2.0, 2.0]);
        assert!(rel_err(m.mean.as_sym(), &want) < 1e-12);
        let mid = geodesic(&a, &b, 0.5).unwrap();
        assert!(rel_err(mid.as_sym(), &want) < 1e-12);

        // non-commuting pair: closed form S₁^{1/2}(S₁^{-1/2}S₂S₁^{-1/2})^{1/2}S₁^{1/2}
        let a = spd(3, vec![2.0, 0.4, 0.1, 0.4, 1.0, 0.2, 0.1, 0.2, 0.7]);
        let b = spd(3, vec![1.0, -0.3, 0.0, -0.3, 3.0, 0.5, 0.0, 0.5, 1.5]);
        let m = frechet_mean(&[a.clone(), b.clone()], &KarcherOptions::default()).unwrap();
        let (sq, isq) = sqrt_and_inv_sqrt(&a).unwrap();
        let inner = mat_sqrt(&SpdMatrix::new(b.as_sym().sandwich(&isq)).unwrap()).unwrap();
        let closed = inner.as_sym().sandwich(&sq);
        assert!(rel_err(m.mean.as_sym(), &closed) < 1e-8);
        assert!(m.gradient_norm <= 1e-9);
    }

    #[test]
    fn commuting_family_mean_is_geometric_mean() {
        let diags: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let x = i as f64;
                vec![1.0 + x, 0.5 + 0.3 * x * x, 2.0 / (1.0 + x)]
            })
            .collect();
        let set: Vec<SpdMatrix> = diags
            .iter()
            .map(|d| SpdMatrix::new(SymMatrix::diag(d)).unwrap())
            .collect();
        let m = frechet_mean(&set, &KarcherOptions::default()).unwrap();
        for k in 0..3 {
            let g = (diags.iter().map(|d| d[k].ln()).sum::<f64>() / 10.0).exp();
            assert!((m.mean.as_sym().get(k, k) - g).abs() < 1e-9 * g);
        }
    }

    #[test]
    fn reports_non_convergence() {
        let a = spd(2, vec![1.0, 0.0, 0.0, 1.0]);
        let b = spd(2, vec![9.0, 2.0, 2.0, 1.0]);
        let opts = KarcherOptions {
            max_iter: 0,
            ..Default::default()
        };
        match frechet_mean(&[a, b], &opts) {
            Err(Error::MeanNoConvergence { residual, .. }) => assert!(residual > 1e-9),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn congruence_invariance_small() {
        let a = spd(2, vec![2.0, 0.3, 0.3, 1.0]);
        let b = spd(2, vec![1.0, -0.2, -0.2, 0.5]);
        let t = Matrix::from_row_major(2, vec![1.0, 2.0, 0.5, -1.0]).unwrap();
        let d0 = airm_distance(&a, &b).unwrap();
        let d1 = airm_distance(&a.congruence(&t).unwrap(), &b.congruence(&t).unwrap()).unwrap();
        assert!((d0 - d1).abs() < 1e-12);
    }
}
