mod common;

use common::*;
use proptest::prelude::*;
use scmgen::spd::{
    airm_distance, eig_sym, frechet_mean, geodesic, mat_exp, mat_inv_sqrt, mat_log, mat_sqrt, project_to_spd,
    KarcherOptions, SpdMatrix, SymMatrix,
};

fn spd(n: usize, data: Vec<f64>) -> SpdMatrix {
    SpdMatrix::new(SymMatrix::from_row_major(n, data).unwrap()).unwrap()
}

#[test]
fn projection_known_values() {
    let x = SymMatrix::diag(&[3.0, -2.0, 0.0]);
    let p = project_to_spd(&x, 1e-3).unwrap();
    assert_eq!(p.as_sym().diagonal(), vec![3.0, 1e-3, 1e-3]);

    // eigenvalues 3 and -1 along (1, 1)/√2 and (1, -1)/√2
    let x = SymMatrix::from_row_major(2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
    let p = project_to_spd(&x, 0.5).unwrap();
    let expected = [1.75, 1.25, 1.25, 1.75];
    for (a, b) in p.as_sym().as_slice().iter().zip(expected) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn airm_known_values() {
    let e = std::f64::consts::E;
    let d = airm_distance(&SpdMatrix::identity(2), &spd(2, vec![e, 0.0, 0.0, e * e])).unwrap();
    assert!((d - 5f64.sqrt()).abs() < 1e-12);
    let a = spd(2, vec![2.0, 0.5, 0.5, 1.0]);
    let b = spd(2, vec![1.0, -0.3, -0.3, 3.0]);
    assert!((airm_distance(&a, &b).unwrap() - 1.542_700).abs() < 1e-6);
}

#[test]
fn frechet_mean_of_commuting_pair_is_geometric() {
    let a = SpdMatrix::new(SymMatrix::diag(&[1.0, 4.0, 9.0])).unwrap();
    let b = SpdMatrix::new(SymMatrix::diag(&[4.0, 1.0, 1.0])).unwrap();
    let m = frechet_mean(&[a, b], &KarcherOptions::default()).unwrap();
    let expected = SymMatrix::diag(&[2.0, 2.0, 3.0]);
    assert!(rel_frobenius(m.mean.as_sym(), &expected) < 1e-10);
}

#[test]
fn frechet_mean_of_a_single_matrix() {
    let a = random_spd(&mut rng(11), 4);
    let m = frechet_mean(std::slice::from_ref(&a), &KarcherOptions::default()).unwrap();
    assert!(rel_frobenius(m.mean.as_sym(), a.as_sym()) < 1e-10);
    assert!(frechet_mean(&[], &KarcherOptions::default()).is_err());
}

#[test]
fn eigen_decomposition_is_sorted_and_orthonormal() {
    let mut r = rng(12);
    for n in [1, 2, 5, 12] {
        let s = random_sym(&mut r, n, 1.0);
        let e = eig_sym(&s).unwrap();
        assert!(e.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
        assert!(s.sub(&e.reconstruct()).frobenius_norm() <= 1e-10 * s.frobenius_norm().max(1.0));
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = e.eigenvector(i).iter().zip(e.eigenvector(j)).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10);
            }
        }
    }
}

fn dim_and_seed() -> impl Strategy<Value = (usize, u64)> {
    (2usize..8, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_idempotent_and_floored((n, seed) in dim_and_seed(), eps in 1e-6f64..1e-1) {
        let s = random_sym(&mut rng(seed), n, 1.0);
        let p = project_to_spd(&s, eps).unwrap();
        let min = eig_sym(p.as_sym()).unwrap().min_eigenvalue();
        prop_assert!(min >= eps * (1.0 - 1e-9));
        let again = project_to_spd(p.as_sym(), eps).unwrap();
        prop_assert!(again.as_sym().sub(p.as_sym()).frobenius_norm() <= 1e-12 * p.as_sym().frobenius_norm().max(1.0));
    }

    #[test]
    fn projection_beats_random_psd_competitors((n, seed) in dim_and_seed()) {
        let mut r = rng(seed);
        let s = random_sym(&mut r, n, 1.0);
        let best = s.sub(project_to_spd(&s, 1e-12).unwrap().as_sym()).frobenius_norm();
        for _ in 0..20 {
            let p = random_spd(&mut r, n);
            prop_assert!(s.sub(p.as_sym()).frobenius_norm() >= best - 1e-10);
        }
    }

    #[test]
    fn log_exp_and_sqrt_round_trip((n, seed) in dim_and_seed()) {
        let a = random_spd(&mut rng(seed), n);
        let back = mat_exp(&mat_log(&a).unwrap()).unwrap();
        prop_assert!(rel_frobenius(back.as_sym(), a.as_sym()) < 1e-10);
        let r = mat_sqrt(&a).unwrap();
        let sq = SymMatrix::identity(n).sandwich(r.as_sym());
        prop_assert!(rel_frobenius(&sq, a.as_sym()) < 1e-10);
        let whitened = a.as_sym().sandwich(mat_inv_sqrt(&a).unwrap().as_sym());
        prop_assert!(rel_frobenius(&whitened, &SymMatrix::identity(n)) < 1e-10);
    }

    #[test]
    fn airm_is_a_metric_and_affine_invariant((n, seed) in dim_and_seed()) {
        let mut r = rng(seed);
        let (a, b, c) = (random_spd(&mut r, n), random_spd(&mut r, n), random_spd(&mut r, n));
        let ab = airm_distance(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!(airm_distance(&a, &a).unwrap() <= 1e-9);
        prop_assert!((ab - airm_distance(&b, &a).unwrap()).abs() <= 1e-10);
        prop_assert!(airm_distance(&a, &c).unwrap() <= ab + airm_distance(&b, &c).unwrap() + 1e-9);
        let m = random_invertible(&mut r, n);
        let moved = airm_distance(&a.congruence(&m).unwrap(), &b.congruence(&m).unwrap()).unwrap();
        prop_assert!((moved - ab).abs() <= 1e-7 * ab.max(1e-3));
        let inv = mat_inv_sqrt(&a).unwrap();
        let inv_a = SpdMatrix::new(SymMatrix::identity(n).sandwich(inv.as_sym())).unwrap();
        let inv_b = SpdMatrix::new(SymMatrix::identity(n).sandwich(mat_inv_sqrt(&b).unwrap().as_sym())).unwrap();
        prop_assert!((airm_distance(&inv_a, &inv_b).unwrap() - ab).abs() <= 1e-7 * ab.max(1e-3));
    }

    #[test]
    fn geodesic_splits_distance((n, seed) in dim_and_seed(), t in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let (a, b) = (random_spd(&mut r, n), random_spd(&mut r, n));
        let g = geodesic(&a, &b, t).unwrap();
        let d = airm_distance(&a, &b).unwrap();
        prop_assert!((airm_distance(&a, &g).unwrap() - t * d).abs() <= 1e-8 * d.max(1.0));
    }

    #[test]
    fn frechet_mean_is_congruence_equivariant((n, seed) in dim_and_seed(), k in 2usize..7) {
        let mut r = rng(seed);
        let set: Vec<_> = (0..k).map(|_| random_spd(&mut r, n)).collect();
        let m = random_invertible(&mut r, n);
        let opts = KarcherOptions::default();
        let mean = frechet_mean(&set, &opts).unwrap();
        prop_assert!(mean.gradient_norm <= 1e-9);
        let moved: Vec<_> = set.iter().map(|s| s.congruence(&m).unwrap()).collect();
        let moved_mean = frechet_mean(&moved, &opts).unwrap().mean;
        let expected = mean.mean.congruence(&m).unwrap();
        prop_assert!(rel_frobenius(moved_mean.as_sym(), expected.as_sym()) < 1e-6);
    }
}
