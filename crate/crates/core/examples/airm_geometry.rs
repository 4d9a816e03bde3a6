//! Affine-invariant distance, geodesics and Fréchet means of SPD matrices.
//!
//!     cargo run --example airm_geometry

use scmgen::spd::{airm_distance, frechet_mean, geodesic, KarcherOptions, Matrix, SpdMatrix, SymMatrix};

fn spd(n: usize, data: Vec<f64>) -> scmgen::Result<SpdMatrix> {
    SpdMatrix::new(SymMatrix::from_row_major(n, data)?)
}

fn main() -> scmgen::Result<()> {
    let a = spd(2, vec![2.0, 0.5, 0.5, 1.0])?;
    let b = spd(2, vec![1.0, -0.3, -0.3, 3.0])?;
    let d = airm_distance(&a, &b)?;
    println!("d(A, B)                       {d:.6}");

    // Congruence by any invertible matrix leaves the distance unchanged.
    let m = Matrix::from_row_major(2, vec![1.5, -0.4, 0.7, 0.9])?;
    let moved = airm_distance(&a.congruence(&m)?, &b.congruence(&m)?)?;
    println!("d(MAMᵀ, MBMᵀ)                 {moved:.6}");

    // The geodesic splits the distance linearly in t.
    for t in [0.25, 0.5, 0.75] {
        let g = geodesic(&a, &b, t)?;
        println!("t = {t:<4}  d(A, γ(t)) / d(A, B) = {:.6}", airm_distance(&a, &g)? / d);
    }

    let set = vec![
        a.clone(),
        b.clone(),
        spd(2, vec![0.5, 0.1, 0.1, 0.4])?,
        spd(2, vec![4.0, 1.0, 1.0, 2.0])?,
    ];
    let mean = frechet_mean(&set, &KarcherOptions::default())?;
    println!(
        "Fréchet mean {:.5?} after {} iterations, gradient norm {:.1e}",
        mean.mean.as_sym().as_slice(),
        mean.iterations,
        mean.gradient_norm
    );
    let cost: f64 = set
        .iter()
        .map(|s| airm_distance(&mean.mean, s).map(|d| d * d))
        .sum::<scmgen::Result<f64>>()?;
    let arith = SpdMatrix::new(
        set.iter()
            .fold(SymMatrix::zeros(2), |acc, s| acc.add(s.as_sym()))
            .scale(0.25),
    )?;
    let arith_cost: f64 = set
        .iter()
        .map(|s| airm_distance(&arith, s).map(|d| d * d))
        .sum::<scmgen::Result<f64>>()?;
    println!("Σ d² at Fréchet mean {cost:.5}, at arithmetic mean {arith_cost:.5}");
    Ok(())
}
