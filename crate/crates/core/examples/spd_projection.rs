//! Projecting noisy symmetric matrices back onto the SPD cone.
//!
//!     cargo run --example spd_projection

use scmgen::spd::{eig_sym, project_to_spd, SymMatrix};

fn main() -> scmgen::Result<()> {
    // A covariance with a small eigenvalue plus symmetric noise large enough
    // to push it outside the cone.
    let clean = SymMatrix::from_row_major(3, vec![2.0, 0.9, 0.0, 0.9, 1.0, 0.3, 0.0, 0.3, 0.05])?;
    let noise = SymMatrix::from_row_major(3, vec![0.0, 0.1, -0.2, 0.1, 0.0, 0.05, -0.2, 0.05, -0.1])?;
    let noisy = clean.add(&noise);
    println!("noisy eigenvalues      {:?}", eig_sym(&noisy)?.eigenvalues());

    for eps in [1e-4, 1e-2, 0.1] {
        let p = project_to_spd(&noisy, eps)?;
        let e = eig_sym(p.as_sym())?;
        println!(
            "eps {eps:<6} eigenvalues {:.4?}  ‖X − P‖_F = {:.4}",
            e.eigenvalues(),
            noisy.sub(p.as_sym()).frobenius_norm()
        );
        // projecting again changes nothing
        let again = project_to_spd(p.as_sym(), eps)?;
        assert!(again.as_sym().sub(p.as_sym()).frobenius_norm() < 1e-12);
    }
    Ok(())
}
