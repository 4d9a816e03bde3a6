//! Runs both samplers on the exact score of a Gaussian and compares the
//! sample covariance with the target.
//!
//!     cargo run --release --example gaussian_sampler

use ndarray::Array2;
use scmgen::sampler::{sample_vectors, GaussianScore, SamplerConfig, SamplerMethod};
use scmgen::score::NoiseSchedule;
use scmgen::spd::SymMatrix;

fn second_moment(x: &Array2<f64>) -> scmgen::Result<SymMatrix> {
    let m = x.t().dot(x) / x.nrows() as f64;
    SymMatrix::from_row_major(m.nrows(), m.iter().copied().collect())
}

fn main() -> scmgen::Result<()> {
    let cov = SymMatrix::from_row_major(3, vec![1.5, 0.4, 0.0, 0.4, 1.0, -0.3, 0.0, -0.3, 0.6])?;
    let score = GaussianScore::zero_mean(&cov)?;
    let sched = NoiseSchedule::default();
    for method in [SamplerMethod::Langevin, SamplerMethod::ReverseSde] {
        let cfg = SamplerConfig {
            method,
            seed: 3,
            ..SamplerConfig::default()
        };
        let x = sample_vectors(&score, &sched, &cfg, 4000, 0)?;
        let est = second_moment(&x)?;
        println!(
            "{method:?}: relative Frobenius error {:.4}\n  estimate {:.3?}",
            est.sub(&cov).frobenius_norm() / cov.frobenius_norm(),
            est.as_slice()
        );
    }
    Ok(())
}
