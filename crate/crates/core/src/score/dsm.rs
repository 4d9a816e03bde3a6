//! Denoising score matching with the σ(t)² weighting.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::score::network::{Gradients, ScoreNetwork};
use crate::score::schedule::NoiseSchedule;

/// Lower cutoff on the training time to stay away from σ → σ_min.
pub const DEFAULT_T_EPS: f64 = 1e-3;

/// Conditional score of the Gaussian perturbation kernel:
/// ∇ log p(noisy | clean) = −(noisy − clean)/σ².
pub fn dsm_target(clean: &[f64], noisy: &[f64], sigma: f64) -> Vec<f64> {
    assert_eq!(clean.len(), noisy.len(), "dsm_target length mismatch");
    let inv = 1.0 / (sigma * sigma);
    clean.iter().zip(noisy).map(|(c, n)| -(n - c) * inv).collect()
}

/// One perturbation draw: diffusion time and standard normal direction.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    pub t: f64,
    pub z: Vec<f64>,
}

pub fn draw_noise<R: Rng + ?Sized>(rng: &mut R, count: usize, dim: usize, t_eps: f64) -> Vec<NoiseDraw> {
    (0..count)
        .map(|_| {
            let t = rng.random_range(t_eps..1.0);
            let z = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            NoiseDraw { t, z }
        })
        .collect()
}

fn perturb(batch: ArrayView2<f64>, draws: &[NoiseDraw], sched: &NoiseSchedule) -> Result<(Array2<f64>, Vec<f64>)> {
    if draws.len() != batch.nrows() {
        return Err(Error::invalid("one noise draw per batch row required"));
    }
    if batch.nrows() == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let mut noisy = batch.to_owned();
    let mut sigmas = Vec::with_capacity(draws.len());
    for (i, d) in draws.iter().enumerate() {
        if d.z.len() != batch.ncols() {
            return Err(Error::DimensionMismatch {
                expected: batch.ncols(),
                found: d.z.len(),
            });
        }
        let sigma = sched.sigma_at(d.t)?;
        for (v, z) in noisy.row_mut(i).iter_mut().zip(&d.z) {
            *v += sigma * z;
        }
        sigmas.push(sigma);
    }
    Ok((noisy, sigmas))
}

/// Mean over the batch of ‖σ·s(x̃, σ) + z‖² with x̃ = x + σz, and its exact
/// parameter gradient. Equal to σ²‖s − dsm_target‖² per sample.
pub fn dsm_loss_with_draws(
    net: &ScoreNetwork,
    batch: ArrayView2<f64>,
    bands: &[usize],
    draws: &[NoiseDraw],
    sched: &NoiseSchedule,
) -> Result<(f64, Gradients)> {
    let (noisy, sigmas) = perturb(batch, draws, sched)?;
    let cache = net.forward_cached(noisy.view(), &sigmas, bands)?;
    let b = batch.nrows() as f64;
    // σ·s = h, so the residual is h + z.
    let mut resid = cache.raw.clone();
    for (i, d) in draws.iter().enumerate() {
        for (r, z) in resid.row_mut(i).iter_mut().zip(&d.z) {
            *r += z;
        }
    }
    let loss = resid.iter().map(|r| r * r).sum::<f64>() / b;
    let grad_raw = resid.mapv(|r| 2.0 * r / b);
    Ok((loss, net.backward(&cache, &grad_raw)))
}

/// The same loss evaluated term by term as σ(t)²·‖s(x̃) − dsm_target(x, x̃, σ)‖².
pub fn dsm_loss_weighted_form(
    net: &ScoreNetwork,
    batch: ArrayView2<f64>,
    bands: &[usize],
    draws: &[NoiseDraw],
    sched: &NoiseSchedule,
) -> Result<f64> {
    let (noisy, sigmas) = perturb(batch, draws, sched)?;
    let scores = net.score(noisy.view(), &sigmas, bands)?;
    let mut total = 0.0;
    for (i, &sigma) in sigmas.iter().enumerate() {
        let clean = batch.row(i).to_vec();
        let pert = noisy.row(i).to_vec();
        let target = dsm_target(&clean, &pert, sigma);
        let sq: f64 = scores.row(i).iter().zip(&target).map(|(s, t)| (s - t).powi(2)).sum();
        total += sigma * sigma * sq;
    }
    Ok(total / batch.nrows() as f64)
}

/// Draws t ~ U(t_eps, 1) and z ~ N(0, I) per row, then evaluates
/// [`dsm_loss_with_draws`].
pub fn dsm_loss<R: Rng + ?Sized>(
    net: &ScoreNetwork,
    batch: ArrayView2<f64>,
    bands: &[usize],
    sched: &NoiseSchedule,
    t_eps: f64,
    rng: &mut R,
) -> Result<(f64, Gradients)> {
    let draws = draw_noise(rng, batch.nrows(), batch.ncols(), t_eps);
    dsm_loss_with_draws(net, batch, bands, &draws, sched)
}
