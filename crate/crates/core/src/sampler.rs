//! Sampling symmetric matrices from noise: annealed Langevin dynamics and
//! Euler–Maruyama integration of the reverse-time VE SDE, followed by the
//! eigenvalue-floor projection onto the SPD cone.
//!
//! Chains are advanced together as one batch so the score network runs one
//! matrix product per step, but each chain draws its noise from its own
//! ChaCha stream (`seed`, stream = band << 32 | chain index). A chain's draws
//! therefore do not depend on how many other chains run alongside it.

use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Label, Provenance, ScmSample};
use crate::error::{Error, Result};
use crate::score::{Checkpoint, NoiseSchedule, ScoreNetwork, DEFAULT_T_EPS};
use crate::spd::{eig_sym, project_to_spd, upper_len, EigenDecomposition, SymMatrix};

/// Anything that can produce score estimates for a batch at one noise level.
pub trait ScoreSource {
    fn dim(&self) -> usize;
    fn score_batch(&self, x: ArrayView2<f64>, sigma: f64, band: usize) -> Result<Array2<f64>>;
}

impl ScoreSource for ScoreNetwork {
    fn dim(&self) -> usize {
        self.input_dim()
    }

    fn score_batch(&self, x: ArrayView2<f64>, sigma: f64, band: usize) -> Result<Array2<f64>> {
        let n = x.nrows();
        self.score(x, &vec![sigma; n], &vec![band; n])
    }
}

/// Exact score of N(mean, cov) convolved with N(0, σ²I):
/// −(cov + σ²I)⁻¹(x − mean). Ignores the band.
#[derive(Debug, Clone)]
pub struct GaussianScore {
    mean: Vec<f64>,
    spectrum: EigenDecomposition,
}

impl GaussianScore {
    pub fn new(mean: Vec<f64>, cov: &SymMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                expected: cov.dim(),
                found: mean.len(),
            });
        }
        let spectrum = eig_sym(cov)?;
        if spectrum.min_eigenvalue() < 0.0 {
            return Err(Error::Domain("covariance must be positive semidefinite".into()));
        }
        Ok(Self { mean, spectrum })
    }

    pub fn zero_mean(cov: &SymMatrix) -> Result<Self> {
        Self::new(vec![0.0; cov.dim()], cov)
    }

    /// (cov + σ²I)⁻¹
    pub fn precision(&self, sigma: f64) -> SymMatrix {
        let s2 = sigma * sigma;
        self.spectrum.map(|l| 1.0 / (l + s2))
    }

    pub fn score(&self, x: &[f64], sigma: f64) -> Vec<f64> {
        let p = self.precision(sigma);
        let d = self.mean.len();
        (0..d)
            .map(|i| -(0..d).map(|j| p.get(i, j) * (x[j] - self.mean[j])).sum::<f64>())
            .collect()
    }
}

impl ScoreSource for GaussianScore {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn score_batch(&self, x: ArrayView2<f64>, sigma: f64, _band: usize) -> Result<Array2<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.ncols(),
            });
        }
        let p = self.precision(sigma);
        let d = self.dim();
        let p = Array2::from_shape_vec((d, d), p.as_slice().to_vec()).expect("square");
        let mut centered = x.to_owned();
        for mut row in centered.axis_iter_mut(Axis(0)) {
            for (v, m) in row.iter_mut().zip(&self.mean) {
                *v -= m;
            }
        }
        Ok(-centered.dot(&p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMethod {
    Langevin,
    ReverseSde,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub method: SamplerMethod,
    /// Reverse-SDE discretization steps on [1, t_eps].
    pub steps: usize,
    pub t_eps: f64,
    /// Number of noise levels in the Langevin ladder.
    pub langevin_levels: usize,
    pub langevin_steps_per_level: usize,
    /// Step size at the smallest noise level; level i uses
    /// step·(σ_i/σ_min)². With T steps per level a chain stops relaxing once
    /// σ_i² drops to about 2σ_min²/(T·step) of the target variance, so the
    /// default leaves a ~1% variance inflation at T = 100.
    pub langevin_step_size: f64,
    pub projection_eps: f64,
    /// Finish with one noise-free step x + σ²·s(x, σ) at the last noise
    /// level, removing the residual σ_min perturbation.
    pub denoise: bool,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            method: SamplerMethod::ReverseSde,
            steps: 1000,
            t_eps: DEFAULT_T_EPS,
            langevin_levels: 10,
            langevin_steps_per_level: 100,
            langevin_step_size: 2e-4,
            projection_eps: 1e-4,
            denoise: true,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.langevin_levels == 0 || self.langevin_steps_per_level == 0 {
            return Err(Error::invalid("sampler step counts must be at least 1"));
        }
        if !(self.projection_eps > 0.0) || !(self.langevin_step_size > 0.0) {
            return Err(Error::invalid("projection_eps and langevin_step_size must be positive"));
        }
        if !(self.t_eps > 0.0 && self.t_eps < 1.0) {
            return Err(Error::invalid("t_eps must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// x + (ε/2)·score + √ε·z
pub fn langevin_step(x: &[f64], score: &[f64], step_size: f64, z: &[f64]) -> Vec<f64> {
    let noise = step_size.sqrt();
    x.iter()
        .zip(score)
        .zip(z)
        .map(|((x, s), z)| x + 0.5 * step_size * s + noise * z)
        .collect()
}

/// Euler–Maruyama step of dx = −g²·score dt + g dW̄ with dt < 0:
/// x + (−g²·score)·dt + g·√|dt|·z.
pub fn reverse_sde_step_with_diffusion(x: &[f64], g: f64, dt: f64, score: &[f64], z: &[f64]) -> Vec<f64> {
    let g2 = g * g;
    let noise = g * dt.abs().sqrt();
    x.iter()
        .zip(score)
        .zip(z)
        .map(|((x, s), z)| x - g2 * s * dt + noise * z)
        .collect()
}

/// Reverse-SDE step at time `t` using the schedule's diffusion coefficient.
pub fn reverse_sde_step(
    sched: &NoiseSchedule,
    x: &[f64],
    t: f64,
    dt: f64,
    score: &[f64],
    z: &[f64],
) -> Result<Vec<f64>> {
    if !(dt < 0.0) {
        return Err(Error::invalid("reverse-time step needs dt < 0"));
    }
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::invalid(format!("time {t} outside (0, 1]")));
    }
    Ok(reverse_sde_step_with_diffusion(x, sched.diffusion(t), dt, score, z))
}

/// Forward VE SDE dx = g(t) dW integrated from t = 0 to `t_end` with `steps`
/// Euler–Maruyama steps.
pub fn integrate_forward_sde(
    sched: &NoiseSchedule,
    x0: &[f64],
    t_end: f64,
    steps: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let dt = t_end / steps as f64;
    let mut x = x0.to_vec();
    for k in 0..steps {
        let g = sched.diffusion(k as f64 * dt);
        for v in x.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v += g * dt.sqrt() * z;
        }
    }
    x
}

fn chain_rngs(seed: u64, band: usize, count: usize) -> Vec<ChaCha8Rng> {
    (0..count)
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((band as u64) << 32) | c as u64);
            rng
        })
        .collect()
}

fn check_finite(x: &Array2<f64>, stage: impl FnOnce() -> String) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalAbort(format!(
            "non-finite sampler state at {}",
            stage()
        )))
    }
}

fn init_chains(rngs: &mut [ChaCha8Rng], dim: usize, sigma: f64) -> Array2<f64> {
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    let mut x = Array2::zeros((rngs.len(), dim));
    for (mut row, rng) in x.axis_iter_mut(Axis(0)).zip(rngs.iter_mut()) {
        row.iter_mut().for_each(|v| *v = normal.sample(rng));
    }
    x
}

/// Annealed Langevin dynamics. Returns one vector per row.
pub fn sample_langevin<S: ScoreSource + ?Sized>(
    src: &S,
    sched: &NoiseSchedule,
    cfg: &SamplerConfig,
    count: usize,
    band: usize,
) -> Result<Array2<f64>> {
    cfg.validate()?;
    let dim = src.dim();
    if count == 0 {
        return Ok(Array2::zeros((0, dim)));
    }
    let mut rngs = chain_rngs(cfg.seed, band, count);
    let mut x = init_chains(&mut rngs, dim, sched.sigma_max());
    let ladder = sched.ladder(cfg.langevin_levels);
    let sigma_last = *ladder.last().expect("at least one level");
    for (level, &sigma) in ladder.iter().enumerate() {
        let eps = cfg.langevin_step_size * (sigma / sigma_last).powi(2);
        let noise = eps.sqrt();
        for step in 0..cfg.langevin_steps_per_level {
            let score = src.score_batch(x.view(), sigma, band)?;
            for ((mut row, srow), rng) in x
                .axis_iter_mut(Axis(0))
                .zip(score.axis_iter(Axis(0)))
                .zip(rngs.iter_mut())
            {
                for (v, s) in row.iter_mut().zip(srow.iter()) {
                    let z: f64 = StandardNormal.sample(rng);
                    *v += 0.5 * eps * s + noise * z;
                }
            }
            check_finite(&x, || format!("langevin level {level} (sigma {sigma:.4e}) step {step}"))?;
        }
    }
    if cfg.denoise {
        denoise_batch(src, &mut x, sigma_last, band)?;
    }
    Ok(x)
}

/// Tweedie step x ← x + σ²·s(x, σ): the posterior mean of the clean sample
/// given a σ-perturbed one.
pub fn denoise_batch<S: ScoreSource + ?Sized>(src: &S, x: &mut Array2<f64>, sigma: f64, band: usize) -> Result<()> {
    let score = src.score_batch(x.view(), sigma, band)?;
    x.scaled_add(sigma * sigma, &score);
    check_finite(x, || format!("final denoising at sigma {sigma:.4e}"))
}

/// Reverse-time VE SDE from t = 1 down to `t_eps` in `steps` uniform steps.
pub fn sample_reverse_sde<S: ScoreSource + ?Sized>(
    src: &S,
    sched: &NoiseSchedule,
    cfg: &SamplerConfig,
    count: usize,
    band: usize,
) -> Result<Array2<f64>> {
    cfg.validate()?;
    let dim = src.dim();
    if count == 0 {
        return Ok(Array2::zeros((0, dim)));
    }
    let mut rngs = chain_rngs(cfg.seed, band, count);
    let mut x = init_chains(&mut rngs, dim, sched.sigma_max());
    let dt = -(1.0 - cfg.t_eps) / cfg.steps as f64;
    for k in 0..cfg.steps {
        let t = 1.0 + k as f64 * dt;
        let sigma = sched.sigma(t);
        let g = sched.diffusion(t);
        let drift = g * g * -dt;
        let noise = g * dt.abs().sqrt();
        let score = src.score_batch(x.view(), sigma, band)?;
        for ((mut row, srow), rng) in x
            .axis_iter_mut(Axis(0))
            .zip(score.axis_iter(Axis(0)))
            .zip(rngs.iter_mut())
        {
            for (v, s) in row.iter_mut().zip(srow.iter()) {
                let z: f64 = StandardNormal.sample(rng);
                *v += drift * s + noise * z;
            }
        }
        check_finite(&x, || format!("reverse SDE step {k} (t = {t:.4})"))?;
    }
    if cfg.denoise {
        denoise_batch(src, &mut x, sched.sigma(cfg.t_eps), band)?;
    }
    Ok(x)
}

pub fn sample_vectors<S: ScoreSource + ?Sized>(
    src: &S,
    sched: &NoiseSchedule,
    cfg: &SamplerConfig,
    count: usize,
    band: usize,
) -> Result<Array2<f64>> {
    match cfg.method {
        SamplerMethod::Langevin => sample_langevin(src, sched, cfg, count, band),
        SamplerMethod::ReverseSde => sample_reverse_sde(src, sched, cfg, count, band),
    }
}

/// Samples `count` matrices for one class and band from a checkpoint, then
/// projects each onto the SPD cone with `cfg.projection_eps`.
pub fn generate(
    ck: &Checkpoint,
    cfg: &SamplerConfig,
    count: usize,
    label: Label,
    band: usize,
) -> Result<Vec<ScmSample>> {
    let n = ck.channels;
    if upper_len(n) != ck.network.input_dim() {
        return Err(Error::invalid(format!(
            "checkpoint input dim {} does not match {n} channels",
            ck.network.input_dim()
        )));
    }
    if band >= ck.network.config().bands {
        return Err(Error::invalid(format!(
            "band {band} out of range (checkpoint has {} bands)",
            ck.network.config().bands
        )));
    }
    let vectors = sample_vectors(&ck.network, &ck.schedule, cfg, count, band)?;
    vectors
        .axis_iter(Axis(0))
        .enumerate()
        .map(|(trial, row)| {
            let raw = SymMatrix::from_upper(n, row.as_slice().expect("contiguous row"))?;
            let spd = project_to_spd(&raw, cfg.projection_eps)?;
            Ok(ScmSample {
                matrix: spd.into_sym(),
                label,
                band,
                trial,
                provenance: Provenance::Generated,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn langevin_step_examples() {
        assert_eq!(
            langevin_step(&[1.0, 2.0], &[0.0, 0.0], 0.3, &[0.0, 0.0]),
            vec![1.0, 2.0]
        );
        assert_eq!(
            langevin_step(&[0.0, 0.0], &[2.0, 0.0], 0.5, &[0.0, 0.0]),
            vec![0.5, 0.0]
        );
    }

    #[test]
    fn reverse_step_examples() {
        let x = [0.3, -0.2];
        assert_eq!(
            reverse_sde_step_with_diffusion(&x, 2.0, -0.1, &[0.0, 0.0], &[0.0, 0.0]),
            x
        );
        let y = reverse_sde_step_with_diffusion(&x, 1.0, -0.1, &[1.0, 0.0], &[0.0, 0.0]);
        assert!((y[0] - 0.4).abs() < 1e-15 && y[1] == -0.2);
        let sched = NoiseSchedule::default();
        assert!(reverse_sde_step(&sched, &x, 0.5, 0.1, &[0.0, 0.0], &[0.0, 0.0]).is_err());
        assert!(reverse_sde_step(&sched, &x, 0.0, -0.1, &[0.0, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn gaussian_score_formula() {
        let cov = SymMatrix::diag(&[2.0, 0.5]);
        let g = GaussianScore::new(vec![1.0, 0.0], &cov).unwrap();
        let s = g.score(&[3.0, 1.0], 1.0);
        assert!((s[0] + 2.0 / 3.0).abs() < 1e-14);
        assert!((s[1] + 1.0 / 1.5).abs() < 1e-14);
        let batch = Array2::from_shape_vec((1, 2), vec![3.0, 1.0]).unwrap();
        let b = g.score_batch(batch.view(), 1.0, 0).unwrap();
        assert!((b[[0, 0]] - s[0]).abs() < 1e-14 && (b[[0, 1]] - s[1]).abs() < 1e-14);
    }

    #[test]
    fn empty_request() {
        let g = GaussianScore::zero_mean(&SymMatrix::identity(2)).unwrap();
        let sched = NoiseSchedule::default();
        let cfg = SamplerConfig::default();
        assert_eq!(sample_langevin(&g, &sched, &cfg, 0, 0).unwrap().nrows(), 0);
        assert_eq!(sample_reverse_sde(&g, &sched, &cfg, 0, 0).unwrap().nrows(), 0);
    }

    #[test]
    fn chains_independent_of_batch_size() {
        let g = GaussianScore::zero_mean(&SymMatrix::identity(3)).unwrap();
        let sched = NoiseSchedule::default();
        let cfg = SamplerConfig {
            steps: 50,
            seed: 3,
            ..Default::default()
        };
        let a = sample_reverse_sde(&g, &sched, &cfg, 2, 0).unwrap();
        let b = sample_reverse_sde(&g, &sched, &cfg, 5, 0).unwrap();
        assert_eq!(a.row(0), b.row(0));
        assert_eq!(a.row(1), b.row(1));
        let c = sample_reverse_sde(&g, &sched, &cfg, 2, 1).unwrap();
        assert_ne!(a.row(0), c.row(0));
    }

    #[test]
    fn nan_score_aborts() {
        struct Broken;
        impl ScoreSource for Broken {
            fn dim(&self) -> usize {
                2
            }
            fn score_batch(&self, x: ArrayView2<f64>, _: f64, _: usize) -> Result<Array2<f64>> {
                Ok(x.mapv(|_| f64::NAN))
            }
        }
        let sched = NoiseSchedule::default();
        let cfg = SamplerConfig::default();
        match sample_langevin(&Broken, &sched, &cfg, 3, 0) {
            Err(Error::NumericalAbort(msg)) => assert!(msg.contains("level 0")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            sample_reverse_sde(&Broken, &sched, &cfg, 3, 0),
            Err(Error::NumericalAbort(_))
        ));
    }

    #[test]
    fn langevin_long_run_stationarity() {
        // score −x ⇒ stationary N(0, 1); the discretized chain has variance
        // 1/(1 − ε/4), so ε = 0.05 biases by ~1.3%.
        let eps = 0.05;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let dims = 10;
        let mut x = vec![0.0; dims];
        let (mut sum, mut sumsq, mut n) = (0.0, 0.0, 0usize);
        for step in 0..100_000 {
            let score: Vec<f64> = x.iter().map(|v| -v).collect();
            let z: Vec<f64> = (0..dims).map(|_| StandardNormal.sample(&mut rng)).collect();
            x = langevin_step(&x, &score, eps, &z);
            if step >= 1000 {
                for v in &x {
                    sum += v;
                    sumsq += v * v;
                    n += 1;
                }
            }
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn forward_sde_variance_growth() {
        let sched = NoiseSchedule::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = 0.6;
        let runs = 8000;
        let mut sumsq = 0.0;
        for _ in 0..runs {
            let x = integrate_forward_sde(&sched, &[0.0, 0.0], t, 1000, &mut rng);
            sumsq += x.iter().map(|v| v * v).sum::<f64>();
        }
        let var = sumsq / (2 * runs) as f64;
        let want = sched.sigma(t).powi(2) - sched.sigma(0.0).powi(2);
        assert!((var - want).abs() < 0.05 * want, "{var} vs {want}");
    }
}
