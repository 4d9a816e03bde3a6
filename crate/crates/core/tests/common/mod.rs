#![allow(dead_code)]

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use scmgen::sampler::{sample_vectors, GaussianScore, SamplerConfig, SamplerMethod};
use scmgen::score::{
    draw_noise, dsm_loss_with_draws, NetworkConfig, NoiseSchedule, ScoreNetwork, TrainConfig, TrainingSet,
    DEFAULT_T_EPS,
};
use scmgen::spd::{eig_sym, mat_exp, Matrix, SpdMatrix, SymMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn random_sym(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> SymMatrix {
    let data = (0..n * n).map(|_| scale * normal(rng)).collect();
    SymMatrix::from_row_major(n, data).unwrap()
}

/// exp of a random symmetric matrix: well conditioned, spectrum within
/// roughly e^{±2}.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> SpdMatrix {
    mat_exp(&random_sym(rng, n, 0.5)).unwrap()
}

/// Gaussian matrix shifted away from singularity.
pub fn random_invertible(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    loop {
        let data: Vec<f64> = (0..n * n).map(|_| normal(rng)).collect();
        let a = Matrix::from_row_major(n, data).unwrap();
        let gram = a.transpose().matmul(&a).symmetrize();
        let e = eig_sym(&gram).unwrap();
        if e.min_eigenvalue() > 1e-3 * e.max_eigenvalue() {
            return a;
        }
    }
}

pub fn rel_frobenius(a: &SymMatrix, b: &SymMatrix) -> f64 {
    a.sub(b).frobenius_norm() / b.frobenius_norm()
}

/// Rows drawn from N(0, cov).
pub fn gaussian_rows(rng: &mut ChaCha8Rng, cov: &SymMatrix, count: usize) -> Array2<f64> {
    let n = cov.dim();
    let l = cov.cholesky().expect("positive definite covariance");
    let mut out = Array2::zeros((count, n));
    for mut row in out.axis_iter_mut(Axis(0)) {
        let z: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
        for i in 0..n {
            row[i] = (0..=i).map(|k| l.get(i, k) * z[k]).sum();
        }
    }
    out
}

/// Second moment (1/N) Σ xxᵀ of zero-mean rows.
pub fn second_moment(x: &Array2<f64>) -> SymMatrix {
    let m = x.t().dot(x) / x.nrows() as f64;
    let n = m.nrows();
    SymMatrix::from_row_major(n, m.iter().copied().collect()).unwrap()
}

/// Covariance with eigenvalues spread over [0.5, 2].
pub fn oracle_covariance(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
    let q = random_invertible(rng, n);
    // Orthonormalize through the eigenvectors of QᵀQ.
    let e = eig_sym(&q.transpose().matmul(&q).symmetrize()).unwrap();
    let lambdas: Vec<f64> = (0..n).map(|i| 0.5 * 4f64.powf(i as f64 / (n - 1) as f64)).collect();
    SymMatrix::from_fn(n, |i, j| {
        (0..n)
            .map(|k| lambdas[k] * e.eigenvector(k)[i] * e.eigenvector(k)[j])
            .sum()
    })
    .unwrap()
}

/// Relative Frobenius error of the sample second moment of `count` draws
/// from `method` driven by the exact score of N(0, cov), and the draws.
pub fn sampler_oracle(method: SamplerMethod, cov: &SymMatrix, count: usize, seed: u64) -> (f64, Array2<f64>) {
    let score = GaussianScore::zero_mean(cov).unwrap();
    let cfg = SamplerConfig {
        method,
        seed,
        ..SamplerConfig::default()
    };
    let x = sample_vectors(&score, &NoiseSchedule::default(), &cfg, count, 0).unwrap();
    (rel_frobenius(&second_moment(&x), cov), x)
}

pub fn small_network(seed: u64, input_dim: usize, hidden: Vec<usize>, bands: usize) -> ScoreNetwork {
    ScoreNetwork::new(
        NetworkConfig {
            input_dim,
            time_embed_dim: 8,
            bands,
            band_embed_dim: 3,
            hidden,
            data_scale: 0.5,
        },
        seed,
    )
    .unwrap()
}

/// Largest relative error between backprop and central differences with
/// step `h`, over all parameters of a randomized two-hidden-layer network
/// and `batches` random batches. Relative error is |a − f| / max(|a|, |f|, floor).
pub fn gradient_check(seed: u64, batches: usize, h: f64, floor: f64) -> f64 {
    let mut rng = rng(seed);
    let mut net = small_network(seed, 6, vec![12, 10], 2);
    let p: Vec<f64> = (0..net.param_count()).map(|_| rng.random_range(-0.5..0.5)).collect();
    net.set_flat_params(&p).unwrap();
    let sched = NoiseSchedule::default();
    let mut worst: f64 = 0.0;
    for _ in 0..batches {
        let batch = Array2::from_shape_fn((4, 6), |_| normal(&mut rng));
        let bands: Vec<usize> = (0..4).map(|i| i % 2).collect();
        let draws = draw_noise(&mut rng, 4, 6, DEFAULT_T_EPS);
        let (_, grads) = dsm_loss_with_draws(&net, batch.view(), &bands, &draws, &sched).unwrap();
        let analytic = grads.flat();
        let base = net.flat_params();
        let mut probe = net.clone();
        for (i, a) in analytic.iter().enumerate() {
            let mut p = base.clone();
            p[i] = base[i] + h;
            probe.set_flat_params(&p).unwrap();
            let (up, _) = dsm_loss_with_draws(&probe, batch.view(), &bands, &draws, &sched).unwrap();
            p[i] = base[i] - h;
            probe.set_flat_params(&p).unwrap();
            let (down, _) = dsm_loss_with_draws(&probe, batch.view(), &bands, &draws, &sched).unwrap();
            let fd = (up - down) / (2.0 * h);
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(floor);
            worst = worst.max(rel);
        }
    }
    worst
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

pub const TRAIN_DRAWS: usize = 50_000;

/// Trains on draws from N(0, cov) and returns, for each σ, the mean cosine
/// similarity between learned and analytic scores at `held_out` points of
/// the σ-perturbed distribution, plus the trained parameters.
pub fn dsm_learning_check(
    cov: &SymMatrix,
    train: TrainConfig,
    sigmas: &[f64],
    held_out: usize,
) -> (Vec<f64>, Vec<f64>) {
    let seed = train.seed;
    let n = cov.dim();
    let mut rng = rng(seed);
    let data = gaussian_rows(&mut rng, cov, TRAIN_DRAWS);
    let set = TrainingSet::new(data, vec![0; TRAIN_DRAWS]).unwrap();
    let mut net = small_network(seed, n, vec![64, 64], 1);
    scmgen::score::train(&mut net, &set, &train).unwrap();
    let oracle = GaussianScore::zero_mean(cov).unwrap();
    let cosines = sigmas
        .iter()
        .map(|&sigma| {
            let perturbed = cov.add(&SymMatrix::identity(n).scale(sigma * sigma));
            let pts = gaussian_rows(&mut rng, &perturbed, held_out);
            let learned = net
                .score(pts.view(), &vec![sigma; held_out], &vec![0; held_out])
                .unwrap();
            let total: f64 = pts
                .axis_iter(Axis(0))
                .zip(learned.axis_iter(Axis(0)))
                .map(|(x, s)| cosine(&s.to_vec(), &oracle.score(&x.to_vec(), sigma)))
                .sum();
            total / held_out as f64
        })
        .collect();
    (cosines, net.flat_params())
}

pub fn f64_bytes(values: impl IntoIterator<Item = f64>) -> Vec<u8> {
    values.into_iter().flat_map(f64::to_le_bytes).collect()
}
