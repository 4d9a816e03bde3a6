use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Label, ScmDataset};
use crate::error::{Error, Result};
use crate::score::dsm::{draw_noise, dsm_loss_with_draws, DEFAULT_T_EPS};
use crate::score::network::{Gradients, ScoreNetwork};
use crate::score::schedule::NoiseSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub schedule: NoiseSchedule,
    pub t_eps: f64,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
    pub optimizer: Optimizer,
    /// Loss trace granularity.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 100_000,
            batch_size: 128,
            learning_rate: 1e-3,
            seed: 0,
            schedule: NoiseSchedule::default(),
            t_eps: DEFAULT_T_EPS,
            clip_norm: 10.0,
            optimizer: Optimizer::Sgd,
            log_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.batch_size == 0 || self.log_every == 0 {
            return Err(Error::invalid("iterations, batch_size and log_every must be positive"));
        }
        if !(self.learning_rate > 0.0) || !(self.clip_norm > 0.0) {
            return Err(Error::invalid("learning_rate and clip_norm must be positive"));
        }
        if !(self.t_eps > 0.0 && self.t_eps < 1.0) {
            return Err(Error::invalid("t_eps must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Vectorized upper triangles (rows) with their band indices.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    data: Array2<f64>,
    bands: Vec<usize>,
}

impl TrainingSet {
    pub fn new(data: Array2<f64>, bands: Vec<usize>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::invalid("training set is empty"));
        }
        if bands.len() != data.nrows() {
            return Err(Error::invalid("one band index per row required"));
        }
        Ok(Self { data, bands })
    }

    /// All samples of `label` (or every sample when `None`).
    pub fn from_dataset(dataset: &ScmDataset, label: Option<Label>) -> Result<Self> {
        let rows: Vec<_> = dataset
            .samples()
            .iter()
            .filter(|s| label.is_none_or(|l| s.label == l))
            .collect();
        let d = crate::spd::upper_len(dataset.channel_count());
        let mut data = Array2::zeros((rows.len(), d));
        for (mut dst, s) in data.axis_iter_mut(Axis(0)).zip(&rows) {
            for (o, v) in dst.iter_mut().zip(s.matrix.to_upper()) {
                *o = v;
            }
        }
        Self::new(data, rows.iter().map(|s| s.band).collect())
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn bands(&self) -> &[usize] {
        &self.bands
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Batch loss at every iteration.
    pub losses: Vec<f64>,
    /// (iteration, mean loss over the preceding `log_every` iterations).
    pub trace: Vec<(usize, f64)>,
    pub final_param_norm: f64,
}

impl TrainReport {
    fn median(xs: &[f64]) -> f64 {
        let mut v = xs.to_vec();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }

    /// Median loss over the first and last `fraction` of iterations.
    pub fn head_tail_medians(&self, fraction: f64) -> (f64, f64) {
        let k = ((self.losses.len() as f64 * fraction).ceil() as usize).max(1);
        (
            Self::median(&self.losses[..k]),
            Self::median(&self.losses[self.losses.len() - k..]),
        )
    }
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

/// Visits every parameter with its gradient in flat order.
fn update_params(net: &mut ScoreNetwork, grads: &Gradients, mut f: impl FnMut(usize, &mut f64, f64)) {
    let mut i = 0;
    for (layer, g) in net.layers_mut().iter_mut().zip(&grads.layers) {
        for (p, &gv) in layer.weight.iter_mut().zip(g.weight.iter()) {
            f(i, p, gv);
            i += 1;
        }
        for (p, &gv) in layer.bias.iter_mut().zip(g.bias.iter()) {
            f(i, p, gv);
            i += 1;
        }
    }
    for (p, &gv) in net.band_embedding_mut().iter_mut().zip(grads.band_embedding.iter()) {
        f(i, p, gv);
        i += 1;
    }
}

/// Minibatch training on the denoising loss. Batches are drawn with
/// replacement from one seeded stream, so the result depends only on the
/// inputs and `cfg.seed`.
pub fn train(net: &mut ScoreNetwork, data: &TrainingSet, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if data.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            found: data.dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = data.dim();
    let mut batch = Array2::zeros((cfg.batch_size, d));
    let mut bands = vec![0; cfg.batch_size];
    let mut adam = AdamState {
        m: vec![0.0; net.param_count()],
        v: vec![0.0; net.param_count()],
        step: 0,
    };
    let mut losses = Vec::with_capacity(cfg.iterations);
    let mut trace = Vec::new();

    for iter in 0..cfg.iterations {
        for (b, mut row) in batch.axis_iter_mut(Axis(0)).enumerate() {
            let idx = rng.random_range(0..data.len());
            row.assign(&data.data.row(idx));
            bands[b] = data.bands[idx];
        }
        let draws = draw_noise(&mut rng, cfg.batch_size, d, cfg.t_eps);
        let (loss, mut grads) = dsm_loss_with_draws(net, batch.view(), &bands, &draws, &cfg.schedule)?;
        let gnorm = grads.norm();
        if !loss.is_finite() || !gnorm.is_finite() {
            let worst = draws.iter().map(|dr| cfg.schedule.sigma(dr.t)).fold(0.0, f64::max);
            return Err(Error::NumericalAbort(format!(
                "non-finite loss at iteration {iter} (largest sigma drawn {worst:.4e}, parameter norm {:.4e})",
                net.param_norm()
            )));
        }
        if gnorm > cfg.clip_norm {
            grads.scale(cfg.clip_norm / gnorm);
        }
        let lr = cfg.learning_rate;
        match cfg.optimizer {
            Optimizer::Sgd => update_params(net, &grads, |_, p, g| *p -= lr * g),
            Optimizer::Adam { beta1, beta2, eps } => {
                adam.step += 1;
                let c1 = 1.0 - beta1.powi(adam.step);
                let c2 = 1.0 - beta2.powi(adam.step);
                let AdamState { m, v, .. } = &mut adam;
                update_params(net, &grads, |i, p, g| {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                    *p -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                });
            }
        }
        losses.push(loss);
        if (iter + 1) % cfg.log_every == 0 || iter + 1 == cfg.iterations {
            let start = iter + 1 - ((iter % cfg.log_every) + 1);
            let window = &losses[start..];
            trace.push((iter + 1, window.iter().sum::<f64>() / window.len() as f64));
            log::debug!("iteration {} loss {:.5}", iter + 1, trace.last().unwrap().1);
        }
    }
    Ok(TrainReport {
        losses,
        trace,
        final_param_norm: net.param_norm(),
    })
}
