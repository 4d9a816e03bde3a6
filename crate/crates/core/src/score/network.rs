//! Dense score network over vectorized upper triangles.
//!
//! Input row: `[c_in(σ)·x, time embedding of ln σ, band embedding]`, where
//! c_in(σ) = 1/√(σ² + σ_data²). Hidden layers use SiLU. The raw output h is
//! divided by σ, so the network reports s(x, σ) = h/σ. With the σ²
//! weighting the denoising loss becomes ‖h + z‖², which keeps the regression
//! target at unit scale over the whole σ range.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// n(n+1)/2 for n×n matrices.
    pub input_dim: usize,
    pub time_embed_dim: usize,
    pub bands: usize,
    pub band_embed_dim: usize,
    pub hidden: Vec<usize>,
    /// σ_data in the input scaling 1/√(σ² + σ_data²).
    pub data_scale: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            input_dim: 15,
            time_embed_dim: 64,
            bands: 1,
            band_embed_dim: 8,
            hidden: vec![256, 256, 256],
            data_scale: 0.5,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.bands == 0 {
            return Err(Error::invalid("input_dim and bands must be positive"));
        }
        if !self.time_embed_dim.is_multiple_of(2) {
            return Err(Error::invalid("time_embed_dim must be even"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::invalid("hidden layer widths must be positive"));
        }
        if !(self.data_scale > 0.0) {
            return Err(Error::invalid("data_scale must be positive"));
        }
        Ok(())
    }

    pub(crate) fn features(&self) -> usize {
        self.input_dim + self.time_embed_dim + self.band_embed_dim
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// in × out
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Array2::zeros((input, output)),
            bias: Array1::zeros(output),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreNetwork {
    config: NetworkConfig,
    layers: Vec<Dense>,
    /// bands × band_embed_dim
    band_embedding: Array2<f64>,
}

/// Parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
    pub band_embedding: Array2<f64>,
}

/// Activations kept from a forward pass for backpropagation.
pub struct ForwardCache {
    /// Input to each layer (index 0 is the assembled feature matrix).
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Array2<f64>>,
    bands: Vec<usize>,
    /// Raw output h, batch × input_dim.
    pub raw: Array2<f64>,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[inline]
fn silu(z: f64) -> f64 {
    z * sigmoid(z)
}

#[inline]
fn silu_grad(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 + z * (1.0 - s))
}

/// Sinusoidal embedding of ln σ: `dim/2` sines then `dim/2` cosines with
/// angular frequencies spaced geometrically over [0.1, 10].
pub fn time_embedding(sigma: f64, dim: usize, out: &mut [f64]) {
    let half = dim / 2;
    let u = sigma.ln();
    for k in 0..half {
        let w = if half > 1 {
            0.1 * 100f64.powf(k as f64 / (half - 1) as f64)
        } else {
            1.0
        };
        out[k] = (w * u).sin();
        out[half + k] = (w * u).cos();
    }
}

impl ScoreNetwork {
    /// LeCun-normal weights, zero biases, N(0, 1) band embeddings; the output
    /// layer starts at zero.
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut widths = vec![config.features()];
        widths.extend(&config.hidden);
        widths.push(config.input_dim);
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for (l, pair) in widths.windows(2).enumerate() {
            let mut layer = Dense::zeros(pair[0], pair[1]);
            if l + 2 < widths.len() {
                let normal = Normal::new(0.0, 1.0 / (pair[0] as f64).sqrt()).unwrap();
                layer.weight.mapv_inplace(|_| normal.sample(&mut rng));
            }
            layers.push(layer);
        }
        let normal = Normal::new(0.0, 1.0).unwrap();
        let band_embedding = Array2::from_shape_fn((config.bands, config.band_embed_dim), |_| normal.sample(&mut rng));
        Ok(Self {
            config,
            layers,
            band_embedding,
        })
    }

    pub(crate) fn from_parts(config: NetworkConfig, layers: Vec<Dense>, band_embedding: Array2<f64>) -> Result<Self> {
        config.validate()?;
        let mut widths = vec![config.features()];
        widths.extend(&config.hidden);
        widths.push(config.input_dim);
        if layers.len() != widths.len() - 1 {
            return Err(Error::invalid("layer count does not match config"));
        }
        for (layer, pair) in layers.iter().zip(widths.windows(2)) {
            if layer.weight.dim() != (pair[0], pair[1]) || layer.bias.len() != pair[1] {
                return Err(Error::invalid("layer shape does not match config"));
            }
        }
        if band_embedding.dim() != (config.bands, config.band_embed_dim) {
            return Err(Error::invalid("band embedding shape does not match config"));
        }
        Ok(Self {
            config,
            layers,
            band_embedding,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn band_embedding(&self) -> &Array2<f64> {
        &self.band_embedding
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum::<usize>() + self.band_embedding.len()
    }

    /// Parameters in a fixed order: per layer weight then bias, then the band table.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out.extend(self.band_embedding.iter());
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                found: flat.len(),
            });
        }
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.weight.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|w| *w = it.next().unwrap());
        }
        self.band_embedding.iter_mut().for_each(|w| *w = it.next().unwrap());
        Ok(())
    }

    pub fn params_finite(&self) -> bool {
        self.flat_params().iter().all(|v| v.is_finite())
    }

    pub fn param_norm(&self) -> f64 {
        self.flat_params().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn features(&self, x: ArrayView2<f64>, sigmas: &[f64], bands: &[usize]) -> Result<Array2<f64>> {
        let cfg = &self.config;
        let batch = x.nrows();
        if x.ncols() != cfg.input_dim {
            return Err(Error::DimensionMismatch {
                expected: cfg.input_dim,
                found: x.ncols(),
            });
        }
        if sigmas.len() != batch || bands.len() != batch {
            return Err(Error::invalid("sigmas and bands must have one entry per row"));
        }
        if let Some(&b) = bands.iter().find(|&&b| b >= cfg.bands) {
            return Err(Error::invalid(format!("band {b} out of range (bands = {})", cfg.bands)));
        }
        let mut feat = Array2::zeros((batch, cfg.features()));
        let d = cfg.input_dim;
        let te = cfg.time_embed_dim;
        let mut emb = vec![0.0; te];
        for i in 0..batch {
            let sigma = sigmas[i];
            let c_in = 1.0 / (sigma * sigma + cfg.data_scale * cfg.data_scale).sqrt();
            let mut row = feat.row_mut(i);
            for j in 0..d {
                row[j] = c_in * x[[i, j]];
            }
            time_embedding(sigma, te, &mut emb);
            for (k, v) in emb.iter().enumerate() {
                row[d + k] = *v;
            }
            for (k, v) in self.band_embedding.row(bands[i]).iter().enumerate() {
                row[d + te + k] = *v;
            }
        }
        Ok(feat)
    }

    /// Forward pass keeping activations for [`ScoreNetwork::backward`].
    pub fn forward_cached(&self, x: ArrayView2<f64>, sigmas: &[f64], bands: &[usize]) -> Result<ForwardCache> {
        let mut a = self.features(x, sigmas, bands)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len() - 1);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weight);
            z += &layer.bias;
            inputs.push(a);
            if l == last {
                return Ok(ForwardCache {
                    inputs,
                    pre,
                    bands: bands.to_vec(),
                    raw: z,
                });
            }
            a = z.mapv(silu);
            pre.push(z);
        }
        unreachable!("network has at least one layer")
    }

    /// Raw output h (batch × input_dim).
    pub fn forward_raw(&self, x: ArrayView2<f64>, sigmas: &[f64], bands: &[usize]) -> Result<Array2<f64>> {
        let mut a = self.features(x, sigmas, bands)?;
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weight);
            z += &layer.bias;
            if l == last {
                return Ok(z);
            }
            z.mapv_inplace(silu);
            a = z;
        }
        unreachable!("network has at least one layer")
    }

    /// Score estimates s = h/σ, one row per input row.
    pub fn score(&self, x: ArrayView2<f64>, sigmas: &[f64], bands: &[usize]) -> Result<Array2<f64>> {
        let mut h = self.forward_raw(x, sigmas, bands)?;
        for (mut row, &sigma) in h.axis_iter_mut(Axis(0)).zip(sigmas) {
            row.mapv_inplace(|v| v / sigma);
        }
        Ok(h)
    }

    /// Backpropagates dL/dh through the cached pass.
    pub fn backward(&self, cache: &ForwardCache, grad_raw: &Array2<f64>) -> Gradients {
        let mut layers: Vec<Dense> = Vec::with_capacity(self.layers.len());
        let mut g = grad_raw.clone();
        for l in (0..self.layers.len()).rev() {
            let input = &cache.inputs[l];
            let weight = input.t().dot(&g);
            let bias = g.sum_axis(Axis(0));
            let da = g.dot(&self.layers[l].weight.t());
            layers.push(Dense { weight, bias });
            if l > 0 {
                let mut next = da;
                next.zip_mut_with(&cache.pre[l - 1], |d, &z| *d *= silu_grad(z));
                g = next;
            } else {
                g = da;
            }
        }
        layers.reverse();

        let cfg = &self.config;
        let offset = cfg.input_dim + cfg.time_embed_dim;
        let mut band_embedding = Array2::zeros(self.band_embedding.dim());
        for (i, &b) in cache.bands.iter().enumerate() {
            let src = g.slice(s![i, offset..]);
            let mut dst = band_embedding.row_mut(b);
            dst += &src;
        }
        Gradients { layers, band_embedding }
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub(crate) fn band_embedding_mut(&mut self) -> &mut Array2<f64> {
        &mut self.band_embedding
    }
}

impl Gradients {
    pub fn zeros_like(net: &ScoreNetwork) -> Self {
        Self {
            layers: net
                .layers()
                .iter()
                .map(|l| Dense {
                    weight: Array2::zeros(l.weight.dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
            band_embedding: Array2::zeros(net.band_embedding().dim()),
        }
    }

    /// Same ordering as [`ScoreNetwork::flat_params`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out.extend(self.band_embedding.iter());
        out
    }

    pub fn norm(&self) -> f64 {
        let mut s = 0.0;
        for l in &self.layers {
            s += l.weight.iter().map(|v| v * v).sum::<f64>();
            s += l.bias.iter().map(|v| v * v).sum::<f64>();
        }
        s += self.band_embedding.iter().map(|v| v * v).sum::<f64>();
        s.sqrt()
    }

    pub fn scale(&mut self, c: f64) {
        for l in &mut self.layers {
            l.weight.mapv_inplace(|v| v * c);
            l.bias.mapv_inplace(|v| v * c);
        }
        self.band_embedding.mapv_inplace(|v| v * c);
    }
}
