//! Covariance extraction, scaling, synthetic data and the dataset container.

mod io;
mod synth;

pub use io::{fmt17, load_dataset, parse17, read_dataset, save_dataset, write_dataset, FORMAT_VERSION};
pub use synth::{default_channel_names, generate_synthetic_dataset, SynthConfig};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spd::{eig_sym, SpdMatrix, SymMatrix};

/// Motor-imagery class. Ordering is lexicographic on the tag, which is also
/// the classifier's tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Left,
    Right,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Left, Label::Right];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Left => "left",
            Label::Right => "right",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Label::Left),
            "right" => Ok(Label::Right),
            other => Err(Error::invalid(format!("unknown class `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Real,
    Generated,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Real => "real",
            Provenance::Generated => "generated",
        }
    }
}

/// Which matrix norm divides a covariance during scaling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    /// Largest singular value.
    #[default]
    Spectral,
    Frobenius,
}

/// A pre-cut multichannel signal segment: `channels` rows by `timestamps`
/// columns, row-major.
#[derive(Debug, Clone)]
pub struct Segment {
    channels: usize,
    timestamps: usize,
    samples: Vec<f64>,
}

impl Segment {
    pub fn new(channels: usize, timestamps: usize, samples: Vec<f64>) -> Result<Self> {
        if channels == 0 || timestamps == 0 {
            return Err(Error::invalid("segment needs at least one channel and one timestamp"));
        }
        if samples.len() != channels * timestamps {
            return Err(Error::DimensionMismatch {
                expected: channels * timestamps,
                found: samples.len(),
            });
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("segment samples must be finite"));
        }
        Ok(Self {
            channels,
            timestamps,
            samples,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn timestamps(&self) -> usize {
        self.timestamps
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Fewer timestamps than channels: X·Xᵀ cannot be full rank.
    pub fn is_rank_deficient(&self) -> bool {
        self.timestamps < self.channels
    }
}

#[derive(Debug, Clone)]
pub struct Covariance {
    pub matrix: SymMatrix,
    /// Set when the segment had fewer timestamps than channels. Such a
    /// matrix must be projected before any SPD operation.
    pub rank_deficient: bool,
}

/// S = X·Xᵀ, no centering and no 1/n_T factor.
pub fn covariance_from_segment(seg: &Segment) -> Covariance {
    let (c, t) = (seg.channels, seg.timestamps);
    let x = &seg.samples;
    let mut data = vec![0.0; c * c];
    for i in 0..c {
        let xi = &x[i * t..(i + 1) * t];
        for j in i..c {
            let xj = &x[j * t..(j + 1) * t];
            let v: f64 = xi.iter().zip(xj).map(|(a, b)| a * b).sum();
            data[i * c + j] = v;
            data[j * c + i] = v;
        }
    }
    let rank_deficient = seg.is_rank_deficient();
    if rank_deficient {
        log::warn!("segment has {t} timestamps for {c} channels; covariance is rank deficient");
    }
    Covariance {
        matrix: SymMatrix::from_raw_unchecked(c, data),
        rank_deficient,
    }
}

pub fn matrix_norm(s: &SymMatrix, kind: NormKind) -> Result<f64> {
    Ok(match kind {
        NormKind::Frobenius => s.frobenius_norm(),
        NormKind::Spectral => {
            let e = eig_sym(s)?;
            e.max_eigenvalue().abs().max(e.min_eigenvalue().abs())
        }
    })
}

/// S / ‖S‖.
pub fn scale_by_norm(s: &SymMatrix, kind: NormKind) -> Result<SymMatrix> {
    let norm = matrix_norm(s, kind)?;
    if !(norm > 0.0) {
        return Err(Error::invalid("cannot scale the zero matrix"));
    }
    Ok(s.scale(1.0 / norm))
}

/// Treats the n² entries as one flat sample and standardizes them to mean 0,
/// standard deviation 1 (population variance). The result is for
/// visualization and evaluation only: it is generally not PSD.
pub fn standardize_entries(s: &SymMatrix) -> Result<SymMatrix> {
    let v = s.as_slice();
    let count = v.len() as f64;
    let mean = v.iter().sum::<f64>() / count;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / count;
    if !(var > 0.0) {
        return Err(Error::invalid("entries have zero variance"));
    }
    let sd = var.sqrt();
    let out = v.iter().map(|x| (x - mean) / sd).collect();
    Ok(SymMatrix::from_raw_unchecked(s.dim(), out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScmSample {
    pub matrix: SymMatrix,
    pub label: Label,
    pub band: usize,
    /// Groups the per-band matrices that belong to one trial.
    pub trial: usize,
    pub provenance: Provenance,
}

impl ScmSample {
    pub fn spd(&self) -> Result<SpdMatrix> {
        SpdMatrix::new(self.matrix.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScmDataset {
    channel_count: usize,
    band_count: usize,
    channel_names: Vec<String>,
    samples: Vec<ScmSample>,
    seed: Option<u64>,
}

impl ScmDataset {
    pub fn new(
        channel_count: usize,
        band_count: usize,
        channel_names: Vec<String>,
        samples: Vec<ScmSample>,
        seed: Option<u64>,
    ) -> Result<Self> {
        if channel_count == 0 || band_count == 0 {
            return Err(Error::invalid("channel and band counts must be positive"));
        }
        if channel_names.len() != channel_count {
            return Err(Error::invalid(format!(
                "{} channel names for {channel_count} channels",
                channel_names.len()
            )));
        }
        for (index, s) in samples.iter().enumerate() {
            if s.matrix.dim() != channel_count {
                return Err(Error::Validation {
                    index,
                    message: format!(
                        "matrix is {0}x{0}, dataset has {channel_count} channels",
                        s.matrix.dim()
                    ),
                });
            }
            if s.band >= band_count {
                return Err(Error::Validation {
                    index,
                    message: format!("band {} out of range (bands = {band_count})", s.band),
                });
            }
        }
        Ok(Self {
            channel_count,
            band_count,
            channel_names,
            samples,
            seed,
        })
    }

    pub fn channel_count(&self) -> usize {
        self.channel_count
    }

    pub fn band_count(&self) -> usize {
        self.band_count
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn samples(&self) -> &[ScmSample] {
        &self.samples
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_counts(&self) -> BTreeMap<Label, usize> {
        let mut out = BTreeMap::new();
        for s in &self.samples {
            *out.entry(s.label).or_insert(0) += 1;
        }
        out
    }

    pub fn samples_for(&self, label: Label, band: usize) -> impl Iterator<Item = &ScmSample> {
        self.samples.iter().filter(move |s| s.label == label && s.band == band)
    }

    /// Samples grouped by (label, trial), each group ordered by band.
    pub fn trials(&self) -> BTreeMap<(Label, usize), Vec<&ScmSample>> {
        let mut out: BTreeMap<(Label, usize), Vec<&ScmSample>> = BTreeMap::new();
        for s in &self.samples {
            out.entry((s.label, s.trial)).or_default().push(s);
        }
        for group in out.values_mut() {
            group.sort_by_key(|s| s.band);
        }
        out
    }

    /// A dataset with the same header restricted to the samples matching `keep`.
    pub fn filter(&self, keep: impl Fn(&ScmSample) -> bool) -> ScmDataset {
        ScmDataset {
            samples: self.samples.iter().filter(|s| keep(s)).cloned().collect(),
            ..self.clone_header()
        }
    }

    pub fn with_samples(&self, samples: Vec<ScmSample>) -> Result<ScmDataset> {
        ScmDataset::new(
            self.channel_count,
            self.band_count,
            self.channel_names.clone(),
            samples,
            self.seed,
        )
    }

    fn clone_header(&self) -> ScmDataset {
        ScmDataset {
            channel_count: self.channel_count,
            band_count: self.band_count,
            channel_names: self.channel_names.clone(),
            samples: Vec::new(),
            seed: self.seed,
        }
    }
}
