//! Evaluation of generated covariance sets: a minimum-distance-to-mean (MDM)
//! classifier under AIRM, Fréchet-mean proximity, and flat export for
//! external embedding tools.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{fmt17, parse17, standardize_entries, Label, Provenance, ScmDataset, ScmSample};
use crate::error::{Error, Result};
use crate::score::checkpoint::to_line;
use crate::spd::{airm_distance, frechet_mean, KarcherOptions, SpdMatrix, SymMatrix};

pub const MDM_VERSION: u32 = 1;

/// Fréchet mean of a set. When the iteration cap is hit the last iterate is
/// used, since evaluation only needs a good approximation.
pub fn class_mean(set: &[SpdMatrix]) -> Result<SpdMatrix> {
    match frechet_mean(set, &KarcherOptions::default()) {
        Ok(m) => Ok(m.mean),
        Err(Error::MeanNoConvergence { last, residual, .. }) => {
            log::warn!("frechet mean stopped at gradient norm {residual:e}; using last iterate");
            Ok(*last)
        }
        Err(e) => Err(e),
    }
}

fn spd_set<'a>(samples: impl Iterator<Item = &'a ScmSample>) -> Result<Vec<SpdMatrix>> {
    samples.map(ScmSample::spd).collect()
}

/// Per-class, per-band Fréchet means of a dataset.
pub fn class_band_means(d: &ScmDataset) -> Result<BTreeMap<Label, Vec<SpdMatrix>>> {
    let mut out = BTreeMap::new();
    for label in Label::ALL {
        let mut per_band = Vec::with_capacity(d.band_count());
        for band in 0..d.band_count() {
            let set = spd_set(d.samples_for(label, band))?;
            if set.is_empty() {
                return Err(Error::invalid(format!("no `{label}` samples in band {band}")));
            }
            per_band.push(class_mean(&set)?);
        }
        out.insert(label, per_band);
    }
    Ok(out)
}

/// √(Σ_b d²(a_b, b_b)): the AIRM distance on the product of per-band manifolds.
pub fn multiband_distance(a: &[SpdMatrix], b: &[SpdMatrix]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid("band count mismatch"));
    }
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += airm_distance(x, y)?.powi(2);
    }
    Ok(s.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdmModel {
    class_means: BTreeMap<Label, Vec<SpdMatrix>>,
    bands: usize,
}

impl MdmModel {
    pub fn from_means(class_means: BTreeMap<Label, Vec<SpdMatrix>>) -> Result<Self> {
        let bands = class_means
            .values()
            .next()
            .map(Vec::len)
            .ok_or_else(|| Error::invalid("model needs at least one class"))?;
        if bands == 0 || class_means.values().any(|m| m.len() != bands) {
            return Err(Error::invalid("every class needs one mean per band"));
        }
        Ok(Self { class_means, bands })
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn class_means(&self) -> &BTreeMap<Label, Vec<SpdMatrix>> {
        &self.class_means
    }

    pub fn mean(&self, label: Label, band: usize) -> Option<&SpdMatrix> {
        self.class_means.get(&label).and_then(|m| m.get(band))
    }

    /// Class minimizing Σ_bands d²(sample_band, mean_class,band). Ties go to
    /// the lexicographically first class tag.
    pub fn predict(&self, bands: &[(usize, &SpdMatrix)]) -> Result<Label> {
        if bands.is_empty() {
            return Err(Error::invalid("nothing to classify"));
        }
        let mut best: Option<(f64, Label)> = None;
        for (&label, means) in &self.class_means {
            let mut total = 0.0;
            for &(band, m) in bands {
                let mean = means
                    .get(band)
                    .ok_or_else(|| Error::invalid(format!("band {band} not in model ({} bands)", self.bands)))?;
                total += airm_distance(m, mean)?.powi(2);
            }
            if best.is_none_or(|(d, _)| total < d) {
                best = Some((total, label));
            }
        }
        Ok(best.expect("at least one class").1)
    }

    pub fn predict_sample(&self, sample: &ScmSample) -> Result<Label> {
        let m = sample.spd()?;
        self.predict(&[(sample.band, &m)])
    }

    /// Classifies every trial (all bands of one (label, trial) pair jointly).
    pub fn classify_trials(&self, d: &ScmDataset) -> Result<Confusion> {
        let mut confusion = Confusion::default();
        for ((label, _), group) in d.trials() {
            let mats = spd_set(group.iter().copied())?;
            let bands: Vec<(usize, &SpdMatrix)> = group.iter().map(|s| s.band).zip(mats.iter()).collect();
            confusion.record(label, self.predict(&bands)?);
        }
        Ok(confusion)
    }
}

/// Fits one Fréchet mean per (class, band).
pub fn fit_mdm(train: &ScmDataset) -> Result<MdmModel> {
    MdmModel::from_means(class_band_means(train)?)
}

/// 2×2 counts, rows = intended class, columns = predicted class, both in
/// `Label::ALL` order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion(pub [[usize; 2]; 2]);

fn label_index(l: Label) -> usize {
    match l {
        Label::Left => 0,
        Label::Right => 1,
    }
}

impl Confusion {
    pub fn record(&mut self, truth: Label, predicted: Label) {
        self.0[label_index(truth)][label_index(predicted)] += 1;
    }

    pub fn total(&self) -> usize {
        self.0.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        self.0[0][0] + self.0[1][1]
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.correct() as f64 / self.total() as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BandDistance {
    pub class: Label,
    pub band: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalReport {
    /// Fraction of generated trials classified as their intended class.
    pub accuracy: f64,
    pub confusion: Confusion,
    pub sample_count: usize,
    /// AIRM distance between real and generated Fréchet means per (class, band).
    pub band_distances: Vec<BandDistance>,
    /// Mean over classes of the multiband real-vs-generated mean distance.
    pub mean_distance: f64,
    /// Multiband distance between the two real class means.
    pub real_inter_class_distance: f64,
    /// Accuracy of the model on the real dataset, for reference.
    pub real_accuracy: f64,
}

impl EvalReport {
    pub fn is_consistent(&self) -> bool {
        self.confusion.total() == self.sample_count && (self.accuracy - self.confusion.accuracy()).abs() < 1e-15
    }
}

/// Classifies the generated trials against their intended class and
/// compares real and generated Fréchet means.
pub fn evaluate_generated(model: &MdmModel, generated: &ScmDataset, real: &ScmDataset) -> Result<EvalReport> {
    if generated.channel_count() != real.channel_count() || generated.band_count() != real.band_count() {
        return Err(Error::invalid("generated and real datasets have different shapes"));
    }
    if real.band_count() != model.bands() {
        return Err(Error::invalid("model band count does not match the datasets"));
    }
    let confusion = model.classify_trials(generated)?;
    let real_accuracy = model.classify_trials(real)?.accuracy();
    let real_means = class_band_means(real)?;
    let gen_means = class_band_means(generated)?;

    let mut band_distances = Vec::new();
    let mut pooled = 0.0;
    for label in Label::ALL {
        let (r, g) = (&real_means[&label], &gen_means[&label]);
        for (band, (rm, gm)) in r.iter().zip(g).enumerate() {
            band_distances.push(BandDistance {
                class: label,
                band,
                distance: airm_distance(rm, gm)?,
            });
        }
        pooled += multiband_distance(r, g)?;
    }
    Ok(EvalReport {
        accuracy: confusion.accuracy(),
        confusion,
        sample_count: confusion.total(),
        band_distances,
        mean_distance: pooled / Label::ALL.len() as f64,
        real_inter_class_distance: multiband_distance(&real_means[&Label::Left], &real_means[&Label::Right])?,
        real_accuracy,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct MdmHeader {
    version: u32,
    channels: usize,
    bands: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct MdmRecord {
    class: Label,
    band: usize,
    row_major_entries: Vec<String>,
}

pub fn write_mdm<W: Write>(model: &MdmModel, mut w: W) -> Result<()> {
    let channels = model.class_means.values().next().map_or(0, |m| m[0].dim());
    writeln!(
        w,
        "{}",
        to_line(&MdmHeader {
            version: MDM_VERSION,
            channels,
            bands: model.bands
        })?
    )?;
    for (&class, means) in &model.class_means {
        for (band, m) in means.iter().enumerate() {
            let rec = MdmRecord {
                class,
                band,
                row_major_entries: m.as_sym().as_slice().iter().map(|&v| fmt17(v)).collect(),
            };
            writeln!(w, "{}", to_line(&rec)?)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_mdm<R: Read>(r: R) -> Result<MdmModel> {
    let mut lines = BufReader::new(r).lines();
    let first = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty model file".into(),
    })??;
    let h: MdmHeader = serde_json::from_str(&first).map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if h.version != MDM_VERSION {
        return Err(Error::Version {
            found: h.version,
            expected: MDM_VERSION,
        });
    }
    let mut slots: BTreeMap<Label, Vec<Option<SpdMatrix>>> = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: MdmRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if rec.band >= h.bands {
            return Err(Error::Parse {
                line: lineno,
                message: format!("band {} out of range", rec.band),
            });
        }
        let entries = rec
            .row_major_entries
            .iter()
            .map(|s| parse17(s))
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
        let m = SpdMatrix::new(SymMatrix::from_row_major(h.channels, entries)?)?;
        slots.entry(rec.class).or_insert_with(|| vec![None; h.bands])[rec.band] = Some(m);
    }
    let mut means = BTreeMap::new();
    for (label, v) in slots {
        let v: Option<Vec<SpdMatrix>> = v.into_iter().collect();
        means.insert(
            label,
            v.ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("class `{label}` is missing a band"),
            })?,
        );
    }
    MdmModel::from_means(means)
}

pub fn save_mdm(model: &MdmModel, path: impl AsRef<Path>) -> Result<()> {
    write_mdm(model, BufWriter::new(crate::error::create_file(path.as_ref())?))
}

pub fn load_mdm(path: impl AsRef<Path>) -> Result<MdmModel> {
    read_mdm(crate::error::open_file(path.as_ref())?)
}

/// One exported matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatRow {
    pub provenance: Provenance,
    pub label: Label,
    pub band: usize,
    pub trial: usize,
    pub entries: Vec<f64>,
}

/// Writes one tab-separated row per sample (datasets in order, samples in
/// order): provenance, class, band, trial, then the n² row-major entries.
/// With `standardize`, each matrix first goes through
/// [`standardize_entries`].
pub fn write_flat<W: Write>(datasets: &[&ScmDataset], standardize: bool, mut w: W) -> Result<usize> {
    let n = match datasets.first() {
        Some(d) => d.channel_count(),
        None => return Err(Error::invalid("no datasets to export")),
    };
    if datasets.iter().any(|d| d.channel_count() != n) {
        return Err(Error::invalid("datasets have different channel counts"));
    }
    write!(w, "provenance\tclass\tband\ttrial")?;
    for i in 0..n {
        for j in 0..n {
            write!(w, "\ts{i}_{j}")?;
        }
    }
    writeln!(w)?;
    let mut rows = 0;
    for d in datasets {
        for s in d.samples() {
            let m = if standardize {
                standardize_entries(&s.matrix)?
            } else {
                s.matrix.clone()
            };
            write!(
                w,
                "{}\t{}\t{}\t{}",
                s.provenance.as_str(),
                s.label.as_str(),
                s.band,
                s.trial
            )?;
            for v in m.as_slice() {
                write!(w, "\t{}", fmt17(*v))?;
            }
            writeln!(w)?;
            rows += 1;
        }
    }
    w.flush()?;
    Ok(rows)
}

pub fn export_flat(datasets: &[&ScmDataset], standardize: bool, path: impl AsRef<Path>) -> Result<usize> {
    write_flat(
        datasets,
        standardize,
        BufWriter::new(crate::error::create_file(path.as_ref())?),
    )
}

pub fn read_flat<R: Read>(r: R) -> Result<Vec<FlatRow>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate().skip(1) {
        let lineno = i + 1;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let bad = |m: String| Error::Parse {
            line: lineno,
            message: m,
        };
        let mut fields = line.split('\t');
        let mut next = |what: &str| fields.next().ok_or_else(|| bad(format!("missing {what}")));
        let provenance = match next("provenance")? {
            "real" => Provenance::Real,
            "generated" => Provenance::Generated,
            other => return Err(bad(format!("unknown provenance `{other}`"))),
        };
        let label: Label = next("class")?.parse().map_err(|e: Error| bad(e.to_string()))?;
        let band = next("band")?.parse().map_err(|e| bad(format!("band: {e}")))?;
        let trial = next("trial")?.parse().map_err(|e| bad(format!("trial: {e}")))?;
        let entries = fields
            .map(parse17)
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| bad(format!("entry: {e}")))?;
        out.push(FlatRow {
            provenance,
            label,
            band,
            trial,
            entries,
        });
    }
    Ok(out)
}
