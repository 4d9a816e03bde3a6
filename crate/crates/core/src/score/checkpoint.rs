//! Score-network checkpoints: a JSON header line followed by one line per
//! parameter tensor, values as 17-significant-digit decimal strings.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::{fmt17, parse17, Label};
use crate::error::{Error, Result};
use crate::score::network::{Dense, NetworkConfig, ScoreNetwork};
use crate::score::schedule::NoiseSchedule;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: ScoreNetwork,
    pub schedule: NoiseSchedule,
    pub channels: usize,
    pub seed: u64,
    pub iteration: usize,
    /// Class the model was trained on, when trained per class.
    pub label: Option<Label>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Header {
    version: u32,
    input_dim: usize,
    channels: usize,
    layer_widths: Vec<usize>,
    time_embed_dim: usize,
    bands: usize,
    band_embed_dim: usize,
    data_scale: f64,
    sigma_min: f64,
    sigma_max: f64,
    seed: u64,
    iteration: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    class: Option<Label>,
}

#[derive(Serialize, Deserialize)]
struct Tensor {
    name: String,
    shape: Vec<usize>,
    values: Vec<String>,
}

fn tensor(name: String, shape: Vec<usize>, values: impl Iterator<Item = f64>) -> Tensor {
    Tensor {
        name,
        shape,
        values: values.map(fmt17).collect(),
    }
}

pub fn write_checkpoint<W: Write>(ck: &Checkpoint, mut w: W) -> Result<()> {
    let cfg = ck.network.config();
    let header = Header {
        version: CHECKPOINT_VERSION,
        input_dim: cfg.input_dim,
        channels: ck.channels,
        layer_widths: cfg.hidden.clone(),
        time_embed_dim: cfg.time_embed_dim,
        bands: cfg.bands,
        band_embed_dim: cfg.band_embed_dim,
        data_scale: cfg.data_scale,
        sigma_min: ck.schedule.sigma_min(),
        sigma_max: ck.schedule.sigma_max(),
        seed: ck.seed,
        iteration: ck.iteration,
        class: ck.label,
    };
    writeln!(w, "{}", to_line(&header)?)?;
    for (l, layer) in ck.network.layers().iter().enumerate() {
        let (r, c) = layer.weight.dim();
        let t = tensor(format!("layers.{l}.weight"), vec![r, c], layer.weight.iter().copied());
        writeln!(w, "{}", to_line(&t)?)?;
        let t = tensor(format!("layers.{l}.bias"), vec![c], layer.bias.iter().copied());
        writeln!(w, "{}", to_line(&t)?)?;
    }
    let e = ck.network.band_embedding();
    let (r, c) = e.dim();
    let t = tensor("band_embedding".into(), vec![r, c], e.iter().copied());
    writeln!(w, "{}", to_line(&t)?)?;
    w.flush()?;
    Ok(())
}

pub(crate) fn to_line<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string(v).map_err(|e| Error::Io(std::io::Error::other(e)))
}

fn read_tensor(line: Option<std::io::Result<String>>, lineno: usize, name: &str, shape: &[usize]) -> Result<Vec<f64>> {
    let line = line.ok_or_else(|| Error::Parse {
        line: lineno,
        message: format!("missing tensor `{name}`"),
    })??;
    let t: Tensor = serde_json::from_str(&line).map_err(|e| Error::Parse {
        line: lineno,
        message: e.to_string(),
    })?;
    if t.name != name || t.shape != shape {
        return Err(Error::Parse {
            line: lineno,
            message: format!("expected tensor `{name}` {shape:?}, found `{}` {:?}", t.name, t.shape),
        });
    }
    let count: usize = shape.iter().product();
    if t.values.len() != count {
        return Err(Error::Parse {
            line: lineno,
            message: format!("tensor `{name}` has {} values, expected {count}", t.values.len()),
        });
    }
    t.values
        .iter()
        .map(|s| parse17(s))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse {
            line: lineno,
            message: format!("bad value in `{name}`: {e}"),
        })
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<Checkpoint> {
    let mut lines = BufReader::new(r).lines();
    let first = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty checkpoint".into(),
    })??;
    let raw: serde_json::Value = serde_json::from_str(&first).map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    match raw.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == CHECKPOINT_VERSION as u64 => {}
        Some(v) => {
            return Err(Error::Version {
                found: v as u32,
                expected: CHECKPOINT_VERSION,
            })
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "header has no numeric `version`".into(),
            })
        }
    }
    let h: Header = serde_json::from_value(raw).map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let config = NetworkConfig {
        input_dim: h.input_dim,
        time_embed_dim: h.time_embed_dim,
        bands: h.bands,
        band_embed_dim: h.band_embed_dim,
        hidden: h.layer_widths.clone(),
        data_scale: h.data_scale,
    };
    config.validate()?;
    let mut widths = vec![config.features()];
    widths.extend(&config.hidden);
    widths.push(config.input_dim);

    let mut lineno = 1;
    let mut layers = Vec::new();
    for (l, pair) in widths.windows(2).enumerate() {
        lineno += 1;
        let w = read_tensor(lines.next(), lineno, &format!("layers.{l}.weight"), &[pair[0], pair[1]])?;
        lineno += 1;
        let b = read_tensor(lines.next(), lineno, &format!("layers.{l}.bias"), &[pair[1]])?;
        layers.push(Dense {
            weight: Array2::from_shape_vec((pair[0], pair[1]), w).expect("shape checked"),
            bias: Array1::from_vec(b),
        });
    }
    lineno += 1;
    let e = read_tensor(lines.next(), lineno, "band_embedding", &[h.bands, h.band_embed_dim])?;
    let band_embedding = Array2::from_shape_vec((h.bands, h.band_embed_dim), e).expect("shape checked");

    Ok(Checkpoint {
        network: ScoreNetwork::from_parts(config, layers, band_embedding)?,
        schedule: NoiseSchedule::new(h.sigma_min, h.sigma_max)?,
        channels: h.channels,
        seed: h.seed,
        iteration: h.iteration,
        label: h.class,
    })
}

pub fn save_checkpoint(ck: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    write_checkpoint(ck, BufWriter::new(crate::error::create_file(path.as_ref())?))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    read_checkpoint(crate::error::open_file(path.as_ref())?)
}
