//! Line-delimited dataset files.
//!
//! Line 1 is a JSON header; every following line is one JSON sample record
//! whose matrix entries are decimal strings with 17 significant digits, which
//! round-trip any f64 bit-exactly.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Label, Provenance, ScmDataset, ScmSample};
use crate::error::{Error, Result};
use crate::spd::SymMatrix;

pub const FORMAT_VERSION: u32 = 1;

/// 17 significant digits in scientific notation.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn parse17(s: &str) -> std::result::Result<f64, std::num::ParseFloatError> {
    s.parse()
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Header {
    version: u32,
    channels: usize,
    bands: usize,
    channel_names: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    sample_count: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct SampleRecord {
    label: Label,
    band: usize,
    trial: usize,
    provenance: Provenance,
    row_major_entries: Vec<String>,
}

pub fn write_dataset<W: Write>(d: &ScmDataset, mut w: W) -> Result<()> {
    let header = Header {
        version: FORMAT_VERSION,
        channels: d.channel_count(),
        bands: d.band_count(),
        channel_names: d.channel_names().to_vec(),
        seed: d.seed(),
        sample_count: d.len(),
    };
    writeln!(w, "{}", serde_json::to_string(&header).map_err(io_err)?)?;
    for s in d.samples() {
        let rec = SampleRecord {
            label: s.label,
            band: s.band,
            trial: s.trial,
            provenance: s.provenance,
            row_major_entries: s.matrix.as_slice().iter().map(|&v| fmt17(v)).collect(),
        };
        writeln!(w, "{}", serde_json::to_string(&rec).map_err(io_err)?)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(r: R) -> Result<ScmDataset> {
    let mut lines = BufReader::new(r).lines();
    let first = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })??;

    // Peek at the version before committing to the full header shape.
    let raw: serde_json::Value = serde_json::from_str(&first).map_err(|e| parse_err(1, e))?;
    let version = raw.get("version").and_then(|v| v.as_u64()).ok_or(Error::Parse {
        line: 1,
        message: "header has no numeric `version`".into(),
    })?;
    if version != FORMAT_VERSION as u64 {
        return Err(Error::Version {
            found: version as u32,
            expected: FORMAT_VERSION,
        });
    }
    let header: Header = serde_json::from_value(raw).map_err(|e| parse_err(1, e))?;

    let n = header.channels;
    let mut samples = Vec::with_capacity(header.sample_count);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SampleRecord = serde_json::from_str(&line).map_err(|e| parse_err(lineno, e))?;
        let index = samples.len();
        if rec.row_major_entries.len() != n * n {
            return Err(Error::Validation {
                index,
                message: format!(
                    "{} entries, expected {} for {n} channels",
                    rec.row_major_entries.len(),
                    n * n
                ),
            });
        }
        let entries = rec
            .row_major_entries
            .iter()
            .map(|s| parse17(s))
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Parse {
                line: lineno,
                message: format!("bad matrix entry: {e}"),
            })?;
        let matrix = SymMatrix::from_row_major(n, entries).map_err(|e| Error::Validation {
            index,
            message: e.to_string(),
        })?;
        samples.push(ScmSample {
            matrix,
            label: rec.label,
            band: rec.band,
            trial: rec.trial,
            provenance: rec.provenance,
        });
    }
    if samples.len() != header.sample_count {
        return Err(Error::Parse {
            line: samples.len() + 2,
            message: format!(
                "file truncated: header declares {} samples, found {}",
                header.sample_count,
                samples.len()
            ),
        });
    }
    ScmDataset::new(n, header.bands, header.channel_names, samples, header.seed)
}

pub fn save_dataset(d: &ScmDataset, path: impl AsRef<Path>) -> Result<()> {
    write_dataset(d, BufWriter::new(crate::error::create_file(path.as_ref())?))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<ScmDataset> {
    read_dataset(crate::error::open_file(path.as_ref())?)
}

fn parse_err(line: usize, e: serde_json::Error) -> Error {
    Error::Parse {
        line,
        message: format!("column {}: {e}", e.column()),
    }
}

fn io_err(e: serde_json::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
