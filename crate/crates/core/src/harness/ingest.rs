// SPDX-License-Identifier: MIT OR Apache-2.0

//! Reading labeled datasets from JSONL or CSV.
//!
//! CSV files carry a header with the columns `id`, `nu`, `values` and an
//! optional `tau`. Frames in `values` are separated by `;` and the features
//! of a multivariate frame by `|`. An empty `nu` or `tau` field means null.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::dataset::{check_labels, LabeledDataset, Provenance, Record, Sequence};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Jsonl,
    Csv,
}

impl DataFormat {
    /// Guesses the format from a file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => DataFormat::Csv,
            _ => DataFormat::Jsonl,
        }
    }
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" | "ndjson" => Ok(DataFormat::Jsonl),
            "csv" => Ok(DataFormat::Csv),
            other => Err(Error::invalid(format!("unknown data format '{other}'"))),
        }
    }
}

/// Counts from one ingestion.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub read: usize,
    pub kept: usize,
    /// Shorter than the minimum length.
    pub dropped: usize,
    /// Records whose labels do not fit their frames.
    pub rejected: usize,
    pub diagnostics: Vec<String>,
}

pub const DEFAULT_MIN_LENGTH: usize = 2;

/// Reads a dataset from `path`.
pub fn ingest(path: &Path, format: DataFormat, min_length: usize) -> Result<(LabeledDataset, IngestReport)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let (sequences, report) = read_sequences(BufReader::new(file), format, min_length)?;
    Ok((
        LabeledDataset::new(sequences, Provenance::File(path.to_path_buf())),
        report,
    ))
}

/// Reads records from any reader.
pub fn read_sequences<R: Read>(
    reader: R,
    format: DataFormat,
    min_length: usize,
) -> Result<(Vec<Sequence>, IngestReport)> {
    let parsed = match format {
        DataFormat::Jsonl => parse_jsonl(BufReader::new(reader))?,
        DataFormat::Csv => parse_csv(reader)?,
    };
    let mut report = IngestReport::default();
    let mut ids = HashSet::new();
    let mut kept = Vec::with_capacity(parsed.len());
    for (line, seq) in parsed {
        report.read += 1;
        if !ids.insert(seq.id.clone()) {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate id '{}'", seq.id),
            });
        }
        if let Err(e) = check_labels(&seq) {
            log::warn!("line {line}: rejected: {e}");
            report.rejected += 1;
            report.diagnostics.push(format!("line {line}: {e}"));
            continue;
        }
        if seq.len() < min_length {
            report.dropped += 1;
            continue;
        }
        kept.push(seq);
    }
    report.kept = kept.len();
    Ok((kept, report))
}

fn parse_jsonl<R: BufRead>(reader: R) -> Result<Vec<(usize, Sequence)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        let seq = record.into_sequence().map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        out.push((line_no, seq));
    }
    Ok(out)
}

fn parse_csv<R: Read>(reader: R) -> Result<Vec<(usize, Sequence)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    let column = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(id_col), Some(nu_col), Some(values_col)) = (column("id"), column("nu"), column("values")) else {
        return Err(Error::Parse {
            line: 1,
            msg: "CSV header must contain id, nu and values".into(),
        });
    };
    let tau_col = column("tau");

    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(e, 0))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let err = |msg: String| Error::Parse { line, msg };
        let field = |c: usize| row.get(c).unwrap_or("");
        let index = |s: &str, what: &str| -> Result<Option<usize>> {
            if s.is_empty() || s.eq_ignore_ascii_case("null") {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| err(format!("bad {what} '{s}'")))
            }
        };
        let nu = index(field(nu_col), "nu")?;
        let frames = field(values_col)
            .split(';')
            .filter(|f| !f.trim().is_empty())
            .map(|f| {
                f.split('|')
                    .map(|x| x.trim().parse::<f64>().map_err(|_| err(format!("bad value '{x}'"))))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let id = field(id_col).to_string();
        let mut seq = if frames.iter().all(|f| f.len() == 1) {
            Sequence::univariate(id, frames.into_iter().map(|f| f[0]).collect(), nu)
        } else {
            Sequence::multivariate(id, frames, nu).map_err(|e| err(e.to_string()))?
        };
        if let Some(c) = tau_col {
            seq.recorded_tau = Some(index(field(c), "tau")?);
        }
        out.push((line, seq));
    }
    Ok(out)
}

fn csv_error(e: csv::Error, fallback: usize) -> Error {
    let line = e.position().map_or(fallback, |p| p.line() as usize);
    Error::Parse {
        line,
        msg: e.to_string(),
    }
}
