// SPDX-License-Identifier: MIT OR Apache-2.0

//! Labeled sequences and their JSONL persistence format.
//!
//! One JSON object per line:
//!
//! ```text
//! {"id":"0","values":[0.1,-0.3,...],"nu":17}
//! {"id":"1","values":[[0.1,2.0],[0.4,1.9]],"nu":null,"tau":5}
//! ```
//!
//! `nu: null` means the sequence has no changepoint. Multivariate frames are
//! nested arrays. The optional `tau` field carries a detection point that was
//! produced elsewhere (`null` = no alarm); it is used by the `given` detector.

use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::simulate::SimSpec;

/// Label information for one sequence. `changepoint: None` encodes ν = ∞.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub id: String,
    pub length: usize,
    pub changepoint: Option<usize>,
}

impl SequenceMeta {
    pub fn new(id: impl Into<String>, length: usize, changepoint: Option<usize>) -> Self {
        Self {
            id: id.into(),
            length,
            changepoint,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::invalid(format!("sequence {}: length must be >= 1", self.id)));
        }
        Ok(())
    }
}

/// First alarm of a detector on one sequence. `tau: None` means no alarm.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionOutcome {
    pub id: String,
    pub tau: Option<usize>,
}

impl DetectionOutcome {
    pub fn new(id: impl Into<String>, tau: Option<usize>) -> Self {
        Self { id: id.into(), tau }
    }
}

/// One observed sequence: frames stored row-major with `dim` features each.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub id: String,
    pub changepoint: Option<usize>,
    dim: usize,
    values: Vec<f64>,
    /// Detection point recorded alongside the data, if any.
    pub recorded_tau: Option<Option<usize>>,
}

impl Sequence {
    pub fn univariate(id: impl Into<String>, values: Vec<f64>, changepoint: Option<usize>) -> Self {
        Self {
            id: id.into(),
            changepoint,
            dim: 1,
            values,
            recorded_tau: None,
        }
    }

    pub fn multivariate(id: impl Into<String>, frames: Vec<Vec<f64>>, changepoint: Option<usize>) -> Result<Self> {
        let id = id.into();
        let dim = frames.first().map_or(1, Vec::len);
        if dim == 0 || frames.iter().any(|f| f.len() != dim) {
            return Err(Error::invalid(format!("sequence {id}: ragged or empty frames")));
        }
        Ok(Self {
            id,
            changepoint,
            dim,
            values: frames.into_iter().flatten().collect(),
            recorded_tau: None,
        })
    }

    pub fn with_recorded_tau(mut self, tau: Option<usize>) -> Self {
        self.recorded_tau = Some(tau);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    /// Raw values; for univariate data this is the series itself.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn meta(&self) -> SequenceMeta {
        SequenceMeta::new(self.id.clone(), self.len(), self.changepoint)
    }

    /// Keeps the first `len` frames; an unobserved changepoint becomes ν = ∞.
    pub fn truncate(&mut self, len: usize) {
        let len = len.min(self.len());
        self.values.truncate(len * self.dim);
        if self.changepoint.is_some_and(|nu| nu >= len) {
            self.changepoint = None;
        }
        if let Some(Some(tau)) = self.recorded_tau {
            if tau >= len {
                self.recorded_tau = Some(None);
            }
        }
    }
}

/// Where a dataset came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Simulated(SimSpec),
    File(PathBuf),
    InMemory,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub sequences: Vec<Sequence>,
    pub provenance: Provenance,
}

impl LabeledDataset {
    pub fn new(sequences: Vec<Sequence>, provenance: Provenance) -> Self {
        Self { sequences, provenance }
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn metas(&self) -> Vec<SequenceMeta> {
        self.sequences.iter().map(Sequence::meta).collect()
    }

    /// Largest observed length; the horizon used when the length law is unknown.
    pub fn max_length(&self) -> usize {
        self.sequences.iter().map(Sequence::len).max().unwrap_or(0)
    }

    /// Checks ids are unique and every changepoint indexes an observed frame.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.sequences.len());
        for s in &self.sequences {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::DuplicateId(s.id.clone()));
            }
            check_labels(s)?;
        }
        Ok(())
    }

    /// Canonical JSONL lines, in dataset order.
    pub fn to_jsonl_lines(&self) -> impl Iterator<Item = String> + '_ {
        self.sequences
            .iter()
            .map(|s| serde_json::to_string(&RecordRef::from(s)).expect("dataset records always serialize"))
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for line in self.to_jsonl_lines() {
            out.write_all(line.as_bytes())?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        self.write_jsonl(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// SHA-256 of the canonical JSONL serialization, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for line in self.to_jsonl_lines() {
            hasher.update(line.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}

pub(crate) fn check_labels(s: &Sequence) -> Result<()> {
    if s.is_empty() {
        return Err(Error::invalid(format!("sequence {}: no frames", s.id)));
    }
    if let Some(nu) = s.changepoint {
        if nu >= s.len() {
            return Err(Error::invalid(format!(
                "sequence {}: changepoint {} is not an observed frame (length {})",
                s.id,
                nu,
                s.len()
            )));
        }
    }
    if let Some(Some(tau)) = s.recorded_tau {
        if tau >= s.len() {
            return Err(Error::invalid(format!(
                "sequence {}: tau {} is not an observed frame (length {})",
                s.id,
                tau,
                s.len()
            )));
        }
    }
    Ok(())
}

/// Frame payload as it appears on disk.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
pub(crate) enum RawValues {
    Flat(Vec<f64>),
    Nested(Vec<Vec<f64>>),
}

#[derive(Deserialize)]
pub(crate) struct Record {
    pub id: RecordId,
    pub values: RawValues,
    #[serde(default)]
    pub nu: Option<usize>,
    #[serde(default, deserialize_with = "present_nullable")]
    pub tau: Option<Option<usize>>,
}

/// Ids may be written as strings or integers.
#[derive(Deserialize)]
#[serde(untagged)]
pub(crate) enum RecordId {
    Text(String),
    Number(u64),
}

impl From<RecordId> for String {
    fn from(id: RecordId) -> Self {
        match id {
            RecordId::Text(s) => s,
            RecordId::Number(n) => n.to_string(),
        }
    }
}

impl Record {
    pub(crate) fn into_sequence(self) -> Result<Sequence> {
        let id: String = self.id.into();
        let mut seq = match self.values {
            RawValues::Flat(v) => Sequence::univariate(id, v, self.nu),
            RawValues::Nested(frames) => Sequence::multivariate(id, frames, self.nu)?,
        };
        seq.recorded_tau = self.tau;
        Ok(seq)
    }
}

fn present_nullable<'de, D>(de: D) -> std::result::Result<Option<Option<usize>>, D::Error>
where
    D: Deserializer<'de>,
{
    Option::<usize>::deserialize(de).map(Some)
}

#[derive(Serialize)]
struct RecordRef<'a> {
    id: &'a str,
    values: FramesRef<'a>,
    nu: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau: Option<Option<usize>>,
}

struct FramesRef<'a>(&'a Sequence);

impl Serialize for FramesRef<'_> {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let seq = self.0;
        if seq.dim == 1 {
            seq.values.serialize(ser)
        } else {
            let mut out = ser.serialize_seq(Some(seq.len()))?;
            for frame in seq.frames() {
                out.serialize_element(frame)?;
            }
            out.end()
        }
    }
}

impl<'a> From<&'a Sequence> for RecordRef<'a> {
    fn from(s: &'a Sequence) -> Self {
        Self {
            id: &s.id,
            values: FramesRef(s),
            nu: s.changepoint,
            tau: s.recorded_tau,
        }
    }
}

/// Short human-readable summary used in logs.
pub fn describe(dataset: &LabeledDataset) -> String {
    let with_change = dataset.sequences.iter().filter(|s| s.changepoint.is_some()).count();
    let total: usize = dataset.sequences.iter().map(Sequence::len).sum();
    format!(
        "{} sequences, {} with a changepoint, {} frames, max length {}",
        dataset.len(),
        with_change,
        total,
        dataset.max_length()
    )
}
