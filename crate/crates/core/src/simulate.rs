// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic labeled datasets with known pre/post-change distributions.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, Provenance, Sequence};
use crate::detectors::LikelihoodModel;
use crate::error::{Error, Result};
use crate::rng::{self, Domain};

/// Distribution of sequence lengths (number of frames).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthLaw {
    Fixed(usize),
    /// Uniform on `lo..=hi`.
    UniformRange(usize, usize),
}

impl LengthLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LengthLaw::Fixed(t) if t >= 1 => Ok(()),
            LengthLaw::UniformRange(lo, hi) if 1 <= lo && lo <= hi => Ok(()),
            _ => Err(Error::invalid(format!("invalid length law {self:?}"))),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match *self {
            LengthLaw::Fixed(t) => t,
            LengthLaw::UniformRange(lo, hi) => rng.random_range(lo..=hi),
        }
    }

    /// Least upper bound of the support.
    pub fn max_length(&self) -> usize {
        match *self {
            LengthLaw::Fixed(t) => t,
            LengthLaw::UniformRange(_, hi) => hi,
        }
    }
}

/// How the changepoint of a with-change sequence is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangepointLaw {
    /// Number of failures before the first success, support `{0, 1, ...}`.
    Geometric(f64),
    /// Uniform on the frames `{0, ..., T − 1}` of the sequence.
    UniformOverLength,
    None,
}

impl ChangepointLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ChangepointLaw::Geometric(p) if p > 0.0 && p <= 1.0 => Ok(()),
            ChangepointLaw::Geometric(p) => Err(Error::invalid(format!(
                "geometric success probability must lie in (0, 1], got {p}"
            ))),
            _ => Ok(()),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, length: usize) -> Option<usize> {
        match *self {
            ChangepointLaw::Geometric(p) => {
                let g = Geometric::new(p).expect("validated probability");
                Some(g.sample(rng).min(usize::MAX as u64) as usize)
            }
            ChangepointLaw::UniformOverLength => Some(rng.random_range(0..length)),
            ChangepointLaw::None => None,
        }
    }
}

/// Full recipe for a simulated dataset; `seed` makes it reproducible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub model: LikelihoodModel,
    pub n_sequences: usize,
    pub length_law: LengthLaw,
    pub changepoint_law: ChangepointLaw,
    pub with_change_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    /// Optional random truncation applied after generation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<LengthLaw>,
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.length_law.validate()?;
        self.changepoint_law.validate()?;
        if let Some(t) = &self.truncation {
            t.validate()?;
        }
        if self.n_sequences == 0 {
            return Err(Error::invalid("n_sequences must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.with_change_fraction) {
            return Err(Error::invalid("with_change_fraction must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Horizon implied by the length laws: the largest length that can occur.
    pub fn max_length(&self) -> usize {
        match self.truncation {
            Some(t) => t.max_length().min(self.length_law.max_length()),
            None => self.length_law.max_length(),
        }
    }
}

fn generate_one(spec: &SimSpec, index: usize) -> Sequence {
    let mut rng: ChaCha8Rng = rng::stream(spec.seed, Domain::Simulate, index as u64);
    let length = spec.length_law.sample(&mut rng);
    let has_change = rng.random::<f64>() < spec.with_change_fraction;
    let changepoint = if has_change {
        spec.changepoint_law.sample(&mut rng, length).filter(|&nu| nu < length)
    } else {
        None
    };
    let switch = changepoint.unwrap_or(usize::MAX);
    let values = (0..length)
        .map(|s| {
            if s < switch {
                spec.model.sample_pre(&mut rng)
            } else {
                spec.model.sample_post(&mut rng)
            }
        })
        .collect();
    Sequence::univariate(index.to_string(), values, changepoint)
}

/// Draws a dataset. Each sequence uses its own counter-derived stream, so the
/// result is identical for any thread count.
pub fn simulate(spec: &SimSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let sequences: Vec<Sequence> = (0..spec.n_sequences)
        .into_par_iter()
        .map(|i| generate_one(spec, i))
        .collect();
    let mut dataset = LabeledDataset::new(sequences, Provenance::Simulated(spec.clone()));
    if let Some(law) = spec.truncation {
        let report = truncate(&mut dataset, law, spec.seed)?;
        if report.clamped > 0 {
            log::debug!(
                "truncation clamped {} sequences to their original length",
                report.clamped
            );
        }
    }
    Ok(dataset)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TruncationReport {
    /// Sequences whose drawn length exceeded the original and were kept whole.
    pub clamped: usize,
    /// Sequences whose changepoint was cut off.
    pub changes_removed: usize,
}

/// Cuts every sequence to an independently drawn length. A changepoint that
/// falls outside the kept prefix is reset to ν = ∞.
pub fn truncate(dataset: &mut LabeledDataset, law: LengthLaw, seed: u64) -> Result<TruncationReport> {
    law.validate()?;
    let results: Vec<(bool, bool)> = dataset
        .sequences
        .par_iter_mut()
        .enumerate()
        .map(|(i, seq)| {
            let mut rng = rng::stream(seed, Domain::Truncate, i as u64);
            let drawn = law.sample(&mut rng);
            let clamped = drawn > seq.len();
            let had_change = seq.changepoint.is_some();
            seq.truncate(drawn);
            (clamped, had_change && seq.changepoint.is_none())
        })
        .collect();
    Ok(TruncationReport {
        clamped: results.iter().filter(|r| r.0).count(),
        changes_removed: results.iter().filter(|r| r.1).count(),
    })
}
