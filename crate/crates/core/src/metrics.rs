// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run-length and detection-delay estimators.
//!
//! The two Kaplan-Meier estimators treat every sequence as a right-censored
//! observation of the detection time:
//!
//! * KM-ARL: event = first alarm `τ`, censoring at `min(ν, T)`. Every sequence
//!   contributes, whatever the threshold.
//! * KM-ADD: over sequences with a changepoint that were not preceded by a
//!   false alarm, event = delay `τ − ν`, censoring at `T − ν`.
//!
//! The conventional estimators (LB-ARL, LB-ADD, Naive ARL) average the
//! detection times that happened to be observed and silently drop the rest.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{DetectionOutcome, SequenceMeta};
use crate::error::{Error, Result};
use crate::survival::{fit_km, max_last_observed, rmst, SurvivalSample};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MetricName {
    KmArl,
    KmAdd,
    LbArl,
    LbAdd,
    NaiveArl,
}

impl MetricName {
    pub const ALL: [MetricName; 5] = [
        MetricName::KmArl,
        MetricName::KmAdd,
        MetricName::LbArl,
        MetricName::LbAdd,
        MetricName::NaiveArl,
    ];

    /// Command-line spelling, e.g. `km-arl`.
    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::KmArl => "km-arl",
            MetricName::KmAdd => "km-add",
            MetricName::LbArl => "lb-arl",
            MetricName::LbAdd => "lb-add",
            MetricName::NaiveArl => "naive-arl",
        }
    }

    pub fn is_kaplan_meier(self) -> bool {
        matches!(self, MetricName::KmArl | MetricName::KmAdd)
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        MetricName::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| Error::invalid(format!("unknown metric '{s}'")))
    }
}

/// One estimator evaluated on one dataset. `None` encodes UNDEFINED.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricEstimate {
    pub name: MetricName,
    pub value: Option<f64>,
    pub sem: Option<f64>,
    pub n_used: usize,
    pub upper_limit: Option<f64>,
    pub extrapolation_flag: bool,
    /// Survival estimate at the upper limit (KM metrics only).
    #[serde(skip)]
    pub tail_survival: Option<f64>,
}

impl MetricEstimate {
    fn undefined(name: MetricName) -> Self {
        Self {
            name,
            value: None,
            sem: None,
            n_used: 0,
            upper_limit: None,
            extrapolation_flag: false,
            tail_survival: None,
        }
    }

    pub fn is_defined(&self) -> bool {
        self.value.is_some()
    }
}

/// A sequence's labels paired with the detector's first alarm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Observation {
    pub length: usize,
    pub changepoint: Option<usize>,
    pub tau: Option<usize>,
}

impl Observation {
    pub fn new(length: usize, changepoint: Option<usize>, tau: Option<usize>) -> Result<Self> {
        if length == 0 {
            return Err(Error::invalid("sequence length must be >= 1"));
        }
        if let Some(nu) = changepoint {
            if nu >= length {
                return Err(Error::invalid(format!(
                    "changepoint {nu} is not an observed frame (length {length})"
                )));
            }
        }
        if let Some(t) = tau {
            if t >= length {
                return Err(Error::invalid(format!(
                    "detection {t} is not an observed frame (length {length})"
                )));
            }
        }
        Ok(Self {
            length,
            changepoint,
            tau,
        })
    }

    /// ARL censoring time `min(ν, T)`.
    fn arl_censoring(&self) -> usize {
        self.changepoint.map_or(self.length, |nu| nu.min(self.length))
    }

    fn arl_sample(&self) -> SurvivalSample {
        let c = self.arl_censoring();
        match self.tau {
            Some(t) if t < c => SurvivalSample::event(t as f64),
            _ => SurvivalSample::censored(c as f64),
        }
    }

    /// `None` when the sequence has no change or raised a false alarm first.
    fn add_sample(&self) -> Option<SurvivalSample> {
        let nu = self.changepoint?;
        match self.tau {
            Some(t) if t < nu => None,
            Some(t) => Some(SurvivalSample::event((t - nu) as f64)),
            None => Some(SurvivalSample::censored((self.length - nu) as f64)),
        }
    }

    fn in_lb_arl(&self) -> bool {
        self.changepoint.is_none() && self.tau.is_some()
    }

    fn in_naive_arl(&self) -> bool {
        match (self.tau, self.changepoint) {
            (Some(_), None) => true,
            (Some(t), Some(nu)) => t < nu,
            (None, _) => false,
        }
    }

    fn lb_delay(&self) -> Option<usize> {
        match (self.tau, self.changepoint) {
            (Some(t), Some(nu)) if t >= nu => Some(t - nu),
            _ => None,
        }
    }
}

/// Matches outcomes to metas by id, preserving the order of `metas`.
pub fn pair(metas: &[SequenceMeta], outcomes: &[DetectionOutcome]) -> Result<Vec<Observation>> {
    let mut by_id: HashMap<&str, Option<usize>> = HashMap::with_capacity(outcomes.len());
    for o in outcomes {
        if by_id.insert(o.id.as_str(), o.tau).is_some() {
            return Err(Error::DuplicateId(o.id.clone()));
        }
    }
    if metas.len() != outcomes.len() {
        return Err(Error::IdMismatch(format!(
            "{} sequences but {} detection outcomes",
            metas.len(),
            outcomes.len()
        )));
    }
    let mut seen = HashMap::with_capacity(metas.len());
    metas
        .iter()
        .map(|m| {
            m.validate()?;
            if seen.insert(m.id.as_str(), ()).is_some() {
                return Err(Error::DuplicateId(m.id.clone()));
            }
            let tau = by_id
                .get(m.id.as_str())
                .ok_or_else(|| Error::IdMismatch(format!("no detection outcome for '{}'", m.id)))?;
            Observation::new(m.length, m.changepoint, *tau)
                .map_err(|e| Error::invalid(format!("sequence {}: {e}", m.id)))
        })
        .collect()
}

/// Right-censored detection times feeding KM-ARL, one per sequence.
pub fn arl_samples(metas: &[SequenceMeta], outcomes: &[DetectionOutcome]) -> Result<Vec<SurvivalSample>> {
    Ok(pair(metas, outcomes)?.iter().map(Observation::arl_sample).collect())
}

/// Right-censored detection delays feeding KM-ADD, eligible sequences only.
pub fn add_samples(metas: &[SequenceMeta], outcomes: &[DetectionOutcome]) -> Result<Vec<SurvivalSample>> {
    Ok(pair(metas, outcomes)?
        .iter()
        .filter_map(Observation::add_sample)
        .collect())
}

pub fn km_arl(
    metas: &[SequenceMeta],
    outcomes: &[DetectionOutcome],
    upper_limit: Option<f64>,
) -> Result<MetricEstimate> {
    estimate(&pair(metas, outcomes)?, MetricName::KmArl, upper_limit)
}

pub fn km_add(
    metas: &[SequenceMeta],
    outcomes: &[DetectionOutcome],
    upper_limit: Option<f64>,
) -> Result<MetricEstimate> {
    estimate(&pair(metas, outcomes)?, MetricName::KmAdd, upper_limit)
}

pub fn lb_arl(metas: &[SequenceMeta], outcomes: &[DetectionOutcome]) -> Result<MetricEstimate> {
    estimate(&pair(metas, outcomes)?, MetricName::LbArl, None)
}

pub fn lb_add(metas: &[SequenceMeta], outcomes: &[DetectionOutcome]) -> Result<MetricEstimate> {
    estimate(&pair(metas, outcomes)?, MetricName::LbAdd, None)
}

pub fn naive_arl(metas: &[SequenceMeta], outcomes: &[DetectionOutcome]) -> Result<MetricEstimate> {
    estimate(&pair(metas, outcomes)?, MetricName::NaiveArl, None)
}

/// Evaluates one metric over already-paired observations.
///
/// `upper_limit` only applies to the KM metrics; by default it is the largest
/// observed time of the corresponding samples.
pub fn estimate(observations: &[Observation], name: MetricName, upper_limit: Option<f64>) -> Result<MetricEstimate> {
    match name {
        MetricName::KmArl => {
            let samples: Vec<_> = observations.iter().map(Observation::arl_sample).collect();
            kaplan_meier_estimate(name, &samples, upper_limit)
        }
        MetricName::KmAdd => {
            let samples: Vec<_> = observations.iter().filter_map(Observation::add_sample).collect();
            kaplan_meier_estimate(name, &samples, upper_limit)
        }
        MetricName::LbArl => Ok(mean_estimate(
            name,
            observations.iter().filter(|o| o.in_lb_arl()).filter_map(|o| o.tau),
        )),
        MetricName::LbAdd => Ok(mean_estimate(
            name,
            observations.iter().filter_map(Observation::lb_delay),
        )),
        MetricName::NaiveArl => Ok(mean_estimate(
            name,
            observations.iter().filter(|o| o.in_naive_arl()).filter_map(|o| o.tau),
        )),
    }
}

/// Evaluates several metrics over the same observations.
pub fn estimate_all(observations: &[Observation], names: &[MetricName]) -> Result<Vec<MetricEstimate>> {
    names.iter().map(|&n| estimate(observations, n, None)).collect()
}

fn kaplan_meier_estimate(
    name: MetricName,
    samples: &[SurvivalSample],
    upper_limit: Option<f64>,
) -> Result<MetricEstimate> {
    if samples.is_empty() {
        return Ok(MetricEstimate::undefined(name));
    }
    let curve = fit_km(samples)?;
    let a = match upper_limit {
        Some(a) => a,
        None => max_last_observed(samples)?,
    };
    let rm = rmst(&curve, a)?;
    let tail = curve.survival_at(a);
    // The whole restricted window carries survival mass: no event was seen
    // before the horizon and the estimate is the horizon itself.
    let saturated = (rm.value - a).abs() <= f64::EPSILON * a.max(1.0) && tail > 0.0;
    Ok(MetricEstimate {
        name,
        value: Some(rm.value),
        sem: Some((rm.variance / samples.len() as f64).sqrt()),
        n_used: samples.len(),
        upper_limit: Some(a),
        extrapolation_flag: rm.extrapolated || saturated,
        tail_survival: Some(tail),
    })
}

/// Plain average with SEM from the empirical (1/n) variance.
fn mean_estimate(name: MetricName, values: impl Iterator<Item = usize>) -> MetricEstimate {
    let values: Vec<f64> = values.map(|v| v as f64).collect();
    if values.is_empty() {
        return MetricEstimate::undefined(name);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    MetricEstimate {
        name,
        value: Some(mean),
        sem: Some((var / n).sqrt()),
        n_used: values.len(),
        upper_limit: None,
        extrapolation_flag: false,
        tail_survival: None,
    }
}
