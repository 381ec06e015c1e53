// SPDX-License-Identifier: MIT OR Apache-2.0

//! Threshold sweeps: one detector run per sequence and threshold, then the
//! requested metrics on the resulting detections.

use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{DetectionOutcome, LabeledDataset};
use crate::detectors::{detect, DetectorConfig};
use crate::error::{Error, Result};
use crate::metrics::{estimate, MetricEstimate, MetricName, Observation};
use crate::survival::{fit_km, StepSurvivalCurve};

/// Thresholds to evaluate, strictly increasing.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdGrid(Vec<f64>);

impl ThresholdGrid {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("threshold grid is empty"));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("threshold grid contains NaN"));
        }
        values.sort_by(f64::total_cmp);
        values.dedup();
        Ok(Self(values))
    }

    /// `num` points from `start` to `stop` inclusive, geometrically spaced.
    pub fn log(start: f64, stop: f64, num: usize) -> Result<Self> {
        if !(start > 0.0 && stop > 0.0) {
            return Err(Error::invalid("log-spaced grids need positive end points"));
        }
        let mut values: Vec<f64> = Self::spaced(start.ln(), stop.ln(), num)?
            .0
            .into_iter()
            .map(f64::exp)
            .collect();
        // Keep the end points exact rather than round-tripped through ln/exp.
        values[0] = start;
        if num > 1 {
            *values.last_mut().expect("non-empty") = stop;
        }
        Self::new(values)
    }

    /// `num` points from `start` to `stop` inclusive, evenly spaced.
    pub fn linear(start: f64, stop: f64, num: usize) -> Result<Self> {
        Self::spaced(start, stop, num)
    }

    fn spaced(start: f64, stop: f64, num: usize) -> Result<Self> {
        if num == 0 {
            return Err(Error::invalid("threshold grid needs at least one point"));
        }
        if !(start.is_finite() && stop.is_finite()) {
            return Err(Error::invalid("threshold grid end points must be finite"));
        }
        if num == 1 {
            return Self::new(vec![start]);
        }
        let step = (stop - start) / (num - 1) as f64;
        Self::new(
            (0..num)
                .map(|i| if i + 1 == num { stop } else { start + step * i as f64 })
                .collect(),
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Parses `start:stop:num-log`, `start:stop:num-lin` (`start:stop:num`
/// defaults to log spacing) or a comma-separated list.
impl FromStr for ThresholdGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::invalid("threshold grid is empty"));
        }
        let num = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad threshold '{x}'")))
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [start, stop, count] => {
                let (count, linear) = match count.rsplit_once('-') {
                    Some((c, "log")) => (c, false),
                    Some((c, "lin")) => (c, true),
                    Some((_, other)) => return Err(Error::invalid(format!("unknown spacing '{other}'"))),
                    None => (*count, false),
                };
                let n: usize = count
                    .trim()
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad point count '{count}'")))?;
                if linear {
                    Self::linear(num(start)?, num(stop)?, n)
                } else {
                    Self::log(num(start)?, num(stop)?, n)
                }
            }
            [_] => Self::new(s.split(',').map(num).collect::<Result<_>>()?),
            _ => Err(Error::invalid(format!("cannot parse threshold grid '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepConfig {
    pub detector: DetectorConfig,
    pub thresholds: ThresholdGrid,
    pub metrics: Vec<MetricName>,
    /// KM-ARL restriction; defaults to the largest observed time.
    pub arl_horizon: Option<f64>,
    /// KM-ADD restriction; defaults to the largest observed delay.
    pub add_horizon: Option<f64>,
}

impl SweepConfig {
    pub fn new(detector: DetectorConfig, thresholds: ThresholdGrid, metrics: Vec<MetricName>) -> Self {
        Self {
            detector,
            thresholds,
            metrics,
            arl_horizon: None,
            add_horizon: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub metrics: Vec<MetricEstimate>,
    /// Set when KM-ARL reaches its horizon with survival mass left.
    pub beyond_horizon: bool,
    #[serde(skip)]
    pub wall_time_ms: u64,
}

impl CurvePoint {
    pub fn get(&self, name: MetricName) -> Option<&MetricEstimate> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub fingerprint: String,
    pub detector: DetectorConfig,
    pub thresholds: ThresholdGrid,
    pub points: Vec<CurvePoint>,
    /// Largest ARL censoring time `min(ν, T)` in the dataset.
    pub t_max: f64,
    /// Largest `T − ν` over sequences with a change; 0 if there are none.
    pub delta_t_max: f64,
}

/// Detection outcome per sequence, in dataset order. A detector error on one
/// sequence is logged and recorded as no alarm.
pub fn run_detector(dataset: &LabeledDataset, detector: &DetectorConfig) -> Vec<DetectionOutcome> {
    dataset
        .sequences
        .par_iter()
        .map(|seq| {
            detect(detector, seq).unwrap_or_else(|e| {
                log::warn!("sequence {}: detector failed, treating as no alarm: {e}", seq.id);
                DetectionOutcome::new(seq.id.clone(), None)
            })
        })
        .collect()
}

fn observations(dataset: &LabeledDataset, outcomes: &[DetectionOutcome]) -> Result<Vec<Observation>> {
    dataset
        .sequences
        .iter()
        .zip(outcomes)
        .map(|(s, o)| Observation::new(s.len(), s.changepoint, o.tau))
        .collect()
}

/// Requested metrics for one detector setting.
pub fn evaluate(
    dataset: &LabeledDataset,
    detector: &DetectorConfig,
    metrics: &[MetricName],
    arl_horizon: Option<f64>,
    add_horizon: Option<f64>,
) -> Result<Vec<MetricEstimate>> {
    if metrics.is_empty() {
        return Err(Error::NoMetrics);
    }
    detector.validate()?;
    dataset.validate()?;
    let obs = observations(dataset, &run_detector(dataset, detector))?;
    metrics
        .iter()
        .map(|&m| {
            let limit = match m {
                MetricName::KmArl => arl_horizon,
                MetricName::KmAdd => add_horizon,
                _ => None,
            };
            estimate(&obs, m, limit)
        })
        .collect()
}

pub fn sweep(dataset: &LabeledDataset, config: &SweepConfig) -> Result<SweepResult> {
    if config.metrics.is_empty() {
        return Err(Error::NoMetrics);
    }
    if dataset.is_empty() {
        return Err(Error::NoSamples);
    }
    dataset.validate()?;
    config.detector.validate()?;

    let mut points = Vec::with_capacity(config.thresholds.len());
    for &threshold in config.thresholds.values() {
        let started = Instant::now();
        let detector = config.detector.with_threshold(threshold);
        let metrics = evaluate(
            dataset,
            &detector,
            &config.metrics,
            config.arl_horizon,
            config.add_horizon,
        )?;
        let beyond_horizon = metrics
            .iter()
            .any(|m| m.name == MetricName::KmArl && m.extrapolation_flag);
        points.push(CurvePoint {
            threshold,
            metrics,
            beyond_horizon,
            wall_time_ms: started.elapsed().as_millis() as u64,
        });
    }

    let t_max = dataset
        .sequences
        .iter()
        .map(|s| s.changepoint.map_or(s.len(), |nu| nu.min(s.len())))
        .max()
        .unwrap_or(0) as f64;
    let delta_t_max = dataset
        .sequences
        .iter()
        .filter_map(|s| s.changepoint.map(|nu| s.len() - nu))
        .max()
        .unwrap_or(0) as f64;
    Ok(SweepResult {
        fingerprint: dataset.fingerprint(),
        detector: config.detector.clone(),
        thresholds: config.thresholds.clone(),
        points,
        t_max,
        delta_t_max,
    })
}

/// Survival curve of detection times or detection delays.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Arl,
    Add,
}

impl FromStr for CurveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "arl" => Ok(CurveKind::Arl),
            "add" => Ok(CurveKind::Add),
            other => Err(Error::invalid(format!(
                "unknown curve kind '{other}' (expected arl or add)"
            ))),
        }
    }
}

pub fn survival_curve(
    dataset: &LabeledDataset,
    detector: &DetectorConfig,
    kind: CurveKind,
) -> Result<StepSurvivalCurve> {
    dataset.validate()?;
    detector.validate()?;
    let outcomes = run_detector(dataset, detector);
    let metas = dataset.metas();
    let samples = match kind {
        CurveKind::Arl => crate::metrics::arl_samples(&metas, &outcomes)?,
        CurveKind::Add => crate::metrics::add_samples(&metas, &outcomes)?,
    };
    fit_km(&samples)
}
