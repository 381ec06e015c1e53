// SPDX-License-Identifier: MIT OR Apache-2.0

//! Product-limit (Kaplan-Meier) survival estimation and restricted means.
//!
//! This is the engine shared by KM-ARL and KM-ADD: detection points (or
//! detection delays) are event times, and the end of the observed window is a
//! right-censoring time.
//!
//! Tie convention: when an event and a censoring share the same time, the
//! censored sample is still counted in the risk set of that event time, i.e.
//! the event is treated as if it happened first.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

/// One right-censored observation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SurvivalSample {
    pub time: f64,
    /// `true` if the event was observed at `time`, `false` if censored there.
    pub event: bool,
}

impl SurvivalSample {
    pub fn event(time: f64) -> Self {
        Self { time, event: true }
    }

    pub fn censored(time: f64) -> Self {
        Self { time, event: false }
    }

    fn validate(&self) -> Result<()> {
        if !self.time.is_finite() || self.time < 0.0 {
            return Err(Error::InvalidSample(format!(
                "time must be finite and non-negative, got {}",
                self.time
            )));
        }
        Ok(())
    }
}

/// Right-continuous step estimate of the survival function.
///
/// `survival_values[j]` is the value of the curve on `[drop_times[j], drop_times[j + 1])`;
/// before the first drop the curve equals one. Past the last drop the curve
/// is held at its final value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepSurvivalCurve {
    pub drop_times: Vec<f64>,
    pub survival_values: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub deaths: Vec<usize>,
    pub n_samples: usize,
    pub max_observed: f64,
}

impl StepSurvivalCurve {
    /// Value of the estimate at `t`.
    pub fn survival_at(&self, t: f64) -> f64 {
        let idx = self.drop_times.partition_point(|&d| d <= t);
        if idx == 0 {
            1.0
        } else {
            self.survival_values[idx - 1]
        }
    }

    /// Number of distinct event times.
    pub fn n_drops(&self) -> usize {
        self.drop_times.len()
    }

    /// Writes `t,S,n_at_risk,d` rows, starting with `(0, 1, n, 0)`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,S,n_at_risk,d")?;
        writeln!(out, "0,1,{},0", self.n_samples)?;
        for j in 0..self.drop_times.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.drop_times[j], self.survival_values[j], self.at_risk[j], self.deaths[j]
            )?;
        }
        Ok(())
    }
}

/// Area under a survival curve up to a horizon, with its restricted variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RestrictedMean {
    pub value: f64,
    /// Estimated variance of `min(event time, upper_limit)`.
    pub variance: f64,
    pub upper_limit: f64,
    pub n_samples: usize,
    /// The horizon lies beyond the largest observed time.
    pub extrapolated: bool,
    /// The variance formula came out slightly negative and was clamped to zero.
    pub variance_clamped: bool,
}

/// Fits the product-limit estimator.
pub fn fit_km(samples: &[SurvivalSample]) -> Result<StepSurvivalCurve> {
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    for s in samples {
        s.validate()?;
    }

    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.time.total_cmp(&b.time));

    let n = sorted.len();
    let mut drop_times = Vec::new();
    let mut survival_values = Vec::new();
    let mut at_risk = Vec::new();
    let mut deaths = Vec::new();

    let mut surv = 1.0;
    let mut i = 0;
    while i < n {
        let t = sorted[i].time;
        // Everything from index i onwards has time >= t.
        let risk = n - i;
        let mut d = 0;
        let mut j = i;
        while j < n && sorted[j].time == t {
            if sorted[j].event {
                d += 1;
            }
            j += 1;
        }
        if d > 0 {
            surv *= 1.0 - d as f64 / risk as f64;
            drop_times.push(t);
            survival_values.push(surv);
            at_risk.push(risk);
            deaths.push(d);
        }
        i = j;
    }

    Ok(StepSurvivalCurve {
        drop_times,
        survival_values,
        at_risk,
        deaths,
        n_samples: n,
        max_observed: sorted[n - 1].time,
    })
}

/// Restricted mean `∫_0^upper_limit S(t) dt` by exact rectangle summation,
/// together with the restricted variance `2∫ t S(t) dt − mean²`.
pub fn rmst(curve: &StepSurvivalCurve, upper_limit: f64) -> Result<RestrictedMean> {
    if !upper_limit.is_finite() || upper_limit < 0.0 {
        return Err(Error::invalid(format!(
            "upper limit must be finite and non-negative, got {upper_limit}"
        )));
    }

    let mut area = 0.0;
    let mut first_moment = 0.0;
    let mut left = 0.0;
    let mut level = 1.0;
    for (&t, &s) in curve.drop_times.iter().zip(&curve.survival_values) {
        if t >= upper_limit {
            break;
        }
        area += level * (t - left);
        first_moment += level * (t * t - left * left) / 2.0;
        left = t;
        level = s;
    }
    area += level * (upper_limit - left);
    first_moment += level * (upper_limit * upper_limit - left * left) / 2.0;

    let raw_variance = 2.0 * first_moment - area * area;
    let variance_clamped = raw_variance < 0.0;

    Ok(RestrictedMean {
        value: area,
        variance: raw_variance.max(0.0),
        upper_limit,
        n_samples: curve.n_samples,
        extrapolated: upper_limit > curve.max_observed,
        variance_clamped,
    })
}

/// Largest observed (event or censoring) time.
pub fn max_last_observed(samples: &[SurvivalSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    for s in samples {
        s.validate()?;
    }
    Ok(samples.iter().map(|s| s.time).fold(0.0, f64::max))
}
