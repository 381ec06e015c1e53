// SPDX-License-Identifier: MIT OR Apache-2.0

//! Truncation-bias ordering: the LB estimators are at least as biased
//! downward as the restricted KM estimators, which are never above the truth.

use rayon::prelude::*;
use serde::Serialize;

use super::bounds::{ParametricCensorModel, TimeLaw};
use super::truth::{true_add_mc, true_arl_mc, MonteCarloEstimate, OracleChangepoint};
use crate::detectors::{detect, DetectorConfig};
use crate::error::{Error, Result};
use crate::metrics::{estimate, MetricEstimate, MetricName, Observation};
use crate::quadrature::integrate_converged;
use crate::simulate::{simulate, SimSpec};

/// Which quantity an ordering check is about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Arl,
    Add,
}

impl Target {
    fn metrics(self) -> (MetricName, MetricName) {
        match self {
            Target::Arl => (MetricName::KmArl, MetricName::LbArl),
            Target::Add => (MetricName::KmAdd, MetricName::LbAdd),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Point estimates are ordered and no inequality is contradicted.
    Holds,
    /// No inequality is contradicted, but the point estimates are not ordered.
    Inconclusive,
    /// Some inequality fails by more than the allowed number of SEMs.
    Violated,
}

/// Population truncation biases under a parametric model, where `G` is the
/// law of the censoring time (the sequence length for the ARL).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TruncationBias {
    pub horizon: f64,
    pub mean: f64,
    /// `∫_0^a S_F − E[τ]`.
    pub km_bias: f64,
    /// `E[τ | τ ≤ C] − E[τ]`.
    pub lb_bias: f64,
}

impl TruncationBias {
    pub fn ordered(&self, tol: f64) -> bool {
        self.lb_bias <= self.km_bias + tol && self.km_bias <= tol
    }
}

/// Effective upper end of a law's support for quadrature.
fn support_end(law: &TimeLaw) -> f64 {
    match law {
        TimeLaw::Exponential { rate } => 60.0 / rate,
        TimeLaw::Uniform { hi, .. } => *hi,
        TimeLaw::Empirical { atoms } => atoms.iter().map(|a| a.0).fold(0.0, f64::max),
        TimeLaw::Never => f64::INFINITY,
    }
}

/// Exact truncation biases by quadrature; `horizon` defaults to the upper
/// end of the censoring support.
pub fn truncation_bias_parametric(model: &ParametricCensorModel, horizon: Option<f64>) -> Result<TruncationBias> {
    model.validate()?;
    let horizon = match (horizon, &model.censor) {
        (Some(a), _) => a,
        (None, TimeLaw::Exponential { .. } | TimeLaw::Never) => f64::INFINITY,
        (None, law) => support_end(law),
    };
    let mean = model.event.mean();
    let km_bias = if horizon.is_finite() {
        model.event.restricted_mean(horizon) - mean
    } else {
        0.0
    };

    // P(C ≥ t): left limit of G so that ties count as detections.
    let keep = |t: f64| match &model.censor {
        TimeLaw::Empirical { atoms } => atoms.iter().filter(|a| a.0 >= t).map(|a| a.1).sum(),
        law => 1.0 - law.cdf(t),
    };
    let (moment, mass) = match &model.event {
        TimeLaw::Empirical { atoms } => atoms
            .iter()
            .fold((0.0, 0.0), |(m, s), &(t, p)| (m + t * p * keep(t), s + p * keep(t))),
        law => {
            let end = support_end(law).min(support_end(&model.censor));
            let mut breaks = vec![0.0, end];
            for law in [&model.event, &model.censor] {
                if let TimeLaw::Uniform { lo, hi } = law {
                    breaks.extend([*lo, *hi].into_iter().filter(|&b| b > 0.0 && b < end));
                }
            }
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            let m = integrate_converged(|t| t * keep(t) * law.density(t), &breaks, 32, 1e-8)?;
            let s = integrate_converged(|t| keep(t) * law.density(t), &breaks, 32, 1e-8)?;
            (m, s)
        }
    };
    if mass <= 0.0 {
        return Err(Error::invalid(
            "no event can precede censoring: the LB mean is undefined",
        ));
    }
    Ok(TruncationBias {
        horizon,
        mean,
        km_bias,
        lb_bias: moment / mass - mean,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderingReport {
    pub target: Target,
    pub horizon: f64,
    pub truth: MonteCarloEstimate,
    pub km: MetricEstimate,
    pub lb: MetricEstimate,
    pub km_bias: f64,
    pub lb_bias: f64,
    pub verdict: Verdict,
}

/// Decides `lb − truth ≤ km − truth ≤ 0`, each side allowed `sigmas` combined SEMs.
pub fn ordering_from_estimates(
    target: Target,
    horizon: f64,
    truth: MonteCarloEstimate,
    km: MetricEstimate,
    lb: MetricEstimate,
    sigmas: f64,
) -> Result<OrderingReport> {
    let (Some(k), Some(l)) = (km.value, lb.value) else {
        return Err(Error::invalid("KM or LB estimate is undefined on this dataset"));
    };
    let (sk, sl, st) = (km.sem.unwrap_or(0.0), lb.sem.unwrap_or(0.0), truth.sem);
    let gap_lb_km = k - l;
    let gap_km_truth = truth.value - k;
    let violated =
        gap_lb_km < -sigmas * (sk * sk + sl * sl).sqrt() || gap_km_truth < -sigmas * (sk * sk + st * st).sqrt();
    let verdict = if violated {
        Verdict::Violated
    } else if gap_lb_km >= 0.0 && gap_km_truth >= 0.0 {
        Verdict::Holds
    } else {
        Verdict::Inconclusive
    };
    Ok(OrderingReport {
        target,
        horizon,
        truth,
        km_bias: k - truth.value,
        lb_bias: l - truth.value,
        km,
        lb,
        verdict,
    })
}

/// Oracle settings for the simulated ordering checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleOptions {
    pub n_reps: usize,
    pub horizon_cap: usize,
    pub seed: u64,
    pub sigmas: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            n_reps: 100_000,
            horizon_cap: 1_000_000,
            seed: 0,
            sigmas: 3.0,
        }
    }
}

/// Runs `detector` over a dataset simulated from `spec`.
pub fn simulated_observations(spec: &SimSpec, detector: &DetectorConfig) -> Result<Vec<Observation>> {
    let data = simulate(spec)?;
    data.sequences
        .par_iter()
        .map(|s| Observation::new(s.len(), s.changepoint, detect(detector, s)?.tau))
        .collect()
}

fn simulated_check(
    target: Target,
    spec: &SimSpec,
    detector: &DetectorConfig,
    truth: MonteCarloEstimate,
    sigmas: f64,
) -> Result<OrderingReport> {
    let observations = simulated_observations(spec, detector)?;
    let horizon = spec.max_length() as f64;
    let (km_name, lb_name) = target.metrics();
    let km = estimate(&observations, km_name, Some(horizon))?;
    let lb = estimate(&observations, lb_name, None)?;
    ordering_from_estimates(target, horizon, truth, km, lb, sigmas)
}

/// ARL ordering on a simulated dataset, with the horizon taken from the length law.
pub fn thm3_ordering_check(spec: &SimSpec, detector: &DetectorConfig, opts: &OracleOptions) -> Result<OrderingReport> {
    let truth = true_arl_mc(&spec.model, detector, opts.n_reps, opts.horizon_cap, opts.seed)?;
    simulated_check(Target::Arl, spec, detector, truth, opts.sigmas)
}

/// ADD ordering on a simulated dataset.
pub fn thm4_ordering_check(spec: &SimSpec, detector: &DetectorConfig, opts: &OracleOptions) -> Result<OrderingReport> {
    let law = OracleChangepoint::from_law(spec.changepoint_law, spec.length_law)?;
    let truth = true_add_mc(&spec.model, detector, law, opts.n_reps, opts.horizon_cap, opts.seed)?;
    simulated_check(Target::Add, spec, detector, truth, opts.sigmas)
}
