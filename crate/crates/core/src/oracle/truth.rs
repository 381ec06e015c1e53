// SPDX-License-Identifier: MIT OR Apache-2.0

//! Monte-Carlo ground truth for the ARL and ADD on effectively infinite streams.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::detectors::{DetectorConfig, LikelihoodModel, OnlineDetector};
use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::simulate::{ChangepointLaw, LengthLaw};

/// Replications allowed to reach the horizon cap, as a fraction.
pub const MAX_CAP_FRACTION: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub value: f64,
    pub sem: f64,
    pub n_reps: usize,
    pub cap_hits: usize,
    /// Probability mass of replications kept (`P(τ ≥ ν)` for the ADD; 1 for the ARL).
    pub retention: f64,
}

impl MonteCarloEstimate {
    pub fn relative_sem(&self) -> f64 {
        if self.value == 0.0 {
            self.sem
        } else {
            self.sem / self.value.abs()
        }
    }
}

/// Changepoint distribution for the ADD oracle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum OracleChangepoint {
    Fixed(usize),
    /// Failures before the first success, support `{0, 1, ...}`.
    Geometric(f64),
    /// Uniform on `{0, ..., T − 1}` with `T` drawn from the length law.
    UniformOverLength(LengthLaw),
    /// Geometric conditioned on `ν < T`, `T` drawn from the length law: the
    /// changepoints that a finite dataset can actually contain.
    GeometricBeforeEnd(f64, LengthLaw),
}

impl OracleChangepoint {
    /// Oracle counterpart of a dataset's changepoint law.
    pub fn from_law(law: ChangepointLaw, lengths: LengthLaw) -> Result<Self> {
        match law {
            ChangepointLaw::Geometric(p) => Ok(OracleChangepoint::Geometric(p)),
            ChangepointLaw::UniformOverLength => Ok(OracleChangepoint::UniformOverLength(lengths)),
            ChangepointLaw::None => Err(Error::invalid("no changepoint law: the ADD is undefined")),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            OracleChangepoint::Geometric(p) if !(p > 0.0 && p <= 1.0) => Err(Error::invalid(format!(
                "geometric probability must lie in (0, 1], got {p}"
            ))),
            OracleChangepoint::UniformOverLength(l) => l.validate(),
            OracleChangepoint::GeometricBeforeEnd(p, l) => {
                OracleChangepoint::Geometric(p).validate()?;
                l.validate()
            }
            _ => Ok(()),
        }
    }

    /// Largest possible changepoint, if bounded.
    fn support_max(&self) -> Option<usize> {
        match *self {
            OracleChangepoint::Fixed(k) => Some(k),
            OracleChangepoint::Geometric(p) if p >= 1.0 => Some(0),
            OracleChangepoint::Geometric(_) => None,
            OracleChangepoint::UniformOverLength(l) | OracleChangepoint::GeometricBeforeEnd(_, l) => {
                Some(l.max_length() - 1)
            }
        }
    }

    /// `P(ν ≤ k)`.
    fn cdf(&self, k: usize) -> f64 {
        match *self {
            OracleChangepoint::Fixed(v) => (v <= k) as u8 as f64,
            OracleChangepoint::Geometric(p) => 1.0 - (1.0 - p).powf(k as f64 + 1.0),
            OracleChangepoint::UniformOverLength(law) => {
                let (lo, hi) = length_range(law);
                let total: f64 = (lo..=hi).map(|t| ((k + 1).min(t)) as f64 / t as f64).sum();
                total / (hi - lo + 1) as f64
            }
            OracleChangepoint::GeometricBeforeEnd(p, law) => {
                let (lo, hi) = length_range(law);
                let geo = OracleChangepoint::Geometric(p);
                let part: f64 = (lo..=hi).map(|t| geo.cdf(k.min(t - 1))).sum();
                let whole: f64 = (lo..=hi).map(|t| geo.cdf(t - 1)).sum();
                part / whole
            }
        }
    }

    /// Draws `ν` conditioned on `ν ≤ upper` (requires `cdf(upper) > 0`).
    fn sample_at_most<R: Rng + ?Sized>(&self, rng: &mut R, upper: usize) -> usize {
        match *self {
            OracleChangepoint::Fixed(v) => v,
            OracleChangepoint::Geometric(p) => {
                if p >= 1.0 {
                    return 0;
                }
                // Inverse CDF restricted to [0, cdf(upper)).
                let u: f64 = rng.random::<f64>() * self.cdf(upper);
                let k = ((1.0 - u).ln() / (1.0 - p).ln()).floor();
                (k.max(0.0) as usize).min(upper)
            }
            OracleChangepoint::UniformOverLength(law) => loop {
                let t = law.sample(rng);
                let nu = rng.random_range(0..t);
                if nu <= upper {
                    break nu;
                }
            },
            OracleChangepoint::GeometricBeforeEnd(p, law) => {
                // Joint law of (T, ν) restricted to ν ≤ min(upper, T − 1).
                let (lo, hi) = length_range(law);
                let geo = OracleChangepoint::Geometric(p);
                let weights: Vec<f64> = (lo..=hi).map(|t| geo.cdf(upper.min(t - 1))).collect();
                let mut u = rng.random::<f64>() * weights.iter().sum::<f64>();
                let mut t = hi;
                for (i, w) in weights.iter().enumerate() {
                    if u < *w {
                        t = lo + i;
                        break;
                    }
                    u -= w;
                }
                geo.sample_at_most(rng, upper.min(t - 1))
            }
        }
    }
}

fn length_range(law: LengthLaw) -> (usize, usize) {
    match law {
        LengthLaw::Fixed(t) => (t, t),
        LengthLaw::UniformRange(lo, hi) => (lo, hi),
    }
}

type Sampler<'a> = dyn Fn(&mut ChaCha8Rng) -> f64 + Sync + 'a;
type Factory<'a> = dyn Fn() -> Result<Box<dyn OnlineDetector>> + Sync + 'a;

/// Mean first-alarm time on pre-change streams drawn by `sample`.
///
/// Each replication runs until the alarm or until `horizon_cap` frames; if
/// `MAX_CAP_FRACTION` or more of the replications reach the cap the estimate
/// would be truncated, and an error is returned instead.
pub fn run_length_mc(
    sample: &Sampler<'_>,
    make_detector: &Factory<'_>,
    n_reps: usize,
    horizon_cap: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if n_reps == 0 {
        return Err(Error::invalid("n_reps must be >= 1"));
    }
    let runs: Vec<Option<usize>> = (0..n_reps)
        .into_par_iter()
        .map(|rep| -> Result<Option<usize>> {
            let mut rng = rng::stream(seed, Domain::ArlOracle, rep as u64);
            let mut det = make_detector()?;
            for t in 0..horizon_cap {
                let x = sample(&mut rng);
                if det.update(&[x])? {
                    return Ok(Some(t));
                }
            }
            Ok(None)
        })
        .collect::<Result<_>>()?;

    let cap_hits = runs.iter().filter(|r| r.is_none()).count();
    check_cap(cap_hits, n_reps, horizon_cap)?;
    let values: Vec<f64> = runs.iter().map(|r| r.unwrap_or(horizon_cap) as f64).collect();
    let (value, sem) = mean_sem(&values);
    Ok(MonteCarloEstimate {
        value,
        sem,
        n_reps,
        cap_hits,
        retention: 1.0,
    })
}

/// True ARL `E[τ | ν = ∞]` of `detector` on pre-change frames of `model`.
pub fn true_arl_mc(
    model: &LikelihoodModel,
    detector: &DetectorConfig,
    n_reps: usize,
    horizon_cap: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    model.validate()?;
    detector.validate()?;
    let m = *model;
    run_length_mc(
        &move |rng| m.sample_pre(rng),
        &|| detector.build(),
        n_reps,
        horizon_cap,
        seed,
    )
}

/// True ADD `E[τ − ν | τ ≥ ν, ν < ∞]` with `ν` drawn from `changepoint`.
///
/// Replications with a false alarm before the change are discarded. Rather
/// than drawing `ν` blindly (most draws of a late geometric changepoint would
/// be discarded), each replication first runs the detector on pre-change
/// frames up to its alarm `τ0`, weights the path by `P(ν ≤ τ0)`, and draws `ν`
/// from the law restricted to `[0, τ0]`; the detector is then replayed up to
/// `ν` and continued on post-change frames. The weighted mean of the delays
/// equals the conditional expectation above.
pub fn true_add_mc(
    model: &LikelihoodModel,
    detector: &DetectorConfig,
    changepoint: OracleChangepoint,
    n_reps: usize,
    horizon_cap: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    model.validate()?;
    detector.validate()?;
    let m = *model;
    delay_mc(
        &move |rng| m.sample_pre(rng),
        &move |rng| m.sample_post(rng),
        &|| detector.build(),
        changepoint,
        n_reps,
        horizon_cap,
        seed,
    )
}

/// Generic form of [`true_add_mc`] over arbitrary frame samplers.
pub fn delay_mc(
    sample_pre: &Sampler<'_>,
    sample_post: &Sampler<'_>,
    make_detector: &Factory<'_>,
    changepoint: OracleChangepoint,
    n_reps: usize,
    horizon_cap: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    changepoint.validate()?;
    if n_reps == 0 {
        return Err(Error::invalid("n_reps must be >= 1"));
    }
    let pre_limit = changepoint
        .support_max()
        .map_or(horizon_cap, |m| (m + 1).min(horizon_cap));

    // (weight, delay, hit_cap)
    let runs: Vec<(f64, f64, bool)> = (0..n_reps)
        .into_par_iter()
        .map(|rep| -> Result<(f64, f64, bool)> {
            let mut rng = rng::stream(seed, Domain::AddOracle, rep as u64);
            let mut det = make_detector()?;
            let mut pre = Vec::new();
            let mut alarm = None;
            for t in 0..pre_limit {
                let x = sample_pre(&mut rng);
                pre.push(x);
                if det.update(&[x])? {
                    alarm = Some(t);
                    break;
                }
            }
            let (upper, pre_capped) = match alarm {
                Some(t) => (t, false),
                None if pre_limit < horizon_cap => (pre_limit - 1, false),
                None => (pre_limit - 1, true),
            };
            let weight = changepoint.cdf(upper);
            if weight <= 0.0 {
                return Ok((0.0, 0.0, pre_capped));
            }
            let nu = changepoint.sample_at_most(&mut rng, upper);
            det.reset();
            for x in &pre[..nu] {
                // Replaying frames before the first alarm cannot alarm.
                let fired = det.update(&[*x])?;
                debug_assert!(!fired);
            }
            for d in 0..horizon_cap {
                let x = sample_post(&mut rng);
                if det.update(&[x])? {
                    return Ok((weight, d as f64, pre_capped));
                }
            }
            Ok((weight, horizon_cap as f64, true))
        })
        .collect::<Result<_>>()?;

    let cap_hits = runs.iter().filter(|r| r.2).count();
    check_cap(cap_hits, n_reps, horizon_cap)?;
    let total: f64 = runs.iter().map(|r| r.0).sum();
    if total <= 0.0 {
        return Err(Error::invalid(
            "no replication reached the changepoint before a false alarm",
        ));
    }
    let value = runs.iter().map(|r| r.0 * r.1).sum::<f64>() / total;
    let sem = runs.iter().map(|r| (r.0 * (r.1 - value)).powi(2)).sum::<f64>().sqrt() / total;
    Ok(MonteCarloEstimate {
        value,
        sem,
        n_reps,
        cap_hits,
        retention: total / n_reps as f64,
    })
}

fn check_cap(hits: usize, reps: usize, cap: usize) -> Result<()> {
    if hits as f64 >= MAX_CAP_FRACTION * reps as f64 && hits > 0 {
        return Err(Error::HorizonCap { hits, reps, cap });
    }
    Ok(())
}

/// Mean and standard error (sample standard deviation over `sqrt(n)`).
pub(crate) fn mean_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
