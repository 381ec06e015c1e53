// SPDX-License-Identifier: MIT OR Apache-2.0

//! Finite-sample bias bounds of the Kaplan-Meier restricted mean under a
//! parametric independent-censoring model, with a Monte-Carlo cross-check.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::integrate_converged;
use crate::rng::{self, Domain};
use crate::survival::{fit_km, rmst, SurvivalSample};

/// Distribution of a non-negative time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TimeLaw {
    Exponential {
        rate: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Point masses `(time, probability)`.
    Empirical {
        atoms: Vec<(f64, f64)>,
    },
    /// All mass at `+∞`; as a censoring law this means no censoring.
    Never,
}

impl TimeLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            TimeLaw::Exponential { rate } if *rate > 0.0 && rate.is_finite() => Ok(()),
            TimeLaw::Uniform { lo, hi } if 0.0 <= *lo && lo < hi && hi.is_finite() => Ok(()),
            TimeLaw::Empirical { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::invalid("empirical law needs at least one atom"));
                }
                if atoms.iter().any(|&(t, p)| !(t >= 0.0 && t.is_finite() && p >= 0.0)) {
                    return Err(Error::invalid(
                        "empirical atoms need finite times >= 0 and weights >= 0",
                    ));
                }
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(format!("empirical weights sum to {total}, not 1")));
                }
                Ok(())
            }
            TimeLaw::Never => Ok(()),
            other => Err(Error::invalid(format!("invalid time law {other:?}"))),
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            TimeLaw::Exponential { rate } => {
                if t <= 0.0 {
                    0.0
                } else {
                    -(-rate * t).exp_m1()
                }
            }
            TimeLaw::Uniform { lo, hi } => ((t - lo) / (hi - lo)).clamp(0.0, 1.0),
            TimeLaw::Empirical { atoms } => atoms.iter().filter(|a| a.0 <= t).map(|a| a.1).sum(),
            TimeLaw::Never => 0.0,
        }
    }

    /// Density for the continuous families.
    pub(crate) fn density(&self, t: f64) -> f64 {
        match self {
            TimeLaw::Exponential { rate } if t >= 0.0 => rate * (-rate * t).exp(),
            TimeLaw::Uniform { lo, hi } if (*lo..=*hi).contains(&t) => 1.0 / (hi - lo),
            _ => 0.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            TimeLaw::Exponential { rate } => -(1.0 - rng.random::<f64>()).ln() / rate,
            TimeLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            TimeLaw::Empirical { atoms } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(t, p) in atoms {
                    acc += p;
                    if u < acc {
                        return t;
                    }
                }
                atoms.last().expect("validated").0
            }
            TimeLaw::Never => f64::INFINITY,
        }
    }

    /// Points where the law has a kink or an atom.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            TimeLaw::Uniform { lo, hi } => vec![*lo, *hi],
            TimeLaw::Empirical { atoms } => atoms.iter().map(|a| a.0).collect(),
            _ => Vec::new(),
        }
    }

    /// `∫_0^a (1 − F(t)) dt`.
    pub fn restricted_mean(&self, a: f64) -> f64 {
        match self {
            TimeLaw::Exponential { rate } => -(-rate * a).exp_m1() / rate,
            TimeLaw::Uniform { lo, hi } => {
                let before = a.min(*lo);
                let inside = (a.min(*hi) - lo).max(0.0);
                before + inside - inside * inside / (2.0 * (hi - lo))
            }
            TimeLaw::Empirical { atoms } => atoms.iter().map(|&(t, p)| p * t.min(a)).sum(),
            TimeLaw::Never => a,
        }
    }

    /// `E[X]`; infinite for [`TimeLaw::Never`].
    pub fn mean(&self) -> f64 {
        match self {
            TimeLaw::Exponential { rate } => 1.0 / rate,
            TimeLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
            TimeLaw::Empirical { atoms } => atoms.iter().map(|&(t, p)| p * t).sum(),
            TimeLaw::Never => f64::INFINITY,
        }
    }

    fn from_parts(name: &str, params: &[&str]) -> Result<Self> {
        let nums = |ps: &[&str]| -> Result<Vec<f64>> {
            ps.iter()
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::invalid(format!("bad parameter '{p}' for {name}")))
                })
                .collect()
        };
        let law = match name.trim().to_ascii_lowercase().as_str() {
            "exp" | "exponential" => match nums(params)?.as_slice() {
                &[rate] => TimeLaw::Exponential { rate },
                _ => return Err(Error::invalid("exp takes one parameter: exp:rate")),
            },
            "unif" | "uniform" => match nums(params)?.as_slice() {
                &[lo, hi] => TimeLaw::Uniform { lo, hi },
                _ => return Err(Error::invalid("unif takes two parameters: unif:lo,hi")),
            },
            "emp" | "empirical" => {
                let atoms = params
                    .iter()
                    .map(|p| {
                        let (t, w) = p
                            .split_once('=')
                            .ok_or_else(|| Error::invalid(format!("empirical atom '{p}' must be time=weight")))?;
                        let v = nums(&[t, w])?;
                        Ok((v[0], v[1]))
                    })
                    .collect::<Result<Vec<_>>>()?;
                TimeLaw::Empirical { atoms }
            }
            "none" | "never" | "inf" => {
                if !params.is_empty() {
                    return Err(Error::invalid("'none' takes no parameters"));
                }
                TimeLaw::Never
            }
            other => return Err(Error::invalid(format!("unknown time law '{other}'"))),
        };
        law.validate()?;
        Ok(law)
    }
}

impl fmt::Display for TimeLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeLaw::Exponential { rate } => write!(f, "exp:{rate}"),
            TimeLaw::Uniform { lo, hi } => write!(f, "unif:{lo},{hi}"),
            TimeLaw::Empirical { atoms } => {
                let parts: Vec<String> = atoms.iter().map(|(t, p)| format!("{t}={p}")).collect();
                write!(f, "emp:{}", parts.join(","))
            }
            TimeLaw::Never => f.write_str("none"),
        }
    }
}

/// Parses `exp:1`, `unif:0,2`, `emp:1=0.5,2=0.5` or `none`.
impl FromStr for TimeLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some((name, rest)) => TimeLaw::from_parts(name, &rest.split(',').collect::<Vec<_>>()),
            None => TimeLaw::from_parts(s, &[]),
        }
    }
}

/// Independent event-time law `F` and censoring-time law `G`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParametricCensorModel {
    pub event: TimeLaw,
    pub censor: TimeLaw,
}

impl ParametricCensorModel {
    pub fn new(event: TimeLaw, censor: TimeLaw) -> Result<Self> {
        let m = Self { event, censor };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.event.validate()?;
        self.censor.validate()?;
        if matches!(self.event, TimeLaw::Never) {
            return Err(Error::invalid("the event-time law must have finite support"));
        }
        if let (TimeLaw::Empirical { atoms: f }, TimeLaw::Empirical { atoms: g }) = (&self.event, &self.censor) {
            if f.iter().any(|a| a.1 > 0.0 && g.iter().any(|b| b.1 > 0.0 && b.0 == a.0)) {
                return Err(Error::invalid("event and censoring laws share an atom"));
            }
        }
        Ok(())
    }

    /// CDF of the observed time `min(τ, C)`: `1 − (1 − F)(1 − G)`.
    pub fn observed_cdf(&self, t: f64) -> f64 {
        1.0 - (1.0 - self.event.cdf(t)) * (1.0 - self.censor.cdf(t))
    }

    /// Draws one observation `(min(τ, C), τ ≤ C)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SurvivalSample {
        let tau = self.event.sample(rng);
        let c = self.censor.sample(rng);
        if tau <= c {
            SurvivalSample::event(tau)
        } else {
            SurvivalSample::censored(c)
        }
    }
}

/// Parses `F,G` such as `exp:1,unif:0,2`: a token starting with a letter
/// opens a new law, any other token is a further parameter of the current one.
impl FromStr for ParametricCensorModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut laws: Vec<String> = Vec::new();
        for tok in s.split(',').map(str::trim) {
            match (tok.chars().next(), laws.last_mut()) {
                (Some(c), _) if c.is_ascii_alphabetic() => laws.push(tok.to_string()),
                (Some(_), Some(cur)) => {
                    cur.push(',');
                    cur.push_str(tok);
                }
                _ => return Err(Error::invalid(format!("cannot parse family '{s}'"))),
            }
        }
        match laws.as_slice() {
            [f, g] => ParametricCensorModel::new(f.parse()?, g.parse()?),
            _ => Err(Error::invalid(format!(
                "family '{s}' must name an event law and a censoring law, e.g. exp:1,unif:0,2"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundOptions {
    /// Gauss-Legendre nodes per piece before doubling.
    pub quad_points: usize,
    pub rel_tol: f64,
    pub mc_reps: usize,
    /// Width of the Monte-Carlo interval in standard errors.
    pub ci_sigmas: f64,
    pub seed: u64,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self {
            quad_points: 32,
            rel_tol: 1e-8,
            mc_reps: 10_000,
            ci_sigmas: 3.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub n: usize,
    pub a: f64,
    pub lower: f64,
    pub upper: f64,
    /// `∫_0^a (1 − F)`, the target of the estimator.
    pub target: f64,
    pub mc_mean: f64,
    pub mc_bias: f64,
    pub mc_ci_halfwidth: f64,
    pub mc_reps: usize,
    pub contained: bool,
}

/// Quadrature bounds `(lower, upper)` on `E[μ̂] − ∫_0^a (1 − F)` for the
/// Kaplan-Meier restricted mean from `n` observations:
/// `lower = −∫_0^a t G H^{n−1} dF` and `upper = a ∫_0^a G H^{n−1} dF`.
pub fn bias_bounds(model: &ParametricCensorModel, n: usize, a: f64, opts: &BoundOptions) -> Result<(f64, f64)> {
    model.validate()?;
    if n == 0 {
        return Err(Error::invalid("n must be >= 1"));
    }
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::invalid(format!("a must be finite and >= 0, got {a}")));
    }
    let power = (n - 1) as i32;
    let weight = |t: f64| model.censor.cdf(t) * model.observed_cdf(t).powi(power);

    let (moment, mass) = match &model.event {
        TimeLaw::Empirical { atoms } => atoms
            .iter()
            .filter(|&&(t, _)| t <= a)
            .fold((0.0, 0.0), |(m, s), &(t, p)| (m + t * p * weight(t), s + p * weight(t))),
        law => {
            let mut breaks = vec![0.0, a];
            breaks.extend(
                law.breakpoints()
                    .into_iter()
                    .chain(model.censor.breakpoints())
                    .filter(|&b| b > 0.0 && b < a),
            );
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            let moment = integrate_converged(
                |t| t * weight(t) * law.density(t),
                &breaks,
                opts.quad_points,
                opts.rel_tol,
            )?;
            let mass = integrate_converged(|t| weight(t) * law.density(t), &breaks, opts.quad_points, opts.rel_tol)?;
            (moment, mass)
        }
    };
    Ok((0.0 - moment, a * mass))
}

/// Mean of the Kaplan-Meier restricted mean at `a` over `reps` datasets of size `n`,
/// with its standard error.
pub fn mc_restricted_mean(
    model: &ParametricCensorModel,
    n: usize,
    a: f64,
    reps: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if reps < 2 {
        return Err(Error::invalid("at least two Monte-Carlo replications are needed"));
    }
    let values: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|rep| -> Result<f64> {
            let mut rng = rng::stream(seed, Domain::BiasOracle, rep as u64);
            let samples: Vec<SurvivalSample> = (0..n).map(|_| model.sample(&mut rng)).collect();
            Ok(rmst(&fit_km(&samples)?, a)?.value)
        })
        .collect::<Result<_>>()?;
    Ok(super::truth::mean_sem(&values))
}

/// Bounds plus the Monte-Carlo bias, checking containment in the
/// interval widened by `ci_sigmas` standard errors.
pub fn bias_bound_report(model: &ParametricCensorModel, n: usize, a: f64, opts: &BoundOptions) -> Result<BoundReport> {
    let (lower, upper) = bias_bounds(model, n, a, opts)?;
    let target = model.event.restricted_mean(a);
    let (mc_mean, sem) = mc_restricted_mean(model, n, a, opts.mc_reps, opts.seed)?;
    let mc_bias = mc_mean - target;
    let ci = opts.ci_sigmas * sem;
    Ok(BoundReport {
        n,
        a,
        lower,
        upper,
        target,
        mc_mean,
        mc_bias,
        mc_ci_halfwidth: ci,
        mc_reps: opts.mc_reps,
        contained: lower - ci <= mc_bias && mc_bias <= upper + ci,
    })
}

/// Bias bounds for KM-ARL: `F` is the law of `τ`, `G` the law of `min(ν, T)`.
pub fn thm1_bounds(model: &ParametricCensorModel, n: usize, a: f64, opts: &BoundOptions) -> Result<BoundReport> {
    bias_bound_report(model, n, a, opts)
}

/// Bias bounds for KM-ADD: `F` is the law of the delay `Δτ`, `G` the law of `ΔT`.
pub fn thm2_bounds(model: &ParametricCensorModel, n: usize, b: f64, opts: &BoundOptions) -> Result<BoundReport> {
    bias_bound_report(model, n, b, opts)
}
