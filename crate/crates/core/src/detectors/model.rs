// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Known pre- and post-change frame distributions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LikelihoodModel {
    /// Mean shift `μ0 → μ1` with a shared variance.
    #[serde(alias = "gaussian")]
    GaussianMeanShift { mu0: f64, mu1: f64, variance: f64 },
    /// Rate shift `λ0 → λ1` of a Poisson count.
    #[serde(alias = "poisson")]
    PoissonRateShift { rate0: f64, rate1: f64 },
}

impl LikelihoodModel {
    pub fn gaussian(mu0: f64, mu1: f64, variance: f64) -> Result<Self> {
        let m = LikelihoodModel::GaussianMeanShift { mu0, mu1, variance };
        m.validate()?;
        Ok(m)
    }

    pub fn poisson(rate0: f64, rate1: f64) -> Result<Self> {
        let m = LikelihoodModel::PoissonRateShift { rate0, rate1 };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LikelihoodModel::GaussianMeanShift { mu0, mu1, variance } => {
                if !(mu0.is_finite() && mu1.is_finite()) {
                    return Err(Error::invalid("gaussian means must be finite"));
                }
                if !(variance > 0.0 && variance.is_finite()) {
                    return Err(Error::invalid(format!("gaussian variance must be > 0, got {variance}")));
                }
            }
            LikelihoodModel::PoissonRateShift { rate0, rate1 } => {
                if !(rate0 > 0.0 && rate1 > 0.0 && rate0.is_finite() && rate1.is_finite()) {
                    return Err(Error::invalid("poisson rates must be finite and > 0"));
                }
                if rate0 == rate1 {
                    return Err(Error::invalid("poisson pre- and post-change rates must differ"));
                }
            }
        }
        Ok(())
    }

    /// Log-likelihood ratio `ln f(x)/g(x)` of a single frame.
    #[inline]
    pub fn llr(&self, x: f64) -> Result<f64> {
        match *self {
            LikelihoodModel::GaussianMeanShift { mu0, mu1, variance } => {
                Ok((mu1 - mu0) / variance * x - (mu1 * mu1 - mu0 * mu0) / (2.0 * variance))
            }
            LikelihoodModel::PoissonRateShift { rate0, rate1 } => {
                if !(x >= 0.0 && x.fract() == 0.0 && x.is_finite()) {
                    return Err(Error::Detector(format!(
                        "poisson frames must be non-negative integers, got {x}"
                    )));
                }
                Ok(x * (rate1 / rate0).ln() - (rate1 - rate0))
            }
        }
    }

    pub fn sample_pre<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample(rng, false)
    }

    pub fn sample_post<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample(rng, true)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, post: bool) -> f64 {
        match *self {
            LikelihoodModel::GaussianMeanShift { mu0, mu1, variance } => {
                let mean = if post { mu1 } else { mu0 };
                Normal::new(mean, variance.sqrt())
                    .expect("validated variance")
                    .sample(rng)
            }
            LikelihoodModel::PoissonRateShift { rate0, rate1 } => {
                let rate = if post { rate1 } else { rate0 };
                Poisson::new(rate).expect("validated rate").sample(rng)
            }
        }
    }

    pub fn pre_mean(&self) -> f64 {
        match *self {
            LikelihoodModel::GaussianMeanShift { mu0, .. } => mu0,
            LikelihoodModel::PoissonRateShift { rate0, .. } => rate0,
        }
    }

    pub fn pre_variance(&self) -> f64 {
        match *self {
            LikelihoodModel::GaussianMeanShift { variance, .. } => variance,
            LikelihoodModel::PoissonRateShift { rate0, .. } => rate0,
        }
    }
}

impl fmt::Display for LikelihoodModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LikelihoodModel::GaussianMeanShift { mu0, mu1, variance } => {
                write!(f, "gaussian:{mu0},{mu1},{variance}")
            }
            LikelihoodModel::PoissonRateShift { rate0, rate1 } => write!(f, "poisson:{rate0},{rate1}"),
        }
    }
}

/// Parses `gaussian:μ0,μ1,σ²` or `poisson:λ0,λ1`.
impl FromStr for LikelihoodModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, params) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("model '{s}' must look like kind:p1,p2,...")))?;
        let params = params
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad model parameter '{p}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        match (kind.trim().to_ascii_lowercase().as_str(), params.as_slice()) {
            ("gaussian", &[mu0, mu1, var]) => LikelihoodModel::gaussian(mu0, mu1, var),
            ("poisson", &[r0, r1]) => LikelihoodModel::poisson(r0, r1),
            _ => Err(Error::invalid(format!(
                "unknown model '{s}' (expected gaussian:mu0,mu1,var or poisson:rate0,rate1)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_llr_closed_form() {
        let m = LikelihoodModel::gaussian(0.0, 0.1, 0.1).unwrap();
        assert!(m.llr(0.05).unwrap().abs() < 1e-15);
        assert!((m.llr(1.0).unwrap() - 0.95).abs() < 1e-12);
    }

    #[test]
    fn poisson_llr_closed_form() {
        let m = LikelihoodModel::poisson(1.0, 4.0).unwrap();
        assert_eq!(m.llr(0.0).unwrap(), -3.0);
        assert!((m.llr(2.0).unwrap() - (2.0 * 4f64.ln() - 3.0)).abs() < 1e-12);
        assert!(m.llr(1.5).is_err());
        assert!(m.llr(-1.0).is_err());
    }

    #[test]
    fn validation() {
        assert!(LikelihoodModel::gaussian(0.0, 1.0, 0.0).is_err());
        assert!(LikelihoodModel::poisson(1.0, 1.0).is_err());
        assert!(LikelihoodModel::poisson(0.0, 1.0).is_err());
        // Equal means are a legal (if useless) model: the ratio is identically one.
        assert!(LikelihoodModel::gaussian(0.0, 0.0, 1.0).is_ok());
    }

    #[test]
    fn parse_and_display() {
        let m: LikelihoodModel = "gaussian:0,0.1,0.1".parse().unwrap();
        assert_eq!(m, LikelihoodModel::gaussian(0.0, 0.1, 0.1).unwrap());
        assert_eq!(m.to_string().parse::<LikelihoodModel>().unwrap(), m);
        let p: LikelihoodModel = "poisson:1,4".parse().unwrap();
        assert_eq!(p, LikelihoodModel::poisson(1.0, 4.0).unwrap());
        assert!("gaussian:0,1".parse::<LikelihoodModel>().is_err());
        assert!("cauchy:0,1".parse::<LikelihoodModel>().is_err());
    }

    #[test]
    fn serde_shape() {
        let m = LikelihoodModel::gaussian(0.0, 0.1, 0.1).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(
            json,
            r#"{"kind":"gaussian_mean_shift","mu0":0.0,"mu1":0.1,"variance":0.1}"#
        );
        let short: LikelihoodModel = serde_json::from_str(r#"{"kind":"poisson","rate0":1,"rate1":4}"#).unwrap();
        assert_eq!(short, LikelihoodModel::poisson(1.0, 4.0).unwrap());
    }
}
