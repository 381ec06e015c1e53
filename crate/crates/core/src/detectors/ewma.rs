// SPDX-License-Identifier: MIT OR Apache-2.0

use super::{univariate, OnlineDetector};
use crate::error::Result;

/// EWMA control chart with time-varying control limits.
///
/// The first `burn_in` frames estimate the in-control mean and standard
/// deviation and never alarm. From then on the smoothed deviation
/// `D(k) = λ (x − μ̂0) + (1 − λ) D(k−1)` is compared against
/// `threshold · σ̂0 · sqrt(λ / (2 − λ) · (1 − (1 − λ)^{2k}))`, the exact
/// standard deviation of the statistic after `k` updates.
#[derive(Clone, Debug)]
pub struct Ewma {
    lambda: f64,
    burn_in: usize,
    threshold: f64,
    burn: Vec<f64>,
    mean: f64,
    sd: f64,
    deviation: f64,
    /// `(1 − λ)^{2k}` after `k` updates.
    decay: f64,
}

impl Ewma {
    pub fn new(lambda: f64, burn_in: usize, threshold: f64) -> Self {
        Self {
            lambda,
            burn_in,
            threshold,
            burn: Vec::with_capacity(burn_in),
            mean: 0.0,
            sd: 0.0,
            deviation: 0.0,
            decay: 1.0,
        }
    }

    /// In-control mean and standard deviation estimated from the burn-in, once available.
    pub fn baseline(&self) -> Option<(f64, f64)> {
        (self.burn.len() == self.burn_in).then_some((self.mean, self.sd))
    }

    fn finish_burn_in(&mut self) {
        let n = self.burn.len() as f64;
        let first = self.burn[0];
        if self.burn.iter().all(|&x| x == first) {
            self.mean = first;
            self.sd = 0.0;
        } else {
            self.mean = self.burn.iter().sum::<f64>() / n;
            let ss: f64 = self.burn.iter().map(|x| (x - self.mean).powi(2)).sum();
            self.sd = (ss / (n - 1.0)).sqrt();
        }
    }
}

impl OnlineDetector for Ewma {
    fn update(&mut self, frame: &[f64]) -> Result<bool> {
        let x = univariate(frame, "EWMA")?;
        if self.burn.len() < self.burn_in {
            self.burn.push(x);
            if self.burn.len() == self.burn_in {
                self.finish_burn_in();
            }
            return Ok(false);
        }
        let lambda = self.lambda;
        self.deviation = lambda * (x - self.mean) + (1.0 - lambda) * self.deviation;
        self.decay *= (1.0 - lambda) * (1.0 - lambda);
        // A flat burn-in gives zero scale; any later deviation then alarms.
        let sd = if self.sd > 0.0 { self.sd } else { f64::EPSILON };
        let width = sd * (lambda / (2.0 - lambda) * (1.0 - self.decay)).sqrt();
        Ok(self.deviation.abs() >= self.threshold * width)
    }

    fn reset(&mut self) {
        self.burn.clear();
        self.mean = 0.0;
        self.sd = 0.0;
        self.deviation = 0.0;
        self.decay = 1.0;
    }
}
