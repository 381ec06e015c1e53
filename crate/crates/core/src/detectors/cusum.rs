// SPDX-License-Identifier: MIT OR Apache-2.0

use super::{LikelihoodModel, OnlineDetector};
use crate::error::Result;

/// Page's CUSUM: `W(t) = max(0, W(t-1) + llr(x_t))`.
///
/// Multivariate frames are reduced to their Euclidean norm before the
/// log-likelihood ratio is applied.
#[derive(Clone, Debug)]
pub struct Cusum {
    model: LikelihoodModel,
    threshold: f64,
    stat: f64,
}

impl Cusum {
    pub fn new(model: LikelihoodModel, threshold: f64) -> Self {
        Self {
            model,
            threshold,
            stat: 0.0,
        }
    }

    pub fn statistic(&self) -> f64 {
        self.stat
    }
}

impl OnlineDetector for Cusum {
    #[inline]
    fn update(&mut self, frame: &[f64]) -> Result<bool> {
        let x = match frame {
            [x] => *x,
            _ => frame.iter().map(|v| v * v).sum::<f64>().sqrt(),
        };
        self.stat = (self.stat + self.model.llr(x)?).max(0.0);
        Ok(self.stat >= self.threshold)
    }

    fn reset(&mut self) {
        self.stat = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::first_alarm;

    // With μ0 = 0, μ1 = 1, σ² = 1 the ratio is x − 1/2.
    fn unit() -> LikelihoodModel {
        LikelihoodModel::gaussian(0.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn negative_drift_reflects_at_zero() {
        let xs = vec![-0.5; 100];
        let mut c = Cusum::new(unit(), 1e-9);
        assert_eq!(first_alarm(&mut c, xs.chunks(1)).unwrap(), None);
        assert_eq!(c.statistic(), 0.0);
    }

    #[test]
    fn positive_drift_ramps_linearly() {
        let xs = [1.0; 10];
        let mut c = Cusum::new(unit(), 2.0);
        assert_eq!(first_alarm(&mut c, xs.chunks(1)).unwrap(), Some(3));
        assert_eq!(c.statistic(), 2.0);
    }

    #[test]
    fn zero_threshold_alarms_at_first_frame() {
        let mut c = Cusum::new(unit(), 0.0);
        assert_eq!(first_alarm(&mut c, [-3.0].chunks(1)).unwrap(), Some(0));
    }

    #[test]
    fn multivariate_uses_norm() {
        let mut a = Cusum::new(unit(), 100.0);
        let mut b = Cusum::new(unit(), 100.0);
        a.update(&[3.0, 4.0]).unwrap();
        b.update(&[5.0]).unwrap();
        assert_eq!(a.statistic(), b.statistic());
    }
}
