// SPDX-License-Identifier: MIT OR Apache-2.0

use super::{univariate, LikelihoodModel, OnlineDetector};
use crate::error::Result;

/// One step of the Shiryaev-Roberts recursion `R(t) = (R(t-1) + 1) · L(t)`.
#[inline]
pub fn gsr_step(prev: f64, likelihood_ratio: f64) -> f64 {
    (prev + 1.0) * likelihood_ratio
}

/// Generalized Shiryaev-Roberts procedure with head start `omega`.
///
/// The statistic is kept on the linear scale. Before the alarm it is below a
/// finite threshold, so the only overflow is `(R + 1) · L = +inf`, which
/// exceeds any finite threshold and is reported as an alarm at that frame.
#[derive(Clone, Debug)]
pub struct Gsr {
    model: LikelihoodModel,
    omega: f64,
    threshold: f64,
    stat: f64,
}

impl Gsr {
    pub fn new(model: LikelihoodModel, omega: f64, threshold: f64) -> Self {
        Self {
            model,
            omega,
            threshold,
            stat: omega,
        }
    }

    pub fn statistic(&self) -> f64 {
        self.stat
    }
}

impl OnlineDetector for Gsr {
    #[inline]
    fn update(&mut self, frame: &[f64]) -> Result<bool> {
        let x = univariate(frame, "GSR")?;
        let lr = self.model.llr(x)?.exp();
        self.stat = gsr_step(self.stat, lr);
        if self.threshold == f64::INFINITY {
            // Keep the statistic meaningful instead of letting inf * 0 turn into NaN.
            self.stat = self.stat.min(f64::MAX);
            return Ok(false);
        }
        Ok(self.stat >= self.threshold)
    }

    fn reset(&mut self) {
        self.stat = self.omega;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::{first_alarm, DetectorConfig};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn frames(v: &[f64]) -> impl Iterator<Item = &[f64]> {
        v.chunks(1)
    }

    /// `ω ∏_{s≤t} L(s) + Σ_k ∏_{s=k}^{t} L(s)`, expanded term by term.
    fn direct(omega: f64, ls: &[f64], t: usize) -> f64 {
        let prod = |from: usize| (from..=t).map(|s| ls[s]).product::<f64>();
        omega * prod(0) + (0..=t).map(prod).sum::<f64>()
    }

    #[test]
    fn unit_likelihood_ratio_counts_frames() {
        let flat = LikelihoodModel::gaussian(0.0, 0.0, 1.0).unwrap();
        let mut g = Gsr::new(flat, 0.0, 10.0);
        let xs = vec![0.3; 20];
        assert_eq!(first_alarm(&mut g, frames(&xs)).unwrap(), Some(9));
        assert_eq!(g.statistic(), 10.0);
    }

    #[test]
    fn head_start_alarms_immediately() {
        let flat = LikelihoodModel::gaussian(0.0, 0.0, 1.0).unwrap();
        let mut g = Gsr::new(flat, 10.0, 10.0);
        assert_eq!(first_alarm(&mut g, frames(&[1.0, 1.0])).unwrap(), Some(0));
        assert_eq!(g.statistic(), 11.0);
    }

    #[test]
    fn unreachable_threshold_never_alarms() {
        let m = LikelihoodModel::gaussian(0.0, 0.1, 0.1).unwrap();
        let xs: Vec<f64> = (0..50).map(|i| (i % 7) as f64 * 0.1).collect();
        let mut g = Gsr::new(m, 0.0, 1e308);
        assert_eq!(first_alarm(&mut g, frames(&xs)).unwrap(), None);
        let mut g = Gsr::new(m, 0.0, f64::INFINITY);
        let big = vec![1e3; 10];
        assert_eq!(first_alarm(&mut g, frames(&big)).unwrap(), None);
        assert!(!g.statistic().is_nan());
    }

    #[test]
    fn overflow_counts_as_alarm() {
        let m = LikelihoodModel::gaussian(0.0, 1.0, 1.0).unwrap();
        let mut g = Gsr::new(m, 0.0, f64::MAX);
        assert_eq!(first_alarm(&mut g, frames(&[1e4])).unwrap(), Some(0));
    }

    #[test]
    fn rejects_multivariate_frames() {
        let m = LikelihoodModel::gaussian(0.0, 1.0, 1.0).unwrap();
        let mut g = Gsr::new(m, 0.0, 5.0);
        assert!(g.update(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn recursion_matches_double_sum_on_random_ratios() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let len = rng.random_range(1..=5);
            let omega = if rng.random_bool(0.5) {
                0.0
            } else {
                rng.random_range(0.0..20.0)
            };
            let ls: Vec<f64> = (0..len).map(|_| rng.random_range(0.01..5.0)).collect();
            let mut r = omega;
            for t in 0..len {
                r = gsr_step(r, ls[t]);
                let d = direct(omega, &ls, t);
                assert!((r - d).abs() <= 1e-10 * d.abs());
            }
        }
    }

    proptest! {
        #[test]
        fn detector_statistic_matches_double_sum(xs in prop::collection::vec(-2.0f64..2.0, 1..6), omega in 0.0f64..5.0) {
            let m = LikelihoodModel::gaussian(0.0, 0.5, 0.7).unwrap();
            let ls: Vec<f64> = xs.iter().map(|&x| m.llr(x).unwrap().exp()).collect();
            let mut g = Gsr::new(m, omega, f64::MAX);
            for (t, x) in xs.iter().enumerate() {
                g.update(&[*x]).unwrap();
                let d = direct(omega, &ls, t);
                prop_assert!((g.statistic() - d).abs() <= 1e-10 * d.abs());
            }
        }

        #[test]
        fn gsr_config_path_agrees(xs in prop::collection::vec(-1.0f64..1.5, 1..80), thr in 1.0f64..50.0) {
            let m = LikelihoodModel::gaussian(0.0, 0.5, 0.5).unwrap();
            let cfg = DetectorConfig::gsr(m, thr);
            let mut boxed = cfg.build().unwrap();
            let mut direct_det = Gsr::new(m, 0.0, thr);
            prop_assert_eq!(
                first_alarm(boxed.as_mut(), frames(&xs)).unwrap(),
                first_alarm(&mut direct_det, frames(&xs)).unwrap()
            );
        }
    }
}
