// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::VecDeque;

use super::OnlineDetector;
use crate::error::Result;

/// Added to segment variances so constant segments have a finite Normal cost.
const NORMAL_COST_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowCost {
    /// Sum of absolute deviations from the segment median.
    L1,
    /// `(n/2) · ln(var + ε)` of a Gaussian fit to the segment.
    Normal,
}

impl WindowCost {
    fn cost(self, segment: &mut [f64]) -> f64 {
        let n = segment.len();
        match self {
            WindowCost::L1 => {
                segment.sort_by(f64::total_cmp);
                let median = segment[(n - 1) / 2];
                segment.iter().map(|x| (x - median).abs()).sum()
            }
            WindowCost::Normal => {
                let nf = n as f64;
                let mean = segment.iter().sum::<f64>() / nf;
                let var = segment.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
                nf / 2.0 * (var + NORMAL_COST_EPS).ln()
            }
        }
    }
}

/// Two adjacent windows of `window_size` frames slide over the stream; the
/// discrepancy `cost(both) − cost(left) − cost(right)` is evaluated once both
/// halves are full and the burn-in has passed, i.e. from frame
/// `burn_in + 2·window_size − 1` on. Costs are summed over features.
#[derive(Clone, Debug)]
pub struct Window {
    cost: WindowCost,
    window: usize,
    burn_in: usize,
    threshold: f64,
    buf: VecDeque<Vec<f64>>,
    seen: usize,
    scratch: Vec<f64>,
}

impl Window {
    pub fn new(cost: WindowCost, window: usize, burn_in: usize, threshold: f64) -> Self {
        Self {
            cost,
            window,
            burn_in,
            threshold,
            buf: VecDeque::with_capacity(2 * window + 1),
            seen: 0,
            scratch: Vec::with_capacity(2 * window),
        }
    }

    /// First frame index at which the discrepancy is evaluated.
    pub fn first_evaluable(&self) -> usize {
        self.burn_in + 2 * self.window - 1
    }

    /// Discrepancy over the frames currently buffered (both halves full).
    pub fn discrepancy(&mut self) -> f64 {
        if self.buf.len() < 2 * self.window {
            return 0.0;
        }
        let dim = self.buf.front().map_or(0, Vec::len);
        let w = self.window;
        let mut total = 0.0;
        for k in 0..dim {
            self.scratch.clear();
            self.scratch.extend(self.buf.iter().map(|f| f[k]));
            let left = self.cost.cost(&mut self.scratch[..w].to_vec());
            let right = self.cost.cost(&mut self.scratch[w..].to_vec());
            let joint = self.cost.cost(&mut self.scratch);
            total += joint - left - right;
        }
        total
    }
}

impl OnlineDetector for Window {
    fn update(&mut self, frame: &[f64]) -> Result<bool> {
        if let Some(front) = self.buf.front() {
            if front.len() != frame.len() {
                return Err(crate::error::Error::Detector(format!(
                    "frame has {} features, expected {}",
                    frame.len(),
                    front.len()
                )));
            }
        }
        let t = self.seen;
        self.seen += 1;
        self.buf.push_back(frame.to_vec());
        if self.buf.len() > 2 * self.window {
            self.buf.pop_front();
        }
        if t < self.first_evaluable() {
            return Ok(false);
        }
        Ok(self.discrepancy() >= self.threshold)
    }

    fn reset(&mut self) {
        self.buf.clear();
        self.seen = 0;
    }
}
