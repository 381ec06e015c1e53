// SPDX-License-Identifier: MIT OR Apache-2.0

//! Online changepoint detectors.
//!
//! Every detector is a state machine fed one frame at a time, so the first
//! alarm on a prefix never depends on frames that come after it.

mod cusum;
mod ewma;
mod gsr;
mod model;
mod window;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use cusum::Cusum;
pub use ewma::Ewma;
pub use gsr::{gsr_step, Gsr};
pub use model::LikelihoodModel;
pub use window::{Window, WindowCost};

use crate::dataset::{DetectionOutcome, Sequence};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Gsr,
    Cusum,
    Ewma,
    WindowL1,
    WindowNormal,
    /// Uses the `tau` recorded in the dataset instead of running a detector.
    Given,
}

impl DetectorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::Gsr => "gsr",
            DetectorKind::Cusum => "cusum",
            DetectorKind::Ewma => "ewma",
            DetectorKind::WindowL1 => "window-l1",
            DetectorKind::WindowNormal => "window-normal",
            DetectorKind::Given => "given",
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(self, DetectorKind::Gsr | DetectorKind::Cusum)
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "gsr" => Ok(DetectorKind::Gsr),
            "cusum" => Ok(DetectorKind::Cusum),
            "ewma" => Ok(DetectorKind::Ewma),
            "window-l1" | "l1" => Ok(DetectorKind::WindowL1),
            "window-normal" | "normal" => Ok(DetectorKind::WindowNormal),
            "given" | "precomputed" => Ok(DetectorKind::Given),
            other => Err(Error::invalid(format!("unknown detector '{other}'"))),
        }
    }
}

fn default_ewma_lambda() -> f64 {
    0.1
}

fn default_window() -> usize {
    30
}

/// Detector settings; parses from a JSON block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    pub threshold: f64,
    #[serde(default)]
    pub model: Option<LikelihoodModel>,
    /// GSR head start.
    #[serde(default)]
    pub omega: f64,
    #[serde(default = "default_ewma_lambda")]
    pub ewma_lambda: f64,
    #[serde(default = "default_window")]
    pub window_size: usize,
    #[serde(default = "default_window")]
    pub burn_in: usize,
}

impl DetectorConfig {
    pub fn new(kind: DetectorKind, threshold: f64) -> Self {
        Self {
            kind,
            threshold,
            model: None,
            omega: 0.0,
            ewma_lambda: default_ewma_lambda(),
            window_size: default_window(),
            burn_in: default_window(),
        }
    }

    pub fn gsr(model: LikelihoodModel, threshold: f64) -> Self {
        Self::new(DetectorKind::Gsr, threshold).with_model(model)
    }

    pub fn cusum(model: LikelihoodModel, threshold: f64) -> Self {
        Self::new(DetectorKind::Cusum, threshold).with_model(model)
    }

    pub fn with_model(mut self, model: LikelihoodModel) -> Self {
        self.model = Some(model);
        self
    }

    pub fn with_threshold(&self, threshold: f64) -> Self {
        Self {
            threshold,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.threshold.is_nan() {
            return Err(Error::invalid("threshold must not be NaN"));
        }
        match (self.kind.needs_model(), &self.model) {
            (true, None) => {
                return Err(Error::invalid(format!("{} needs a likelihood model", self.kind)));
            }
            (false, Some(_)) if self.kind != DetectorKind::Given => {
                return Err(Error::invalid(format!(
                    "{} does not take a likelihood model",
                    self.kind
                )));
            }
            (_, Some(m)) => m.validate()?,
            _ => {}
        }
        match self.kind {
            DetectorKind::Gsr => {
                if !(self.omega >= 0.0 && self.omega.is_finite()) {
                    return Err(Error::invalid("omega must be finite and >= 0"));
                }
            }
            DetectorKind::Ewma => {
                if !(self.ewma_lambda > 0.0 && self.ewma_lambda <= 1.0) {
                    return Err(Error::invalid("ewma_lambda must lie in (0, 1]"));
                }
                if self.burn_in < 2 {
                    return Err(Error::invalid("ewma needs a burn-in of at least 2 frames"));
                }
            }
            DetectorKind::WindowL1 | DetectorKind::WindowNormal => {
                if self.window_size == 0 {
                    return Err(Error::invalid("window_size must be >= 1"));
                }
            }
            DetectorKind::Cusum | DetectorKind::Given => {}
        }
        Ok(())
    }

    /// Fresh online state for this configuration.
    pub fn build(&self) -> Result<Box<dyn OnlineDetector>> {
        self.validate()?;
        let model = || self.model.expect("validated");
        Ok(match self.kind {
            DetectorKind::Gsr => Box::new(Gsr::new(model(), self.omega, self.threshold)),
            DetectorKind::Cusum => Box::new(Cusum::new(model(), self.threshold)),
            DetectorKind::Ewma => Box::new(Ewma::new(self.ewma_lambda, self.burn_in, self.threshold)),
            DetectorKind::WindowL1 => Box::new(Window::new(
                WindowCost::L1,
                self.window_size,
                self.burn_in,
                self.threshold,
            )),
            DetectorKind::WindowNormal => Box::new(Window::new(
                WindowCost::Normal,
                self.window_size,
                self.burn_in,
                self.threshold,
            )),
            DetectorKind::Given => {
                return Err(Error::invalid("the 'given' detector reads recorded detections"));
            }
        })
    }
}

/// A causal detector consuming one frame per call.
pub trait OnlineDetector: Send {
    /// Feeds the next frame; returns `true` if the alarm fires at this frame.
    fn update(&mut self, frame: &[f64]) -> Result<bool>;

    /// Returns to the state before the first frame.
    fn reset(&mut self);
}

/// Index of the first alarm over `frames`, or `None`.
pub fn first_alarm<'a, D, I>(detector: &mut D, frames: I) -> Result<Option<usize>>
where
    D: OnlineDetector + ?Sized,
    I: IntoIterator<Item = &'a [f64]>,
{
    for (t, frame) in frames.into_iter().enumerate() {
        if detector.update(frame)? {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

/// Runs the configured detector over one sequence.
pub fn detect(config: &DetectorConfig, seq: &Sequence) -> Result<DetectionOutcome> {
    if config.kind == DetectorKind::Given {
        let tau = seq
            .recorded_tau
            .ok_or_else(|| Error::Detector(format!("sequence {} has no recorded detection", seq.id)))?;
        return Ok(DetectionOutcome::new(seq.id.clone(), tau));
    }
    let mut det = config.build()?;
    let tau = first_alarm(det.as_mut(), seq.frames())?;
    Ok(DetectionOutcome::new(seq.id.clone(), tau))
}

fn expect_kind(config: &DetectorConfig, kinds: &[DetectorKind]) -> Result<()> {
    if kinds.contains(&config.kind) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "detector kind {} not accepted here",
            config.kind
        )))
    }
}

pub fn run_gsr(seq: &Sequence, config: &DetectorConfig) -> Result<DetectionOutcome> {
    expect_kind(config, &[DetectorKind::Gsr])?;
    detect(config, seq)
}

pub fn run_cusum(seq: &Sequence, config: &DetectorConfig) -> Result<DetectionOutcome> {
    expect_kind(config, &[DetectorKind::Cusum])?;
    detect(config, seq)
}

pub fn run_ewma(seq: &Sequence, config: &DetectorConfig) -> Result<DetectionOutcome> {
    expect_kind(config, &[DetectorKind::Ewma])?;
    detect(config, seq)
}

pub fn run_window(seq: &Sequence, config: &DetectorConfig) -> Result<DetectionOutcome> {
    expect_kind(config, &[DetectorKind::WindowL1, DetectorKind::WindowNormal])?;
    detect(config, seq)
}

pub(crate) fn univariate(frame: &[f64], name: &str) -> Result<f64> {
    match frame {
        [x] => Ok(*x),
        _ => Err(Error::Detector(format!(
            "{name} is univariate; got a frame with {} features",
            frame.len()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let g = LikelihoodModel::gaussian(0.0, 0.1, 0.1).unwrap();
        assert!(DetectorConfig::new(DetectorKind::Gsr, 10.0).validate().is_err());
        assert!(DetectorConfig::gsr(g, 10.0).validate().is_ok());
        assert!(DetectorConfig::new(DetectorKind::WindowL1, 1.0)
            .with_model(g)
            .validate()
            .is_err());
        assert!(DetectorConfig::gsr(g, f64::NAN).validate().is_err());
        let mut e = DetectorConfig::new(DetectorKind::Ewma, 3.0);
        e.ewma_lambda = 0.0;
        assert!(e.validate().is_err());
        e.ewma_lambda = 1.0;
        assert!(e.validate().is_ok());
    }

    #[test]
    fn config_from_json_uses_defaults() {
        let c: DetectorConfig = serde_json::from_str(
            r#"{"kind":"gsr","threshold":100,"model":{"kind":"gaussian","mu0":0,"mu1":0.1,"variance":0.1}}"#,
        )
        .unwrap();
        assert_eq!(c.window_size, 30);
        assert_eq!(c.burn_in, 30);
        assert_eq!(c.omega, 0.0);
        c.validate().unwrap();
    }

    #[test]
    fn kind_parsing() {
        for k in [
            DetectorKind::Gsr,
            DetectorKind::Cusum,
            DetectorKind::Ewma,
            DetectorKind::WindowL1,
            DetectorKind::WindowNormal,
            DetectorKind::Given,
        ] {
            assert_eq!(k.as_str().parse::<DetectorKind>().unwrap(), k);
        }
        assert!("focus".parse::<DetectorKind>().is_err());
    }

    #[test]
    fn given_detector_reads_recorded_tau() {
        let cfg = DetectorConfig::new(DetectorKind::Given, 0.0);
        let s = Sequence::univariate("a", vec![0.0; 5], None).with_recorded_tau(Some(3));
        assert_eq!(detect(&cfg, &s).unwrap().tau, Some(3));
        let bare = Sequence::univariate("b", vec![0.0; 5], None);
        assert!(detect(&cfg, &bare).is_err());
    }

    #[test]
    fn run_functions_check_kind() {
        let g = LikelihoodModel::gaussian(0.0, 0.1, 0.1).unwrap();
        let s = Sequence::univariate("a", vec![0.0; 5], None);
        assert!(run_cusum(&s, &DetectorConfig::gsr(g, 5.0)).is_err());
        assert!(run_gsr(&s, &DetectorConfig::gsr(g, 5.0)).is_ok());
    }
}
