// SPDX-License-Identifier: MIT OR Apache-2.0

//! Evaluation of quickest-changepoint detectors on finite, irregular-length
//! sequences.
//!
//! The central estimators are KM-ARL and KM-ADD: restricted means of
//! Kaplan-Meier survival curves of detection times and detection delays,
//! which use every sequence, including those that end or change before the
//! detector raises an alarm.

pub mod dataset;
pub mod detectors;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod oracle;
pub mod quadrature;
pub mod rng;
pub mod simulate;
pub mod survival;

pub use dataset::{DetectionOutcome, LabeledDataset, Sequence, SequenceMeta};
pub use error::{Error, Result};
pub use metrics::{MetricEstimate, MetricName, Observation};
pub use survival::{fit_km, max_last_observed, rmst, RestrictedMean, StepSurvivalCurve, SurvivalSample};
