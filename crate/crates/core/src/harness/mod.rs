// SPDX-License-Identifier: MIT OR Apache-2.0

//! End-to-end evaluation: ingest, threshold sweeps and curve output.

mod emit;
mod ingest;
mod manifest;
mod sweep;

pub use emit::{render_curve_svg, save_curve_csv, save_curve_svg, write_curve_csv, Family, FAMILIES};
pub use ingest::{ingest, read_sequences, DataFormat, IngestReport, DEFAULT_MIN_LENGTH};
pub use manifest::RunManifest;
pub use sweep::{
    evaluate, run_detector, survival_curve, sweep, CurveKind, CurvePoint, SweepConfig, SweepResult, ThresholdGrid,
};
