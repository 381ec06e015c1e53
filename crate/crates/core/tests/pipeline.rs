// SPDX-License-Identifier: MIT OR Apache-2.0

use qcd_eval::detectors::{DetectorConfig, LikelihoodModel};
use qcd_eval::harness::{evaluate, ingest, DataFormat, DEFAULT_MIN_LENGTH};
use qcd_eval::simulate::{simulate, ChangepointLaw, LengthLaw, SimSpec};
use qcd_eval::MetricName;

fn spec(n: usize, lengths: LengthLaw, law: ChangepointLaw, fraction: f64) -> SimSpec {
    SimSpec {
        model: LikelihoodModel::gaussian(0.0, 0.1, 0.1).unwrap(),
        n_sequences: n,
        length_law: lengths,
        changepoint_law: law,
        with_change_fraction: fraction,
        seed: 11,
        truncation: None,
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn simulation_is_identical_across_thread_counts() {
    let s = spec(
        500,
        LengthLaw::UniformRange(30, 300),
        ChangepointLaw::Geometric(0.01),
        0.5,
    );
    let one = in_pool(1, || simulate(&s)).unwrap();
    let many = in_pool(8, || simulate(&s)).unwrap();
    assert_eq!(one.fingerprint(), many.fingerprint());
    assert_eq!(one, many);
}

#[test]
fn change_fraction_is_binomial() {
    let n = 10_000;
    let q = 0.3;
    let data = simulate(&spec(n, LengthLaw::Fixed(50), ChangepointLaw::UniformOverLength, q)).unwrap();
    let with_change = data.sequences.iter().filter(|s| s.changepoint.is_some()).count() as f64;
    let sd = (n as f64 * q * (1.0 - q)).sqrt();
    assert!((with_change - n as f64 * q).abs() <= 3.0 * sd, "{with_change}");
}

#[test]
fn pre_change_frames_have_the_model_moments() {
    let data = simulate(&spec(1000, LengthLaw::Fixed(1000), ChangepointLaw::None, 0.0)).unwrap();
    let xs: Vec<f64> = data.sequences.iter().flat_map(|s| s.values().iter().copied()).collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // Normal frames: SE of the mean is sqrt(σ²/n), SE of the variance sqrt(2σ⁴/(n − 1)).
    assert!(mean.abs() <= 5.0 * (0.1 / n).sqrt(), "{mean}");
    assert!((var - 0.1).abs() <= 5.0 * (2.0 * 0.01 / (n - 1.0)).sqrt(), "{var}");
}

#[test]
fn geometric_changepoints_start_at_zero() {
    let p = 0.02;
    let data = simulate(&spec(10_000, LengthLaw::Fixed(5000), ChangepointLaw::Geometric(p), 1.0)).unwrap();
    let nus: Vec<f64> = data
        .sequences
        .iter()
        .filter_map(|s| s.changepoint)
        .map(|v| v as f64)
        .collect();
    let n = nus.len() as f64;
    let mean = nus.iter().sum::<f64>() / n;
    let se = ((1.0 - p).sqrt() / p) / n.sqrt();
    assert!((mean - (1.0 - p) / p).abs() <= 5.0 * se, "{mean}");
    assert!(nus.contains(&0.0));
}

#[test]
fn jsonl_round_trip_preserves_fingerprint_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.jsonl");
    let s = spec(
        300,
        LengthLaw::UniformRange(30, 300),
        ChangepointLaw::Geometric(0.01),
        0.9,
    );
    let original = simulate(&s).unwrap();
    original.save_jsonl(&path).unwrap();
    let (reread, report) = ingest(&path, DataFormat::Jsonl, DEFAULT_MIN_LENGTH).unwrap();
    assert_eq!(report.kept, 300);
    assert_eq!(reread.fingerprint(), original.fingerprint());

    let det = DetectorConfig::gsr(s.model, 100.0);
    let a = evaluate(&original, &det, &MetricName::ALL, None, None).unwrap();
    let b = evaluate(&reread, &det, &MetricName::ALL, None, None).unwrap();
    assert_eq!(a, b);
}
