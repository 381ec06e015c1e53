// SPDX-License-Identifier: MIT OR Apache-2.0

//! `qcd-eval`: simulate datasets, evaluate detectors with censoring-aware
//! metrics, sweep thresholds and run the Monte-Carlo oracles.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::info;
use qcd_eval::detectors::{DetectorConfig, DetectorKind, LikelihoodModel};
use qcd_eval::harness::{
    evaluate, ingest, save_curve_csv, save_curve_svg, survival_curve, sweep, CurveKind, DataFormat, RunManifest,
    SweepConfig, ThresholdGrid, DEFAULT_MIN_LENGTH,
};
use qcd_eval::oracle::{
    bias_bound_report, true_add_mc, true_arl_mc, BoundOptions, OracleChangepoint, ParametricCensorModel,
};
use qcd_eval::simulate::{simulate, LengthLaw, SimSpec};
use qcd_eval::{LabeledDataset, MetricName};
use serde::Serialize;

const EXIT_VALIDATION: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "qcd-eval",
    version,
    about = "Censoring-aware evaluation of quickest change detectors"
)]
struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "QCD_EVAL_WORKERS")]
    workers: Option<usize>,
    /// Seed for every random draw of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sequences shorter than this are dropped on ingest.
    #[arg(long, global = true, default_value_t = DEFAULT_MIN_LENGTH)]
    min_length: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a labeled dataset from a JSON spec.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Metrics of one detector setting.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        detector: DetectorArgs,
        #[arg(long)]
        threshold: f64,
        #[arg(long, value_delimiter = ',', default_value = "km-arl,km-add,lb-arl,lb-add,naive-arl")]
        metrics: Vec<MetricName>,
        #[command(flatten)]
        horizons: HorizonArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Threshold sweep written as a curve CSV, optionally with an SVG plot.
    Curve {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        detector: DetectorArgs,
        /// `start:stop:n-log`, `start:stop:n-lin` or a comma list.
        #[arg(long)]
        thresholds: String,
        #[arg(long, value_delimiter = ',', default_value = "km-arl,km-add,lb-arl,lb-add,naive-arl")]
        metrics: Vec<MetricName>,
        #[command(flatten)]
        horizons: HorizonArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Kaplan-Meier curve of run lengths or delays.
    Survival {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        detector: DetectorArgs,
        #[arg(long)]
        threshold: f64,
        #[arg(long, default_value = "arl")]
        kind: CurveKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo ground truth for a parametric model.
    Oracle {
        #[arg(long)]
        model: LikelihoodModel,
        #[command(flatten)]
        detector: DetectorArgs,
        #[arg(long)]
        threshold: f64,
        #[arg(long, default_value_t = 100_000)]
        reps: usize,
        #[arg(long, default_value_t = 1_000_000)]
        horizon_cap: usize,
        /// Changepoint law for the ADD: `fixed:K`, `geom:P`, `uniform:LO,HI`
        /// or `geom-before-end:P,LO,HI`. Without it only the ARL is computed.
        #[arg(long)]
        changepoint: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the finite-sample bias bounds against Monte Carlo.
    VerifyBounds {
        /// Event and censoring laws, e.g. `exp:1,unif:0,2`.
        #[arg(long)]
        family: String,
        #[arg(long, value_delimiter = ',', default_value = "5,20,100")]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1.0")]
        a: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    /// `jsonl` or `csv`; inferred from the extension when omitted.
    #[arg(long)]
    format: Option<DataFormat>,
}

#[derive(Args, Debug)]
struct DetectorArgs {
    #[arg(long, default_value = "gsr")]
    detector: DetectorKind,
    /// Likelihood model for gsr and cusum, e.g. `gaussian:0,0.1,0.1`.
    #[arg(long = "detector-model")]
    detector_model: Option<LikelihoodModel>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    ewma_lambda: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
}

#[derive(Args, Debug)]
struct HorizonArgs {
    #[arg(long)]
    arl_horizon: Option<f64>,
    #[arg(long)]
    add_horizon: Option<f64>,
}

impl DetectorArgs {
    fn config(&self, threshold: f64, fallback_model: Option<LikelihoodModel>) -> DetectorConfig {
        let mut cfg = DetectorConfig::new(self.detector, threshold);
        cfg.model = self.detector_model.or(fallback_model);
        if let Some(o) = self.omega {
            cfg.omega = o;
        }
        if let Some(l) = self.ewma_lambda {
            cfg.ewma_lambda = l;
        }
        if let Some(w) = self.window {
            cfg.window_size = w;
        }
        if let Some(b) = self.burn_in {
            cfg.burn_in = b;
        }
        cfg
    }
}

fn parse_changepoint(s: &str) -> anyhow::Result<OracleChangepoint> {
    let bad = || qcd_eval::Error::InvalidArgument(format!("bad changepoint law '{s}'"));
    let (kind, params) = s.split_once(':').unwrap_or((s, ""));
    let nums: Vec<f64> = params
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let lengths = |lo: f64, hi: f64| LengthLaw::UniformRange(lo as usize, hi as usize);
    Ok(match (kind, nums.as_slice()) {
        ("fixed", [k]) => OracleChangepoint::Fixed(*k as usize),
        ("geom", [p]) => OracleChangepoint::Geometric(*p),
        ("uniform", [t]) => OracleChangepoint::UniformOverLength(LengthLaw::Fixed(*t as usize)),
        ("uniform", [lo, hi]) => OracleChangepoint::UniformOverLength(lengths(*lo, *hi)),
        ("geom-before-end", [p, lo, hi]) => OracleChangepoint::GeometricBeforeEnd(*p, lengths(*lo, *hi)),
        _ => return Err(bad().into()),
    })
}

fn load(args: &DataArgs, min_length: usize) -> anyhow::Result<LabeledDataset> {
    let format = args.format.unwrap_or_else(|| DataFormat::from_path(&args.data));
    let (dataset, report) = ingest(&args.data, format, min_length)?;
    info!(
        "read {} sequences: {} kept, {} dropped, {} rejected",
        report.read, report.kept, report.dropped, report.rejected
    );
    Ok(dataset)
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn manifest(
    command: &str,
    seed: u64,
    config: impl Serialize,
    dataset: Option<&LabeledDataset>,
    out: &Path,
) -> anyhow::Result<()> {
    let mut m = RunManifest::new(command, seed, config)?;
    if let Some(d) = dataset {
        m = m.with_dataset_hash(d.fingerprint());
    }
    m.save(&RunManifest::path_for(out))?;
    Ok(())
}

#[derive(Serialize)]
struct EvaluateOutput<'a> {
    fingerprint: String,
    detector: &'a DetectorConfig,
    metrics: Vec<qcd_eval::MetricEstimate>,
}

#[derive(Serialize)]
struct OracleOutput {
    detector: DetectorConfig,
    arl: qcd_eval::oracle::MonteCarloEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    add: Option<qcd_eval::oracle::MonteCarloEstimate>,
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Simulate { spec, out } => {
            let text = std::fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let mut spec: SimSpec = serde_json::from_str(&text).map_err(qcd_eval::Error::from)?;
            if let Some(s) = cli.seed {
                spec.seed = s;
            }
            let dataset = simulate(&spec)?;
            manifest("simulate", spec.seed, &spec, Some(&dataset), &out)?;
            dataset.save_jsonl(&out)?;
            info!("{}", qcd_eval::dataset::describe(&dataset));
        }
        Command::Evaluate {
            data,
            detector,
            threshold,
            metrics,
            horizons,
            out,
        } => {
            let dataset = load(&data, cli.min_length)?;
            let cfg = detector.config(threshold, None);
            let config = serde_json::json!({ "detector": &cfg, "metrics": &metrics,
                "arl_horizon": horizons.arl_horizon, "add_horizon": horizons.add_horizon });
            manifest("evaluate", seed, config, Some(&dataset), &out)?;
            let metrics = evaluate(&dataset, &cfg, &metrics, horizons.arl_horizon, horizons.add_horizon)?;
            write_json(
                &out,
                &EvaluateOutput {
                    fingerprint: dataset.fingerprint(),
                    detector: &cfg,
                    metrics,
                },
            )?;
        }
        Command::Curve {
            data,
            detector,
            thresholds,
            metrics,
            horizons,
            out,
            svg,
        } => {
            let grid: ThresholdGrid = thresholds.parse()?;
            let dataset = load(&data, cli.min_length)?;
            let mut config = SweepConfig::new(detector.config(grid.values()[0], None), grid, metrics);
            config.arl_horizon = horizons.arl_horizon;
            config.add_horizon = horizons.add_horizon;
            manifest("curve", seed, &config, Some(&dataset), &out)?;
            let result = sweep(&dataset, &config)?;
            save_curve_csv(&result, &out)?;
            if let Some(svg) = svg {
                save_curve_svg(&result, &svg)?;
            }
        }
        Command::Survival {
            data,
            detector,
            threshold,
            kind,
            out,
        } => {
            let dataset = load(&data, cli.min_length)?;
            let cfg = detector.config(threshold, None);
            manifest(
                "survival",
                seed,
                serde_json::json!({ "detector": &cfg, "kind": kind }),
                Some(&dataset),
                &out,
            )?;
            let curve = survival_curve(&dataset, &cfg, kind)?;
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            let mut w = BufWriter::new(file);
            curve.write_csv(&mut w)?;
            w.flush()?;
        }
        Command::Oracle {
            model,
            detector,
            threshold,
            reps,
            horizon_cap,
            changepoint,
            out,
        } => {
            let cfg = detector.config(threshold, Some(model));
            let changepoint = changepoint.as_deref().map(parse_changepoint).transpose()?;
            if let Some(out) = &out {
                let config = serde_json::json!({ "model": model, "detector": &cfg, "reps": reps,
                    "horizon_cap": horizon_cap, "changepoint": changepoint });
                manifest("oracle", seed, config, None, out)?;
            }
            let arl = true_arl_mc(&model, &cfg, reps, horizon_cap, seed)?;
            let add = changepoint
                .map(|cp| true_add_mc(&model, &cfg, cp, reps, horizon_cap, seed))
                .transpose()?;
            let result = OracleOutput {
                detector: cfg,
                arl,
                add,
            };
            match out {
                Some(out) => write_json(&out, &result)?,
                None => println!("{}", serde_json::to_string_pretty(&result)?),
            }
        }
        Command::VerifyBounds {
            family,
            n,
            a,
            reps,
            out,
        } => {
            let model: ParametricCensorModel = family.parse()?;
            let opts = BoundOptions {
                mc_reps: reps,
                seed,
                ..BoundOptions::default()
            };
            if let Some(out) = &out {
                let config = serde_json::json!({ "family": family, "n": n, "a": a, "reps": reps });
                manifest("verify-bounds", seed, config, None, out)?;
            }
            let mut table = String::from("n,a,lower,upper,mc_bias,mc_ci_halfwidth,contained\n");
            let mut all_contained = true;
            for &n in &n {
                for &a in &a {
                    let r = bias_bound_report(&model, n, a, &opts)?;
                    all_contained &= r.contained;
                    table += &format!(
                        "{},{},{},{},{},{},{}\n",
                        r.n, r.a, r.lower, r.upper, r.mc_bias, r.mc_ci_halfwidth, r.contained
                    );
                }
            }
            match out {
                Some(out) => std::fs::write(&out, &table).with_context(|| format!("writing {}", out.display()))?,
                None => print!("{table}"),
            }
            if !all_contained {
                eprintln!("error: Monte-Carlo bias outside the bounds");
                return Ok(ExitCode::from(EXIT_VERIFY));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(k) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<qcd_eval::Error>()
                .is_some_and(|e| !matches!(e, qcd_eval::Error::Io { .. }))
            {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
