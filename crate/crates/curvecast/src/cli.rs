//! Command-line surface: `curvecast fit | predict | simulate | report`.
//!
//! Exit codes are part of the contract so scripts can tell data problems
//! from model problems: 0 success, 2 input or contract error, 3 fit did not
//! converge (the report is still emitted), 4 unreachable target accuracy.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::fit::{fit, FitError, FitOptions, FitResult};
use crate::model::{CurveParams, ModelError};
use crate::observations::{
    aggregate, materialize_weights, parse_observations, DataError, ObservationSet, WeightScheme,
    DEFAULT_VARIANCE_FLOOR,
};
use crate::plot::{CurvePlot, ObservedPoint};
use crate::predict::{
    bootstrap, predict_accuracy, required_size, sample_curve, PredictError, SizePrediction,
};
use crate::synth::{generate, SynthSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_UNREACHABLE: i32 = 4;

#[derive(Parser)]
#[command(
    name = "curvecast",
    version,
    about = "Fit classifier learning curves and predict required training-set sizes"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the inverse power-law curve to observed accuracies
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
        format: OutputFormat,
    },
    /// Predict accuracy at sizes and/or the size required for a target
    Predict {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
        format: OutputFormat,
        /// Sizes at which to predict accuracy (comma separated)
        #[arg(long, value_delimiter = ',')]
        at: Vec<f64>,
        /// Target accuracy in percent (< 100)
        #[arg(long, allow_negative_numbers = true)]
        target: Option<f64>,
        /// Bootstrap replicate count for uncertainty intervals
        #[arg(long, value_name = "B")]
        bootstrap: Option<usize>,
        /// Seed for the bootstrap resampler
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate synthetic observations from a known curve
    Simulate {
        /// True learning rate (must be <= 0)
        #[arg(long, allow_negative_numbers = true)]
        b1: f64,
        /// True decay rate (must be < 0)
        #[arg(long, allow_negative_numbers = true)]
        b2: f64,
        /// Training-set sizes (comma separated)
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<u64>,
        /// Replicates per size
        #[arg(long, default_value_t = 10)]
        reps: usize,
        /// Noise scale `a` of sigma(x) = a * x^(-c), in accuracy percent
        #[arg(long, default_value_t = 0.0)]
        noise_a: f64,
        /// Noise exponent `c`
        #[arg(long, default_value_t = 0.0)]
        noise_c: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit, plot to SVG, and emit the JSON report
    Report {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        format: OutputFormat,
        /// Target accuracy to mark on the plot
        #[arg(long, allow_negative_numbers = true)]
        target: Option<f64>,
        /// Output path for the SVG plot
        #[arg(long, required = true)]
        svg: PathBuf,
        /// Number of curve samples in the plot
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Observations CSV (header: size,accuracy[,class][,repetition])
    input: PathBuf,
    /// Weighting: `auto`, `uniform`, `invvar`, or comma-separated per-size
    /// values in ascending-size order
    #[arg(long, default_value = "auto")]
    weights: String,
    /// Variance floor for the inverse-variance scheme
    #[arg(long, default_value_t = DEFAULT_VARIANCE_FLOOR)]
    variance_floor: f64,
    /// Class to analyze; defaults to the pooled view when classes exist
    #[arg(long)]
    class: Option<String>,
    #[arg(long, default_value_t = 500)]
    max_iterations: usize,
    /// Relative SSE decrease that declares convergence
    #[arg(long, default_value_t = 1e-10)]
    tolerance: f64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Table,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("class `{0}` not present in the input")]
    UnknownClass(String),
    #[error("cannot parse weight value `{0}`; expected auto, uniform, invvar, or numbers")]
    BadWeightSpec(String),
    #[error("--bootstrap requires --target")]
    BootstrapNeedsTarget,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Synth(#[from] crate::synth::SynthError),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(ModelError::FlatCurve | ModelError::UnreachableTarget(_)) => {
                EXIT_UNREACHABLE
            }
            CliError::Predict(PredictError::Model(
                ModelError::FlatCurve | ModelError::UnreachableTarget(_),
            )) => EXIT_UNREACHABLE,
            CliError::Predict(PredictError::BootstrapFailed(_)) => EXIT_NOT_CONVERGED,
            _ => EXIT_INPUT,
        }
    }
}

/// Parses `std::env::args` and runs; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error}");
            error.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Fit { data, format } => cmd_fit(&data, format),
        Command::Predict {
            data,
            format,
            at,
            target,
            bootstrap,
            seed,
        } => cmd_predict(&data, format, &at, target, bootstrap, seed),
        Command::Simulate {
            b1,
            b2,
            sizes,
            reps,
            noise_a,
            noise_c,
            seed,
            out,
        } => cmd_simulate(b1, b2, sizes, reps, noise_a, noise_c, seed, out.as_deref()),
        Command::Report {
            data,
            format,
            target,
            svg,
            points,
        } => cmd_report(&data, format, target, &svg, points),
    }
}

/// Everything the fit-based subcommands share: parsed input, class
/// selection, materialized weights, and the fit itself.
struct Analysis {
    observations: ObservationSet,
    pairs: Vec<(f64, f64)>,
    weights: Vec<f64>,
    fit: FitResult,
}

fn analyze(data: &DataArgs) -> Result<Analysis, CliError> {
    let text = fs::read_to_string(&data.input).map_err(|source| CliError::Read {
        path: data.input.clone(),
        source,
    })?;
    let parsed = parse_observations(&text)?;

    let observations = match &data.class {
        Some(label) if label == "AverageTotal" => parsed.average_total(),
        Some(label) => parsed
            .select_class(label)
            .ok_or_else(|| CliError::UnknownClass(label.clone()))?,
        None if parsed.has_classes() => parsed.average_total(),
        None => parsed,
    };

    let scheme = parse_weight_scheme(&data.weights, data.variance_floor, &observations)?;
    let (weights, warnings) = materialize_weights(&observations, &scheme, true)?;
    for warning in &warnings {
        eprintln!("warning: {warning}");
    }

    let options = FitOptions {
        max_iterations: data.max_iterations,
        relative_sse_tolerance: data.tolerance,
        ..FitOptions::default()
    };
    let pairs = observations.replicate_pairs();
    let fit = fit(&pairs, &weights, &options)?;
    Ok(Analysis {
        observations,
        pairs,
        weights: weights.into_vec(),
        fit,
    })
}

fn parse_weight_scheme(
    spec: &str,
    floor: f64,
    observations: &ObservationSet,
) -> Result<WeightScheme, CliError> {
    match spec {
        "auto" => {
            // Inverse variance once any size carries real replication.
            let replicated =
                observations.replicate_pairs().len() > observations.distinct_sizes().len();
            Ok(if replicated {
                WeightScheme::InverseVariance { floor }
            } else {
                WeightScheme::Uniform
            })
        }
        "uniform" => Ok(WeightScheme::Uniform),
        "invvar" | "inverse-variance" => Ok(WeightScheme::InverseVariance { floor }),
        list => {
            let values: Result<Vec<f64>, _> =
                list.split(',').map(str::trim).map(str::parse).collect();
            match values {
                Ok(values) => Ok(WeightScheme::Manual(values)),
                Err(_) => Err(CliError::BadWeightSpec(list.to_string())),
            }
        }
    }
}

fn weight_scheme_for(
    data: &DataArgs,
    observations: &ObservationSet,
) -> Result<WeightScheme, CliError> {
    parse_weight_scheme(&data.weights, data.variance_floor, observations)
}

fn fit_exit_code(fit: &FitResult) -> i32 {
    if fit.converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    }
}

// ---------------------------------------------------------------------------
// JSON report schema (stable keys)

#[derive(Serialize)]
struct JsonReport {
    params: JsonParams,
    weighted_sse: f64,
    converged: bool,
    residuals: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    predictions: Option<Vec<JsonPrediction>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    required_size: Option<JsonRequiredSize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bootstrap: Option<JsonBootstrap>,
}

#[derive(Serialize)]
struct JsonParams {
    b1: f64,
    b2: f64,
}

#[derive(Serialize)]
struct JsonPrediction {
    x: f64,
    accuracy: f64,
}

#[derive(Serialize)]
struct JsonRequiredSize {
    target: f64,
    real: f64,
    int: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    interval: Option<[u64; 2]>,
    status: crate::predict::PredictionStatus,
}

#[derive(Serialize)]
struct JsonBootstrap {
    #[serde(rename = "B")]
    replicates: usize,
    seed: u64,
    intervals: JsonIntervals,
    failed_refits: usize,
}

#[derive(Serialize)]
struct JsonIntervals {
    b1: [f64; 2],
    b2: [f64; 2],
    required_size: [u64; 2],
}

impl JsonReport {
    fn from_fit(fit: &FitResult) -> Self {
        Self {
            params: JsonParams {
                b1: fit.params.b1(),
                b2: fit.params.b2(),
            },
            weighted_sse: fit.weighted_sse,
            converged: fit.converged,
            residuals: fit.residuals.clone(),
            predictions: None,
            required_size: None,
            bootstrap: None,
        }
    }

    fn with_required_size(mut self, prediction: &SizePrediction) -> Self {
        self.required_size = Some(JsonRequiredSize {
            target: prediction.target_accuracy,
            real: prediction.required_size_real,
            int: prediction.required_size,
            interval: prediction.interval.map(|(lo, hi)| [lo, hi]),
            status: prediction.status,
        });
        self
    }
}

// ---------------------------------------------------------------------------
// Table output

fn styled(text: &str) -> String {
    if std::env::var_os("CURVECAST_NO_COLOR").is_some() {
        text.to_string()
    } else {
        format!("\x1b[1m{text}\x1b[0m")
    }
}

fn print_fit_table(analysis: &Analysis) {
    let fit = &analysis.fit;
    println!("{}", styled("fitted parameters"));
    println!("  b1 (learning rate) {:>14.6}", fit.params.b1());
    println!("  b2 (decay rate)    {:>14.6}", fit.params.b2());
    println!("  weighted SSE       {:>14.6}", fit.weighted_sse);
    println!(
        "  converged          {:>14}   iterations {}{}",
        fit.converged,
        fit.iterations_used,
        if fit.condition_warning {
            "   (near-singular normal equations seen)"
        } else {
            ""
        }
    );
    println!();
    println!(
        "{}",
        styled("    size     observed       fitted     residual       weight")
    );
    for ((&(x, t), residual), &w) in analysis
        .pairs
        .iter()
        .zip(&fit.residuals)
        .zip(&analysis.weights)
    {
        println!(
            "{:>8} {:>12.4} {:>12.4} {:>12.4} {:>12.4}",
            x,
            t,
            t - residual,
            residual,
            w
        );
    }
}

fn print_prediction_table(
    predictions: &[(f64, f64)],
    prediction: Option<&SizePrediction>,
    report: Option<&crate::predict::BootstrapReport>,
) {
    if !predictions.is_empty() {
        println!();
        println!("{}", styled("    size   predicted accuracy"));
        for &(x, accuracy) in predictions {
            println!("{x:>8} {accuracy:>20.4}");
        }
    }
    if let Some(p) = prediction {
        println!();
        println!(
            "required size for {}%: {} (exact {:.4}{})",
            p.target_accuracy,
            p.required_size,
            p.required_size_real,
            if p.status == crate::predict::PredictionStatus::SubUnitSize {
                "; below one sample"
            } else {
                ""
            }
        );
        if let Some((lo, hi)) = p.interval {
            println!("  95% bootstrap interval: [{lo}, {hi}]");
        }
    }
    if let Some(r) = report {
        println!(
            "  bootstrap B={} seed={} failed={}: b1 in [{:.4}, {:.4}], b2 in [{:.4}, {:.4}]",
            r.replicates,
            r.seed,
            r.failed_refits,
            r.b1_interval.0,
            r.b1_interval.1,
            r.b2_interval.0,
            r.b2_interval.1
        );
    }
}

// ---------------------------------------------------------------------------
// Subcommands

fn cmd_fit(data: &DataArgs, format: OutputFormat) -> Result<i32, CliError> {
    let analysis = analyze(data)?;
    match format {
        OutputFormat::Json => {
            let report = JsonReport::from_fit(&analysis.fit);
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("serialize")
            );
        }
        OutputFormat::Table => print_fit_table(&analysis),
    }
    Ok(fit_exit_code(&analysis.fit))
}

fn cmd_predict(
    data: &DataArgs,
    format: OutputFormat,
    at: &[f64],
    target: Option<f64>,
    bootstrap_b: Option<usize>,
    seed: u64,
) -> Result<i32, CliError> {
    if bootstrap_b.is_some() && target.is_none() {
        return Err(CliError::BootstrapNeedsTarget);
    }
    let analysis = analyze(data)?;

    let mut predictions = Vec::with_capacity(at.len());
    for &x in at {
        predictions.push((x, predict_accuracy(&analysis.fit, x)?));
    }

    let mut prediction = target
        .map(|t| required_size(&analysis.fit, t))
        .transpose()?;
    let mut boot_report = None;
    if let (Some(b), Some(t)) = (bootstrap_b, target) {
        let scheme = weight_scheme_for(data, &analysis.observations)?;
        let options = FitOptions {
            max_iterations: data.max_iterations,
            relative_sse_tolerance: data.tolerance,
            ..FitOptions::default()
        };
        let report = bootstrap(&analysis.observations, &scheme, &options, t, b, seed)?;
        if let Some(p) = prediction.as_mut() {
            p.interval = Some(report.size_interval);
        }
        boot_report = Some(report);
    }

    match format {
        OutputFormat::Json => {
            let mut report = JsonReport::from_fit(&analysis.fit);
            report.predictions = Some(
                predictions
                    .iter()
                    .map(|&(x, accuracy)| JsonPrediction { x, accuracy })
                    .collect(),
            );
            if let Some(p) = &prediction {
                report = report.with_required_size(p);
            }
            if let Some(b) = &boot_report {
                report.bootstrap = Some(JsonBootstrap {
                    replicates: b.replicates,
                    seed: b.seed,
                    intervals: JsonIntervals {
                        b1: [b.b1_interval.0, b.b1_interval.1],
                        b2: [b.b2_interval.0, b.b2_interval.1],
                        required_size: [b.size_interval.0, b.size_interval.1],
                    },
                    failed_refits: b.failed_refits,
                });
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("serialize")
            );
        }
        OutputFormat::Table => {
            print_fit_table(&analysis);
            print_prediction_table(&predictions, prediction.as_ref(), boot_report.as_ref());
        }
    }
    Ok(fit_exit_code(&analysis.fit))
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    b1: f64,
    b2: f64,
    sizes: Vec<u64>,
    reps: usize,
    noise_a: f64,
    noise_c: f64,
    seed: u64,
    out: Option<&Path>,
) -> Result<i32, CliError> {
    let truth = CurveParams::new(b1, b2)?;
    let spec = SynthSpec {
        replicates_per_size: reps,
        noise_scale: noise_a,
        noise_exponent: noise_c,
        ..SynthSpec::new(truth, sizes, seed)
    };
    let observations = generate(&spec)?;
    let csv = observations.to_csv();
    match out {
        Some(path) => fs::write(path, csv).map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        })?,
        None => print!("{csv}"),
    }
    Ok(EXIT_OK)
}

fn cmd_report(
    data: &DataArgs,
    format: OutputFormat,
    target: Option<f64>,
    svg_path: &Path,
    points: usize,
) -> Result<i32, CliError> {
    let analysis = analyze(data)?;
    let prediction = target
        .map(|t| required_size(&analysis.fit, t))
        .transpose()?;

    let sizes = analysis.observations.distinct_sizes();
    let x_min = sizes.first().copied().unwrap_or(1) as f64;
    let mut x_max = sizes.last().copied().unwrap_or(10) as f64;
    if let Some(p) = &prediction {
        x_max = x_max.max(p.required_size_real * 1.05);
    }
    let curve = sample_curve(&analysis.fit, x_min, x_max, points.max(2))?;

    let table = aggregate(&analysis.observations);
    let observed = table
        .rows
        .iter()
        .map(|row| ObservedPoint {
            size: row.size as f64,
            mean: row.overall_mean,
            std_dev: row.std_dev,
        })
        .collect();
    let plot = CurvePlot {
        observed,
        curve,
        target_marker: prediction
            .as_ref()
            .map(|p| (p.required_size_real, p.target_accuracy)),
        title: format!(
            "learning curve: accuracy = 100 {:+.4} * x^({:.4})",
            analysis.fit.params.b1(),
            analysis.fit.params.b2()
        ),
    };
    fs::write(svg_path, plot.to_svg()).map_err(|source| CliError::Write {
        path: svg_path.to_path_buf(),
        source,
    })?;

    match format {
        OutputFormat::Json => {
            let mut report = JsonReport::from_fit(&analysis.fit);
            if let Some(p) = &prediction {
                report = report.with_required_size(p);
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("serialize")
            );
        }
        OutputFormat::Table => {
            print_fit_table(&analysis);
            print_prediction_table(&[], prediction.as_ref(), None);
            println!();
            println!("plot written to {}", svg_path.display());
        }
    }
    Ok(fit_exit_code(&analysis.fit))
}
