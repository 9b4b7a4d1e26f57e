//! `probrank` command-line tool.
//!
//! Exit status: 0 on success, 1 for bad input (flags, files, records), 2 when
//! a computation cannot produce a result.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use probrank::forecast::{DiscreteForecast, HistogramForecast, MASS_TOLERANCE};
use probrank::io::{self as pio, ForecastForm, ForecastRecord};
use probrank::ranking::{build_leaderboard, LeaderboardConfig, DEFAULT_NSIM};
use probrank::scoring::{score_batch, Metric, MetricSpec, Orientation};
use probrank::synth::{self, ScenarioKind, ScenarioSpec};

/// Environment variable capping the worker threads used for the permutation null.
const WORKERS_ENV: &str = "PROBRANK_WORKERS";

#[derive(Parser)]
#[command(name = "probrank", version, about = "Score probabilistic forecasts and rank models across datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a forecast file under one or more metrics.
    Score(ScoreArgs),
    /// Build a permutation-test leaderboard from a run table.
    Leaderboard(LeaderboardArgs),
    /// Generate a synthetic run table or forecast file.
    Synth(SynthArgs),
    /// Check a forecast file or run table for invariant violations.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct ScoreArgs {
    /// JSON-lines forecast file.
    #[arg(long)]
    forecasts: PathBuf,
    /// Comma-separated metric identifiers. Bare `interval_score` and
    /// `energy_score` take their parameter from --alpha and --beta.
    #[arg(long, value_delimiter = ',', required = true)]
    metrics: Vec<String>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Miscoverage level for bare `interval_score`.
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Exponent for bare `energy_score`.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Location and scale standardizing the wCRPS weights; defaults to the
    /// batch's target mean and standard deviation.
    #[arg(long, num_args = 2, value_names = ["LOC", "SCALE"], allow_negative_numbers = true)]
    weight_ref: Option<Vec<f64>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrientationArg {
    Lower,
    Higher,
}

#[derive(Args)]
struct LeaderboardArgs {
    /// Run table (model,dataset,fold,metric,value).
    #[arg(long)]
    runs: PathBuf,
    /// Metric to rank on.
    #[arg(long)]
    metric: String,
    /// Permutation draws for the null distribution.
    #[arg(long, default_value_t = DEFAULT_NSIM)]
    nsim: usize,
    /// Seed for the permutation null.
    #[arg(long)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Append full-precision copies of the numeric columns.
    #[arg(long)]
    wide: bool,
    /// Which direction is better; required for metrics the tool does not know.
    #[arg(long, value_enum)]
    orientation: Option<OrientationArg>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 2)]
    models: usize,
    #[arg(long, default_value_t = 20)]
    datasets: usize,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Metrics to emit run records for.
    #[arg(long, value_delimiter = ',', default_value = "crps")]
    metrics: Vec<String>,
    /// Instances for the self_calibrated scenario.
    #[arg(long, default_value_t = 1000)]
    instances: usize,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ValidateArgs {
    #[arg(long)]
    forecasts: Option<PathBuf>,
    #[arg(long)]
    runs: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn metric_specs(args: &ScoreArgs) -> anyhow::Result<Vec<MetricSpec>> {
    args.metrics
        .iter()
        .map(|name| {
            let metric = match name.trim().to_ascii_lowercase().as_str() {
                "interval_score" => Metric::IntervalScore { alpha: args.alpha },
                "energy_score" => Metric::EnergyScore { beta: args.beta },
                _ => name.parse()?,
            };
            let mut spec = MetricSpec::new(metric);
            if let (Metric::Wcrps(_), Some(r)) = (metric, &args.weight_ref) {
                spec = spec.with_weight_ref(r[0], r[1]);
            }
            Ok(spec)
        })
        .collect()
}

fn cmd_score(args: ScoreArgs) -> anyhow::Result<ExitCode> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(probrank::Error::InvalidLevel(args.alpha).into());
    }
    if !(args.beta > 0.0 && args.beta <= 2.0) {
        return Err(probrank::Error::InvalidBeta(args.beta).into());
    }
    let specs = metric_specs(&args)?;
    let records = pio::read_forecasts(&args.forecasts)?;
    let scores = score_batch(&records, &specs)?;
    for w in &scores.warnings {
        eprintln!("warning: {w}");
    }
    pio::write_scores(&scores, output(args.out.as_deref())?)?;
    Ok(ExitCode::SUCCESS)
}

fn workers() -> anyhow::Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => bail!("{WORKERS_ENV} must be a positive integer, got `{v}`"),
        },
        Err(_) => Ok(None),
    }
}

fn cmd_leaderboard(args: LeaderboardArgs) -> anyhow::Result<ExitCode> {
    let orientation = match args.orientation {
        Some(OrientationArg::Lower) => Orientation::LowerBetter,
        Some(OrientationArg::Higher) => Orientation::HigherBetter,
        None => args
            .metric
            .parse::<Metric>()
            .map(|m| m.orientation())
            .with_context(|| format!("pass --orientation to rank on `{}`", args.metric))?,
    };
    let runs = pio::read_runs(&args.runs)?;
    let config = LeaderboardConfig {
        nsim: args.nsim,
        seed: args.seed,
        workers: workers()?,
    };
    let lb = build_leaderboard(&runs, &args.metric, orientation, &config)?;
    if !lb.incomplete_datasets.is_empty() {
        eprintln!(
            "dropped {} dataset(s) missing runs from some model: {}",
            lb.incomplete_datasets.len(),
            lb.incomplete_datasets.join(", ")
        );
    }
    if !lb.zero_variance_datasets.is_empty() {
        eprintln!(
            "dropped {} dataset(s) where all models scored the same: {}",
            lb.zero_variance_datasets.len(),
            lb.zero_variance_datasets.join(", ")
        );
    }
    eprintln!("ranked {} model(s) on {} dataset(s)", lb.rows.len(), lb.datasets_used);
    pio::write_leaderboard_to(&lb.rows, args.wide, output(args.out.as_deref())?)?;
    Ok(ExitCode::SUCCESS)
}

/// A point-mass forecast as a histogram: a narrow bin around each atom with
/// empty bins filling the gaps. The half-width is a power of two so that bin
/// centers reproduce grid-valued atoms exactly.
fn as_histogram(f: &DiscreteForecast) -> probrank::Result<HistogramForecast> {
    let pts = f.points();
    let min_gap = pts.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let half = 2f64.powi((min_gap / 4.0).min(1e-3).log2().floor() as i32);
    let mut edges = Vec::with_capacity(2 * pts.len());
    let mut probs = Vec::with_capacity(2 * pts.len() - 1);
    for (i, (&x, &p)) in pts.iter().zip(f.probs()).enumerate() {
        if i > 0 {
            probs.push(0.0);
        }
        edges.extend([x - half, x + half]);
        probs.push(p);
    }
    HistogramForecast::new(edges, probs)
}

fn cmd_synth(args: SynthArgs) -> anyhow::Result<ExitCode> {
    let kind: ScenarioKind = args.scenario.parse()?;
    let mut out = output(args.out.as_deref())?;
    if kind == ScenarioKind::SelfCalibrated {
        let batch = synth::generate_self_calibrated_batch(args.instances, args.seed)?;
        let records = batch
            .iter()
            .enumerate()
            .map(|(i, (f, y))| Ok(ForecastRecord::new(i.to_string(), *y, ForecastForm::Histogram(as_histogram(f)?))))
            .collect::<probrank::Result<Vec<_>>>()?;
        pio::write_forecasts(&records, out)?;
    } else {
        let spec = ScenarioSpec {
            metrics: args.metrics,
            ..ScenarioSpec::new(kind, args.models, args.datasets, args.folds, args.seed)
        };
        let runs = synth::generate_runs(&spec)?;
        pio::write_runs(&runs, &mut out)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn validate_forecasts(path: &Path) -> anyhow::Result<Vec<String>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut violations = Vec::new();
    for (i, text) in BufReader::new(file).lines().enumerate() {
        let (line, text) = (i + 1, text?);
        if text.trim().is_empty() {
            continue;
        }
        let rec = match pio::parse_forecast_line(&text, line) {
            Ok(rec) => rec,
            Err(e) => {
                violations.push(e.to_string());
                continue;
            }
        };
        match &rec.forecast {
            ForecastForm::Quantiles(q) if q.crossings_repaired() > 0 => violations.push(format!(
                "line {line} (id {}): {} crossing quantile pair(s) repaired",
                rec.id,
                q.crossings_repaired()
            )),
            ForecastForm::Histogram(h) if h.mass_deviation() > MASS_TOLERANCE => violations.push(format!(
                "line {line} (id {}): probabilities deviate from 1 by {:e}",
                rec.id,
                h.mass_deviation()
            )),
            _ => {}
        }
    }
    Ok(violations)
}

fn validate_runs(path: &Path) -> anyhow::Result<Vec<String>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let rows = pio::scan_runs(file)?;
    Ok(pio::duplicate_runs(&rows)
        .into_iter()
        .map(|d| format!("line {}: duplicate key {} (first at line {})", d.line, d.key, d.first_line))
        .collect())
}

fn cmd_validate(args: ValidateArgs) -> anyhow::Result<ExitCode> {
    let violations = match (&args.forecasts, &args.runs) {
        (Some(p), _) => validate_forecasts(p)?,
        (_, Some(p)) => validate_runs(p)?,
        _ => unreachable!("clap enforces exactly one input"),
    };
    for v in &violations {
        println!("{v}");
    }
    println!("{} violations", violations.len());
    Ok(if violations.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<probrank::Error>() {
        Some(e) if !e.is_input_error() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Score(a) => cmd_score(a),
        Command::Leaderboard(a) => cmd_leaderboard(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
