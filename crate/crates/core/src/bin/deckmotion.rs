use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use deckmotion::evaluate::{error_rows, predict_series_with, save_error_csv};
use deckmotion::rest::write_intervals_csv;
use deckmotion::series::{make_windows, sample_series, split_series};
use deckmotion::wavegen::{
    knox_training_model, random_sea_state_model_with, sea_state5_reference_model, table1_spec, SeaStateSpec,
};
use deckmotion::{
    detect_rest_periods, error_report, load_model, plot, rest_periods_from_forecast, save_model, train, Error,
    MotionSeries, Normalizer, Optimizer, RestCriteria, TrainConfig, WaveModel,
};

/// Ship deck motion synthesis, composite LSTM prediction and rest-period
/// detection.
#[derive(Parser)]
#[command(name = "deckmotion", version)]
struct Cli {
    /// Seed for every random choice (model generation, weight init, shuffling).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Sampling interval in seconds for simulated series.
    #[arg(long, global = true, default_value_t = 0.1)]
    dt: f64,

    /// Suppress progress messages.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a wave model into a CSV series.
    Simulate(SimulateArgs),
    /// Train the composite LSTM on a CSV series.
    Train(TrainArgs),
    /// One-step-ahead predictions for a CSV series.
    Predict(PredictArgs),
    /// Absolute-error curves and MAE of one-step-ahead predictions.
    Evaluate(EvaluateArgs),
    /// Rest periods of forecasted (or, without --model, observed) motion.
    Rest(RestArgs),
    /// Render SVG plots from series or error CSV files.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Knox,
    Seastate5,
    Random,
}

#[derive(Args)]
struct SimulateArgs {
    /// Built-in model to sample.
    #[arg(long, value_enum, default_value = "knox")]
    model: ModelKind,
    /// Read the wave model from this JSON file instead of --model.
    #[arg(long)]
    model_file: Option<PathBuf>,
    /// Sea-state ranges for --model random (JSON); defaults to sea state 5.
    #[arg(long)]
    spec_file: Option<PathBuf>,
    /// Draw random phases in [0, 2π) for --model random.
    #[arg(long)]
    random_phases: bool,
    /// Number of samples.
    #[arg(long, default_value_t = 2000)]
    n: usize,
    /// Output series CSV (t,heave,pitch,roll).
    #[arg(long)]
    out: PathBuf,
    /// Also write the wave model as JSON.
    #[arg(long)]
    save_model: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Args)]
struct TrainArgs {
    /// Input series CSV.
    #[arg(long)]
    data: PathBuf,
    /// Samples of history per prediction.
    #[arg(long, default_value_t = 40)]
    lookback: usize,
    /// Fraction of the series used for training.
    #[arg(long, default_value_t = 0.7)]
    split: f64,
    /// Hidden units.
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    /// Windows per mini-batch.
    #[arg(long, default_value_t = 32)]
    batch: usize,
    /// Learning rate.
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, value_enum, default_value = "adam")]
    optimizer: OptimizerKind,
    /// Shuffle seed; defaults to --seed.
    #[arg(long)]
    shuffle_seed: Option<u64>,
    /// Output model JSON.
    #[arg(long)]
    out: PathBuf,
    /// Output training report JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Include wall time in the report (makes it run-dependent).
    #[arg(long)]
    record_time: bool,
}

#[derive(Args)]
struct ForecastArgs {
    /// Trained model JSON.
    #[arg(long)]
    model: PathBuf,
    /// Input series CSV.
    #[arg(long)]
    data: PathBuf,
    /// First index to predict; must be at least the lookback.
    #[arg(long, default_value_t = 40)]
    start_index: usize,
    /// Normalize with statistics of the input series instead of the
    /// model's stored training statistics.
    #[arg(long)]
    renormalize: bool,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    forecast: ForecastArgs,
    /// Output predictions CSV (t,heave,pitch,roll).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    forecast: ForecastArgs,
    /// Output error CSV (t,channel,truth,prediction,abs_error).
    #[arg(long)]
    out_csv: PathBuf,
    /// Output summary JSON (count and per-channel mae, max_error).
    #[arg(long)]
    out_json: PathBuf,
    /// Directory for SVG plots of predictions and error curves.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct RestArgs {
    /// Trained model JSON; without it the observed series is scanned.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Input series CSV.
    #[arg(long)]
    data: PathBuf,
    /// First index to predict when --model is given.
    #[arg(long, default_value_t = 40)]
    start_index: usize,
    /// Use input-series statistics for normalization (see `predict`).
    #[arg(long)]
    renormalize: bool,
    /// Largest acceptable |pitch|.
    #[arg(long)]
    pitch_max: f64,
    /// Largest acceptable |roll|.
    #[arg(long)]
    roll_max: f64,
    /// Largest acceptable |heave rate|, units per second.
    #[arg(long)]
    heave_rate_max: Option<f64>,
    /// Shortest interval reported, seconds.
    #[arg(long, default_value_t = 0.0)]
    min_duration: f64,
    /// Output intervals CSV (start_t,end_t,duration).
    #[arg(long)]
    out: PathBuf,
    /// Output intervals JSON.
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Series CSV to plot (one panel per channel).
    #[arg(long, required_unless_present = "errors")]
    series: Option<PathBuf>,
    /// Error CSV from `evaluate` to plot.
    #[arg(long)]
    errors: Option<PathBuf>,
    /// Output SVG for --series.
    #[arg(long, requires = "series")]
    out: Option<PathBuf>,
    /// Output directory for --errors plots.
    #[arg(long, requires = "errors")]
    out_dir: Option<PathBuf>,
}

/// Files written so far; removed again if the command fails.
#[derive(Default)]
struct Outputs(Vec<PathBuf>);

impl Outputs {
    fn write(&mut self, path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
        self.0.push(path.to_path_buf());
        fs::write(path, contents).map_err(|e| Error::Io {
            path: path.into(),
            source: e,
        })?;
        Ok(())
    }

    fn track(&mut self, path: &Path) {
        self.0.push(path.to_path_buf());
    }

    fn discard(&self) {
        for p in &self.0 {
            let _ = fs::remove_file(p);
        }
    }
}

fn check_input(path: &Path) -> anyhow::Result<()> {
    if !path.is_file() {
        return Err(Error::Io {
            path: path.into(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
        }
        .into());
    }
    Ok(())
}

fn check_output(path: &Path) -> anyhow::Result<()> {
    let parent = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    if !parent.is_dir() {
        return Err(Error::Io {
            path: path.into(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist"),
        }
        .into());
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn simulate(cli: &Cli, args: &SimulateArgs, out: &mut Outputs) -> anyhow::Result<()> {
    if let Some(p) = &args.model_file {
        check_input(p)?;
    }
    if let Some(p) = &args.spec_file {
        check_input(p)?;
    }
    check_output(&args.out)?;
    if let Some(p) = &args.save_model {
        check_output(p)?;
    }

    let model: WaveModel = match (&args.model_file, args.model) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            serde_json::from_str(&text).map_err(|e| Error::Malformed {
                path: path.clone(),
                reason: e.to_string(),
            })?
        }
        (None, ModelKind::Knox) => knox_training_model(),
        (None, ModelKind::Seastate5) => sea_state5_reference_model(),
        (None, ModelKind::Random) => {
            let spec: SeaStateSpec = match &args.spec_file {
                Some(path) => {
                    let text = fs::read_to_string(path).map_err(|e| Error::Io {
                        path: path.clone(),
                        source: e,
                    })?;
                    serde_json::from_str(&text).map_err(|e| Error::Malformed {
                        path: path.clone(),
                        reason: e.to_string(),
                    })?
                }
                None => table1_spec(),
            };
            random_sea_state_model_with(&spec, cli.seed, args.random_phases)?
        }
    };
    let series = sample_series(&model, args.n, cli.dt)?;
    out.track(&args.out);
    series.write_csv(&args.out)?;
    if let Some(p) = &args.save_model {
        out.write(p, to_json(&model))?;
    }
    if !cli.quiet {
        eprintln!(
            "wrote {} samples of model '{}' to {}",
            series.len(),
            model.label(),
            args.out.display()
        );
    }
    Ok(())
}

fn run_train(cli: &Cli, args: &TrainArgs, out: &mut Outputs) -> anyhow::Result<()> {
    check_input(&args.data)?;
    check_output(&args.out)?;
    if let Some(p) = &args.report {
        check_output(p)?;
    }
    let series = MotionSeries::read_csv(&args.data)?;
    if series.len() < args.lookback + 2 {
        bail!(
            "series has {} rows; training needs at least lookback + 2 = {}",
            series.len(),
            args.lookback + 2
        );
    }
    let windows = make_windows(&series, args.lookback)?;
    let split = split_series(&windows, args.split, series.len())?;
    let config = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch,
        learning_rate: args.lr,
        optimizer: match args.optimizer {
            OptimizerKind::Adam => Optimizer::adam(),
            OptimizerKind::Sgd => Optimizer::Sgd,
        },
        shuffle_seed: args.shuffle_seed.unwrap_or(cli.seed),
        hidden_dim: args.hidden,
        lookback: args.lookback,
    };
    if !cli.quiet {
        eprintln!(
            "training on {} windows, testing on {} (boundary index {})",
            split.train.len(),
            split.test.len(),
            split.boundary_index
        );
    }
    let (mut artifact, mut report) = train(&split, &config, cli.seed)?;
    let source = args
        .data
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    artifact.provenance = format!("source={source}; {}", artifact.provenance);
    if !cli.quiet {
        eprintln!(
            "epoch loss {:.6e} -> {:.6e}, test loss {:.6e}, {:.1} s",
            report.epoch_losses[0],
            report.epoch_losses[report.epoch_losses.len() - 1],
            report.test_loss,
            report.wall_time_seconds.unwrap_or_default()
        );
    }
    if !args.record_time {
        report.wall_time_seconds = None;
    }
    out.track(&args.out);
    save_model(&artifact, &args.out)?;
    if let Some(p) = &args.report {
        out.write(p, to_json(&report))?;
    }
    Ok(())
}

fn forecast(args: &ForecastArgs) -> anyhow::Result<(deckmotion::ForecastResult, MotionSeries)> {
    let artifact = load_model(&args.model)?;
    let series = MotionSeries::read_csv(&args.data)?;
    let norm = if args.renormalize {
        Normalizer::fit(series.samples())?
    } else {
        artifact.normalizer
    };
    let result = predict_series_with(&artifact, &series, args.start_index, &norm)
        .with_context(|| format!("predicting {}", args.data.display()))?;
    Ok((result, series))
}

fn predict(cli: &Cli, args: &PredictArgs, out: &mut Outputs) -> anyhow::Result<()> {
    check_input(&args.forecast.model)?;
    check_input(&args.forecast.data)?;
    check_output(&args.out)?;
    let (result, series) = forecast(&args.forecast)?;
    let predicted = MotionSeries::new(series.dt(), result.time(0), result.predictions.clone())?;
    out.track(&args.out);
    predicted.write_csv(&args.out)?;
    if !cli.quiet {
        eprintln!("wrote {} predictions to {}", result.len(), args.out.display());
    }
    Ok(())
}

fn evaluate(cli: &Cli, args: &EvaluateArgs, out: &mut Outputs) -> anyhow::Result<()> {
    check_input(&args.forecast.model)?;
    check_input(&args.forecast.data)?;
    check_output(&args.out_csv)?;
    check_output(&args.out_json)?;
    let (result, _) = forecast(&args.forecast)?;
    let report = error_report(&result)?;
    out.track(&args.out_csv);
    save_error_csv(&result, &args.out_csv)?;
    out.write(&args.out_json, report.summary_json() + "\n")?;
    if let Some(dir) = &args.svg {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        let rows = error_rows(&result);
        out.write(&dir.join("prediction.svg"), plot::forecast_svg(&rows))?;
        out.write(&dir.join("abs_error.svg"), plot::error_svg(&rows))?;
    }
    if !cli.quiet {
        for (ch, e) in deckmotion::wavegen::Channel::ALL.iter().zip(&report.channels) {
            eprintln!("{ch:>5}: mae {:.6e}  max {:.6e}", e.mae, e.max_error);
        }
    }
    Ok(())
}

fn rest(cli: &Cli, args: &RestArgs, out: &mut Outputs) -> anyhow::Result<()> {
    if let Some(m) = &args.model {
        check_input(m)?;
    }
    check_input(&args.data)?;
    check_output(&args.out)?;
    if let Some(p) = &args.out_json {
        check_output(p)?;
    }
    let criteria = RestCriteria {
        pitch_max: args.pitch_max,
        roll_max: args.roll_max,
        heave_rate_max: args.heave_rate_max,
        min_duration: args.min_duration,
    };
    criteria.validate()?;
    let intervals = match &args.model {
        Some(model) => {
            let fa = ForecastArgs {
                model: model.clone(),
                data: args.data.clone(),
                start_index: args.start_index,
                renormalize: args.renormalize,
            };
            let (result, series) = forecast(&fa)?;
            rest_periods_from_forecast(&result, series.dt(), &criteria)?
        }
        None => detect_rest_periods(&MotionSeries::read_csv(&args.data)?, &criteria)?,
    };
    let mut csv = Vec::new();
    write_intervals_csv(&intervals, &mut csv).map_err(|e| Error::Io {
        path: args.out.clone(),
        source: e,
    })?;
    out.write(&args.out, csv)?;
    if let Some(p) = &args.out_json {
        out.write(p, to_json(&intervals))?;
    }
    if !cli.quiet {
        let total: f64 = intervals.iter().map(|i| i.duration).sum();
        eprintln!("{} rest periods, {:.2} s in total", intervals.len(), total);
    }
    Ok(())
}

fn run_plot(args: &PlotArgs, out: &mut Outputs) -> anyhow::Result<()> {
    if let Some(series) = &args.series {
        check_input(series)?;
        let Some(target) = &args.out else {
            bail!("--series needs --out")
        };
        check_output(target)?;
        out.write(target, plot::series_svg(&MotionSeries::read_csv(series)?))?;
    }
    if let Some(errors) = &args.errors {
        check_input(errors)?;
        let Some(dir) = &args.out_dir else {
            bail!("--errors needs --out-dir")
        };
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        let rows = deckmotion::evaluate::read_error_csv(errors)?;
        out.write(&dir.join("prediction.svg"), plot::forecast_svg(&rows))?;
        out.write(&dir.join("abs_error.svg"), plot::error_svg(&rows))?;
    }
    Ok(())
}

/// Exit codes: 1 general failure, 3 I/O or unreadable input, 4 training
/// divergence. Argument errors exit with 2.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Io { .. }) | Some(Error::Malformed { .. }) | Some(Error::UnknownVersion { .. }) => 3,
        Some(Error::Diverged { .. }) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut outputs = Outputs::default();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(&cli, a, &mut outputs),
        Command::Train(a) => run_train(&cli, a, &mut outputs),
        Command::Predict(a) => predict(&cli, a, &mut outputs),
        Command::Evaluate(a) => evaluate(&cli, a, &mut outputs),
        Command::Rest(a) => rest(&cli, a, &mut outputs),
        Command::Plot(a) => run_plot(a, &mut outputs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            outputs.discard();
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
