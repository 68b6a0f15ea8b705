mod fit;
mod plot;
mod svg;
mod truth;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fsim_core::bandwidth::CvMethod;
use fsim_core::ingest::{self, SynthEcologyConfig};
use fsim_core::simulate::{self, ExperimentConfig, Link, SimScenario, StrategyKind};

use crate::truth::TruthFile;

#[derive(Parser)]
#[command(name = "fsim", version, about = "Functional single index model estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo experiment table from a JSON config.
    Simulate(SimulateArgs),
    /// Write one simulated dataset and its ground truth.
    Generate(GenerateArgs),
    /// Write a synthetic file in the ecology schema and its ground truth.
    SynthEcology(SynthEcologyArgs),
    /// Fit the model, selecting the bandwidth and the best starting strategy.
    Fit(fit::FitArgs),
    /// Emit plot data (and optionally SVG) from a fit.
    Plot(plot::PlotArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    link: LinkArg,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = simulate::DEFAULT_NOISE_SD)]
    noise_sd: f64,
    #[arg(long, default_value_t = simulate::DEFAULT_DIM)]
    dim: usize,
    /// Keep the unnormalized true coefficients.
    #[arg(long)]
    raw_truth: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthEcologyArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON generator config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    link: Option<LinkArg>,
    #[arg(long)]
    noise_sd: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum LinkArg {
    G1,
    G2,
    G3,
}

impl From<LinkArg> for Link {
    fn from(l: LinkArg) -> Self {
        match l {
            LinkArg::G1 => Link::G1,
            LinkArg::G2 => Link::G2,
            LinkArg::G3 => Link::G3,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Gcv,
    Kfold,
}

impl From<MethodArg> for CvMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Gcv => CvMethod::Gcv,
            MethodArg::Kfold => CvMethod::Kfold,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    True,
    Linear,
    Equal,
    Random,
}

impl From<StrategyArg> for StrategyKind {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::True => StrategyKind::True,
            StrategyArg::Linear => StrategyKind::Linear,
            StrategyArg::Equal => StrategyKind::Equal,
            StrategyArg::Random => StrategyKind::Random,
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Estimation(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Estimation(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Estimation(m) => m,
        }
    }
}

impl From<fsim_core::Error> for CliError {
    fn from(e: fsim_core::Error) -> Self {
        if e.is_data_error() {
            CliError::Data(e.to_string())
        } else {
            CliError::Estimation(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(io_err(path))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(io_err(path))
}

fn cmd_simulate(args: SimulateArgs) -> CliResult<()> {
    let mut cfg: ExperimentConfig = read_json(&args.config)?;
    if let Some(reps) = args.reps {
        cfg.reps = reps;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(m) = args.method {
        cfg.method = m.into();
    }
    cfg.validate().map_err(|e| CliError::Usage(format!("bad config: {e}")))?;
    let table = simulate::run_experiment(&cfg)?;
    for c in &table.cells {
        if c.failures > 0 {
            eprintln!(
                "warning: {} n={} {}: {}/{} reps failed{}",
                c.link.label(),
                c.n,
                c.strategy.label(),
                c.failures,
                c.reps,
                if c.flagged { " (flagged)" } else { "" }
            );
        }
    }
    create_dir(&args.out)?;
    write_file(&args.out.join("table.csv"), table.to_csv())?;
    write_file(&args.out.join("table.json"), to_json(&table))?;
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> CliResult<()> {
    let scenario = SimScenario {
        n: args.n,
        dim: args.dim,
        link: args.link.into(),
        noise_sd: args.noise_sd,
        seed: args.seed,
        normalize_truth: !args.raw_truth,
    };
    let sim = simulate::generate(&scenario).map_err(|e| CliError::Usage(e.to_string()))?;
    create_dir(&args.out)?;
    let mut buf = Vec::new();
    ingest::write_functional_csv(&sim.data, &mut buf)?;
    write_file(&args.out.join("data.csv"), buf)?;
    write_file(&args.out.join("truth.json"), to_json(&TruthFile::from_simulation(&sim.truth, &scenario)))?;
    Ok(())
}

fn cmd_synth_ecology(args: SynthEcologyArgs) -> CliResult<()> {
    let mut cfg = match &args.config {
        Some(path) => read_json(path)?,
        None => SynthEcologyConfig::new(
            args.n.ok_or_else(|| CliError::Usage("--n or --config is required".into()))?,
            0,
        ),
    };
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(link) = args.link {
        cfg.link = link.into();
    }
    if let Some(sd) = args.noise_sd {
        cfg.noise_sd = sd;
    }
    let (records, truth) = ingest::synth_ecology(&cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    create_dir(&args.out)?;
    let mut buf = Vec::new();
    ingest::write_csv(&records, &mut buf)?;
    write_file(&args.out.join("data.csv"), buf)?;
    write_file(&args.out.join("truth.json"), to_json(&TruthFile::from_ecology(&truth, &cfg)))?;
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Generate(a) => cmd_generate(a),
        Command::SynthEcology(a) => cmd_synth_ecology(a),
        Command::Fit(a) => fit::cmd_fit(a),
        Command::Plot(a) => plot::cmd_plot(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
