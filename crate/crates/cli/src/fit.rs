use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use fsim_core::bandwidth::{pilot_index_scale, select_bandwidth, BandwidthGrid, CVReport, CvMethod, SelectOptions};
use fsim_core::basis::FourierBasis;
use fsim_core::ingest;
use fsim_core::model::{compute_index, Dataset, IndexModelSpec};
use fsim_core::optimize::{FitOptions, InitStrategy, RandomInit, DEFAULT_TOLERANCE};

use crate::truth::TruthFile;
use crate::{create_dir, io_err, read_json, to_json, write_file, CliError, CliResult, MethodArg, StrategyArg};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    /// Ecology schema: two functional covariates plus W.
    Ecology,
    /// Simulation dump: y and covariate basis coefficients.
    Functional,
}

#[derive(Args)]
pub struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "ecology")]
    form: Form,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "linear,equal,random")]
    strategy: Vec<StrategyArg>,
    #[arg(long, value_enum, default_value = "gcv")]
    method: MethodArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Ground truth: enables the `true` strategy and fixes the reported sign.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Basis size (with constant) for projecting ecology curves.
    #[arg(long, default_value_t = ingest::DEFAULT_BASIS_DIM)]
    basis_dim: usize,
    #[arg(long, default_value_t = fsim_core::bandwidth::DEFAULT_GRID_SIZE)]
    grid_size: usize,
    #[arg(long, default_value_t = fsim_core::bandwidth::DEFAULT_FOLDS)]
    folds: usize,
    #[arg(long, default_value_t = 1000)]
    candidates: usize,
    #[arg(long, default_value_t = 10)]
    keep: usize,
    /// Objective evaluations per optimizer run (default 500 per dimension).
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
}

/// Outcome of bandwidth selection for one starting strategy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyTrace {
    pub strategy: String,
    pub grid: Vec<f64>,
    pub scores: Vec<Option<f64>>,
    pub chosen_h: Option<f64>,
    pub score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitArtifact {
    pub form: Form,
    pub data_path: String,
    pub method: CvMethod,
    pub seed: u64,
    pub strategy: String,
    pub spec: IndexModelSpec,
    pub alpha: Option<f64>,
    /// Selected grid bandwidth on the unit-norm index.
    pub chosen_h: f64,
    /// `chosen_h·‖c‖`, used for `ĝ`.
    pub scaled_h: f64,
    /// Rescaled bandwidth used for `ĝ″`.
    pub curvature_h: f64,
    pub index_scale: f64,
    pub score: f64,
    pub final_mse: f64,
    pub converged: bool,
    pub time_axis: Option<String>,
    pub candidates: Vec<StrategyTrace>,
    pub index: Vec<f64>,
    pub y: Vec<f64>,
}

fn load_dataset(args: &FitArgs) -> CliResult<Dataset> {
    let file = std::fs::File::open(&args.data).map_err(io_err(&args.data))?;
    let data = match args.form {
        Form::Ecology => {
            let records = ingest::read_csv(file)?;
            let basis = FourierBasis::new(args.basis_dim, true).map_err(|e| CliError::Usage(e.to_string()))?;
            ingest::to_dataset(&records, &basis)?
        }
        Form::Functional => ingest::read_functional_csv(file)?,
    };
    Ok(data)
}

fn strategy_for(arg: StrategyArg, args: &FitArgs, truth: Option<&TruthFile>) -> CliResult<InitStrategy> {
    Ok(match arg {
        StrategyArg::True => InitStrategy::TrueValue {
            coeffs: truth
                .ok_or_else(|| CliError::Usage("strategy `true` needs --truth".into()))?
                .search_vector(),
        },
        StrategyArg::Linear => InitStrategy::Linear,
        StrategyArg::Equal => InitStrategy::Equal,
        StrategyArg::Random => InitStrategy::Random(RandomInit {
            candidate_count: args.candidates,
            keep_best: args.keep,
            seed: args.seed,
        }),
    })
}

fn run_strategy(data: &Dataset, strategy: &InitStrategy, args: &FitArgs, opts: &SelectOptions) -> fsim_core::Result<CVReport> {
    let scale = pilot_index_scale(data, strategy)?;
    let grid = BandwidthGrid::default_for(data.n(), scale, args.grid_size)?;
    select_bandwidth(data, strategy, &grid, args.method.into(), opts)
}

pub fn cmd_fit(args: FitArgs) -> CliResult<()> {
    if args.strategy.is_empty() {
        return Err(CliError::Usage("at least one strategy is required".into()));
    }
    let data = load_dataset(&args)?;
    let truth: Option<TruthFile> = args.truth.as_deref().map(read_json).transpose()?;
    if let Some(t) = &truth {
        if t.functional_coeffs().len() != data.layout().functional_dim() || t.index.len() != data.n() {
            return Err(CliError::Data("truth file does not match the data".into()));
        }
    }
    let opts = SelectOptions {
        fit: FitOptions {
            budget: args.budget,
            tolerance: args.tolerance,
            reference: truth.as_ref().map(TruthFile::functional_coeffs),
        },
        folds: args.folds,
        seed: args.seed,
    };

    let mut traces = Vec::new();
    let mut best: Option<(String, CVReport)> = None;
    for &arg in &args.strategy {
        let strategy = strategy_for(arg, &args, truth.as_ref())?;
        strategy.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        match run_strategy(&data, &strategy, &args, &opts) {
            Ok(report) => {
                traces.push(StrategyTrace {
                    strategy: strategy.label().into(),
                    grid: report.grid.clone(),
                    scores: report.scores.clone(),
                    chosen_h: Some(report.chosen_h),
                    score: Some(report.chosen_score()),
                    error: None,
                });
                if best.as_ref().map_or(true, |(_, b)| report.chosen_score() < b.chosen_score()) {
                    best = Some((strategy.label().into(), report));
                }
            }
            Err(e) => {
                eprintln!("warning: strategy {} failed: {e}", strategy.label());
                traces.push(StrategyTrace {
                    strategy: strategy.label().into(),
                    grid: Vec::new(),
                    scores: Vec::new(),
                    chosen_h: None,
                    score: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let (label, report) = best.ok_or_else(|| CliError::Estimation("every strategy failed".into()))?;
    let index = compute_index(&data, &report.fit.spec)?;
    let artifact = FitArtifact {
        form: args.form,
        data_path: args.data.display().to_string(),
        method: report.method,
        seed: args.seed,
        strategy: label,
        alpha: report.fit.spec.alpha,
        spec: report.fit.spec.clone(),
        chosen_h: report.chosen_h,
        scaled_h: report.chosen_h_scaled,
        curvature_h: report.chosen_h_curvature,
        index_scale: report.index_scale,
        score: report.chosen_score(),
        final_mse: report.fit.final_mse,
        converged: report.fit.converged,
        time_axis: (args.form == Form::Ecology).then(|| "bin j of 37 at t = j/36".to_string()),
        candidates: traces,
        index,
        y: data.y().to_vec(),
    };
    create_dir(&args.out)?;
    write_file(&args.out.join("fit.json"), to_json(&artifact))
}
