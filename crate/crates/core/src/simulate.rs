//! Simulated functional data, error metrics and Monte-Carlo experiment
//! tables.
//!
//! Covariates are `X(t) = Σⱼ ηⱼ ψⱼ(t)` on a Fourier basis with a constant
//! term, where `ηⱼ = ((j − 1)/24)·N(0, 1)`; the true coefficient function
//! has raw coefficients `a = (0, 1, 1, 0.5, 0, …)` on the same basis.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::{select_bandwidth, CvMethod, SelectOptions, DEFAULT_FOLDS};
use crate::basis::{BasisExpansion, FourierBasis};
use crate::error::{Error, Result};
use crate::linalg::median;
use crate::locfit::local_quad_estimate;
use crate::model::{compute_index, Dataset, IndexModelSpec};
use crate::optimize::{FitOptions, InitStrategy, RandomInit, DEFAULT_TOLERANCE};
use crate::seed;

pub const DEFAULT_DIM: usize = 25;
pub const DEFAULT_NOISE_SD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    /// `e^{−s}`
    G1,
    /// `−s²`
    G2,
    /// `s`
    G3,
}

impl Link {
    pub fn label(self) -> &'static str {
        match self {
            Link::G1 => "g1",
            Link::G2 => "g2",
            Link::G3 => "g3",
        }
    }

    pub fn value(self, s: f64) -> f64 {
        self.derivative(s, 0)
    }

    /// `g^{(k)}(s)`.
    pub fn derivative(self, s: f64, k: usize) -> f64 {
        match (self, k) {
            (Link::G1, k) => {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * (-s).exp()
            }
            (Link::G2, 0) => -s * s,
            (Link::G2, 1) => -2.0 * s,
            (Link::G2, 2) => -2.0,
            (Link::G2, _) => 0.0,
            (Link::G3, 0) => s,
            (Link::G3, 1) => 1.0,
            (Link::G3, _) => 0.0,
        }
    }
}

/// Raw true coefficients on a basis with a constant: `(0, 1, 1, 0.5, 0, …)`.
pub fn true_raw_coeffs(dim: usize) -> Vec<f64> {
    let mut a = vec![0.0; dim];
    for (slot, v) in a.iter_mut().zip([0.0, 1.0, 1.0, 0.5]) {
        *slot = v;
    }
    a
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub n: usize,
    pub dim: usize,
    pub link: Link,
    pub noise_sd: f64,
    pub seed: u64,
    /// Use `a/‖a‖` as the true coefficient (otherwise the raw `a`).
    pub normalize_truth: bool,
}

impl SimScenario {
    pub fn new(n: usize, link: Link, seed: u64) -> Self {
        Self {
            n,
            dim: DEFAULT_DIM,
            link,
            noise_sd: DEFAULT_NOISE_SD,
            seed,
            normalize_truth: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// True coefficient function on the constant-free basis.
    pub beta: BasisExpansion,
    /// The raw `a` on the covariate basis.
    pub raw_coeffs: Vec<f64>,
    pub link: Link,
    pub noise_sd: f64,
    /// True index values `∫Xᵢβ⁰`.
    pub index: Vec<f64>,
}

impl GroundTruth {
    pub fn spec(&self, bandwidth: f64) -> IndexModelSpec {
        IndexModelSpec {
            beta_blocks: vec![self.beta.clone()],
            alpha: None,
            bandwidth,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub data: Dataset,
    pub truth: GroundTruth,
}

pub fn generate(scenario: &SimScenario) -> Result<SimulatedData> {
    if scenario.n == 0 || scenario.dim < 2 {
        return Err(Error::InvalidInput("scenario needs n ≥ 1 and dim ≥ 2".into()));
    }
    let basis = FourierBasis::new(scenario.dim, true)?;
    let coef_basis = basis.coefficient_basis()?;
    let raw = true_raw_coeffs(scenario.dim);
    let raw_expansion = basis.expansion(raw.clone())?.restrict_to(&coef_basis);
    let beta = if scenario.normalize_truth {
        let norm = raw_expansion.norm();
        coef_basis.expansion(raw_expansion.coeffs().iter().map(|c| c / norm).collect())?
    } else {
        raw_expansion
    };

    let mut rng = seed::rng(scenario.seed);
    let denom = (scenario.dim - 1) as f64;
    let mut covariates = Vec::with_capacity(scenario.n);
    let mut y = Vec::with_capacity(scenario.n);
    let mut index = Vec::with_capacity(scenario.n);
    for _ in 0..scenario.n {
        let coeffs: Vec<f64> = (0..scenario.dim)
            .map(|j| {
                let draw: f64 = rng.sample(StandardNormal);
                j as f64 / denom * draw
            })
            .collect();
        let x = basis.expansion(coeffs)?;
        let z = crate::basis::inner_product(&x.restrict_to(&coef_basis), &beta)?;
        let noise: f64 = rng.sample(StandardNormal);
        y.push(scenario.link.value(z) + scenario.noise_sd * noise);
        index.push(z);
        covariates.push(x);
    }
    Ok(SimulatedData {
        data: Dataset::new(vec![covariates], None, y)?,
        truth: GroundTruth {
            beta,
            raw_coeffs: raw,
            link: scenario.link,
            noise_sd: scenario.noise_sd,
            index,
        },
    })
}

/// `[∫(β̂ − β⁰)²]^{1/2}`.
pub fn rse(beta_hat: &BasisExpansion, beta_true: &BasisExpansion) -> Result<f64> {
    if beta_hat.basis() != beta_true.basis() {
        return Err(Error::DimensionMismatch {
            expected: beta_true.basis().dim(),
            found: beta_hat.basis().dim(),
        });
    }
    Ok(beta_hat
        .coeffs()
        .iter()
        .zip(beta_true.coeffs())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RaseReport {
    pub value: f64,
    /// Samples whose own fit was singular and were evaluated at the nearest
    /// admissible index value instead.
    pub adjusted: usize,
}

/// `{(1/n) Σ [ĝ^{(k)}(∫Xᵢβ̂) − g^{(k)}(∫Xᵢβ⁰)]²}^{1/2}` with `ĝ^{(k)}`
/// from the local quadratic fit at bandwidth `h`.
pub fn rase(
    data: &Dataset,
    truth: &GroundTruth,
    spec: &IndexModelSpec,
    k: usize,
    h: f64,
) -> Result<RaseReport> {
    if k > 2 {
        return Err(Error::InvalidInput(format!("derivative order {k} is not estimated")));
    }
    if truth.index.len() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            found: truth.index.len(),
        });
    }
    let z = compute_index(data, spec)?;
    let y = data.y();
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&a, &b| z[a].total_cmp(&z[b]));
    let mut adjusted = 0;
    let mut sum = 0.0;
    for i in 0..z.len() {
        let estimate = match local_quad_estimate(&z, y, z[i], h) {
            Ok(est) => est[k],
            Err(Error::SingularFit { .. }) => {
                adjusted += 1;
                nearest_admissible(&z, y, &order, z[i], h)?[k]
            }
            Err(e) => return Err(e),
        };
        let err = estimate - truth.link.derivative(truth.index[i], k);
        sum += err * err;
    }
    Ok(RaseReport {
        value: (sum / z.len() as f64).sqrt(),
        adjusted,
    })
}

/// Fit at the sample index value closest to `u` whose local system is
/// nonsingular.
fn nearest_admissible(z: &[f64], y: &[f64], order: &[usize], u: f64, h: f64) -> Result<[f64; 3]> {
    let mut by_distance: Vec<usize> = order.to_vec();
    by_distance.sort_by(|&a, &b| (z[a] - u).abs().total_cmp(&(z[b] - u).abs()).then(a.cmp(&b)));
    for &j in &by_distance {
        if let Ok(est) = local_quad_estimate(z, y, z[j], h) {
            return Ok(est);
        }
    }
    Err(Error::SingularFit {
        u,
        points: 0,
        condition: f64::INFINITY,
        row: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    True,
    Linear,
    Equal,
    Random,
}

impl StrategyKind {
    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::True => "true",
            StrategyKind::Linear => "linear",
            StrategyKind::Equal => "equal",
            StrategyKind::Random => "random",
        }
    }
}

fn default_reps() -> usize {
    10
}
fn default_noise() -> f64 {
    DEFAULT_NOISE_SD
}
fn default_dim() -> usize {
    DEFAULT_DIM
}
fn default_grid_size() -> usize {
    crate::bandwidth::DEFAULT_GRID_SIZE
}
fn default_folds() -> usize {
    DEFAULT_FOLDS
}
fn default_candidates() -> usize {
    1000
}
fn default_keep() -> usize {
    10
}
fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}
fn default_true() -> bool {
    true
}

/// Experiment configuration; every constant the estimator needs is exposed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub links: Vec<Link>,
    pub n_values: Vec<usize>,
    pub strategies: Vec<StrategyKind>,
    pub method: CvMethod,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_noise")]
    pub noise_sd: f64,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Objective evaluations per Nelder–Mead run; `None` means 500 per dimension.
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_candidates")]
    pub candidate_count: usize,
    #[serde(default = "default_keep")]
    pub keep_best: usize,
    /// Also report RASE2 at the unrescaled bandwidth.
    #[serde(default)]
    pub compare_rescale: bool,
    #[serde(default = "default_true")]
    pub normalize_truth: bool,
}

impl ExperimentConfig {
    pub fn new(links: Vec<Link>, n_values: Vec<usize>, strategies: Vec<StrategyKind>, method: CvMethod) -> Self {
        Self {
            links,
            n_values,
            strategies,
            method,
            reps: default_reps(),
            seed: 0,
            noise_sd: DEFAULT_NOISE_SD,
            dim: DEFAULT_DIM,
            grid_size: default_grid_size(),
            folds: DEFAULT_FOLDS,
            budget: None,
            tolerance: DEFAULT_TOLERANCE,
            candidate_count: default_candidates(),
            keep_best: default_keep(),
            compare_rescale: false,
            normalize_truth: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidInput("reps must be at least 1".into()));
        }
        if self.links.is_empty() || self.n_values.is_empty() || self.strategies.is_empty() {
            return Err(Error::InvalidInput("links, n_values and strategies must be nonempty".into()));
        }
        if self.n_values.iter().any(|&n| n < 4) {
            return Err(Error::InvalidInput("every n must be at least 4".into()));
        }
        if self.grid_size == 0 {
            return Err(Error::InvalidInput("grid_size must be positive".into()));
        }
        if !(self.noise_sd >= 0.0) {
            return Err(Error::InvalidInput("noise_sd must be nonnegative".into()));
        }
        InitStrategy::Random(RandomInit {
            candidate_count: self.candidate_count,
            keep_best: self.keep_best,
            seed: 0,
        })
        .validate()
    }
}

/// Metrics and bandwidths from one simulated replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepOutcome {
    pub rse: f64,
    pub rase: f64,
    pub rase2: f64,
    pub rase2_original: Option<f64>,
    pub cv_score: f64,
    pub chosen_h: f64,
    pub scaled_h: f64,
    pub curvature_h: f64,
    pub final_mse: f64,
}

/// Run the whole pipeline on one generated dataset.
pub fn run_rep(
    cfg: &ExperimentConfig,
    link: Link,
    n: usize,
    strategy: StrategyKind,
    data_seed: u64,
) -> Result<RepOutcome> {
    let sim = generate(&SimScenario {
        n,
        dim: cfg.dim,
        link,
        noise_sd: cfg.noise_sd,
        seed: data_seed,
        normalize_truth: cfg.normalize_truth,
    })?;
    let truth = &sim.truth;
    let init = match strategy {
        StrategyKind::True => InitStrategy::TrueValue {
            coeffs: truth.beta.coeffs().to_vec(),
        },
        StrategyKind::Linear => InitStrategy::Linear,
        StrategyKind::Equal => InitStrategy::Equal,
        StrategyKind::Random => InitStrategy::Random(RandomInit {
            candidate_count: cfg.candidate_count,
            keep_best: cfg.keep_best,
            seed: seed::derive(data_seed, 1),
        }),
    };
    let opts = SelectOptions {
        fit: FitOptions {
            budget: cfg.budget,
            tolerance: cfg.tolerance,
            reference: Some(truth.beta.coeffs().to_vec()),
        },
        folds: cfg.folds,
        seed: seed::derive(data_seed, 2),
    };
    let grid = crate::bandwidth::BandwidthGrid::default_for(
        n,
        crate::bandwidth::pilot_index_scale(&sim.data, &init)?,
        cfg.grid_size,
    )?;
    let report = select_bandwidth(&sim.data, &init, &grid, cfg.method, &opts)?;
    let spec = &report.fit.spec;
    let rse = rse(&spec.beta_blocks[0], &truth.beta)?;
    let rase0 = rase(&sim.data, truth, spec, 0, report.chosen_h_scaled)?.value;
    let rase2 = rase(&sim.data, truth, spec, 2, report.chosen_h_curvature)?.value;
    let rase2_original = if cfg.compare_rescale {
        Some(rase(&sim.data, truth, spec, 2, report.chosen_h)?.value)
    } else {
        None
    };
    Ok(RepOutcome {
        rse,
        rase: rase0,
        rase2,
        rase2_original,
        cv_score: report.chosen_score(),
        chosen_h: report.chosen_h,
        scaled_h: report.chosen_h_scaled,
        curvature_h: report.chosen_h_curvature,
        final_mse: report.fit.final_mse,
    })
}

/// Median metrics for one (link, n, strategy) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub link: Link,
    pub n: usize,
    pub strategy: StrategyKind,
    pub method: CvMethod,
    pub reps: usize,
    pub failures: usize,
    /// More than half of the reps failed.
    pub flagged: bool,
    pub rse: Option<f64>,
    pub rase: Option<f64>,
    pub rase2: Option<f64>,
    pub rase2_original: Option<f64>,
    pub cv_score: Option<f64>,
    pub chosen_h: Option<f64>,
    pub curvature_h: Option<f64>,
    pub noise_sd: f64,
    pub seed: u64,
    pub outcomes: Vec<Option<RepOutcome>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub config: ExperimentConfig,
    pub cells: Vec<CellSummary>,
}

/// Seed for rep `rep` of (link, n): strategies share data.
pub fn data_seed(cfg: &ExperimentConfig, link_idx: usize, n_idx: usize, rep: usize) -> u64 {
    let cell = (link_idx as u64) << 32 | n_idx as u64;
    seed::derive(seed::derive(cfg.seed, cell), rep as u64)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentTable> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    for (li, &link) in cfg.links.iter().enumerate() {
        for (ni, &n) in cfg.n_values.iter().enumerate() {
            for &strategy in &cfg.strategies {
                jobs.push((li, link, ni, n, strategy));
            }
        }
    }
    let cells = jobs
        .par_iter()
        .map(|&(li, link, ni, n, strategy)| {
            let outcomes: Vec<Option<RepOutcome>> = (0..cfg.reps)
                .into_par_iter()
                .map(|rep| run_rep(cfg, link, n, strategy, data_seed(cfg, li, ni, rep)).ok())
                .collect();
            summarize(cfg, link, n, strategy, outcomes)
        })
        .collect();
    Ok(ExperimentTable {
        config: cfg.clone(),
        cells,
    })
}

fn summarize(
    cfg: &ExperimentConfig,
    link: Link,
    n: usize,
    strategy: StrategyKind,
    outcomes: Vec<Option<RepOutcome>>,
) -> CellSummary {
    let ok: Vec<&RepOutcome> = outcomes.iter().flatten().collect();
    let med = |f: &dyn Fn(&RepOutcome) -> Option<f64>| {
        let mut v: Vec<f64> = ok.iter().filter_map(|o| f(o)).collect();
        median(&mut v)
    };
    let reps = outcomes.len();
    let failures = reps - ok.len();
    CellSummary {
        link,
        n,
        strategy,
        method: cfg.method,
        reps,
        failures,
        flagged: 2 * failures > reps,
        rse: med(&|o| Some(o.rse)),
        rase: med(&|o| Some(o.rase)),
        rase2: med(&|o| Some(o.rase2)),
        rase2_original: med(&|o| o.rase2_original),
        cv_score: med(&|o| Some(o.cv_score)),
        chosen_h: med(&|o| Some(o.chosen_h)),
        curvature_h: med(&|o| Some(o.curvature_h)),
        noise_sd: cfg.noise_sd,
        seed: cfg.seed,
        outcomes,
    }
}

impl ExperimentTable {
    /// One row per cell; missing medians are empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "link,n,strategy,method,reps,failures,flagged,rse,rase,rase2,rase2_original,cv_score,chosen_h,curvature_h,noise_sd,seed\n",
        );
        let f = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                c.link.label(),
                c.n,
                c.strategy.label(),
                c.method.label(),
                c.reps,
                c.failures,
                c.flagged,
                f(c.rse),
                f(c.rase),
                f(c.rase2),
                f(c.rase2_original),
                f(c.cv_score),
                f(c.chosen_h),
                f(c.curvature_h),
                c.noise_sd,
                c.seed
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
