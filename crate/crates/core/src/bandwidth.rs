//! Bandwidth selection by generalized cross-validation or k-fold
//! cross-validation, and the curvature rescale `h ↦ h^{5/7}`.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::std_dev;
use crate::locfit::{nw_predict, smoother_matrix};
use crate::model::{compute_index, unit_direction, Dataset, IndexModelSpec};
use crate::optimize::{fit_from_starts, FitOptions, InitStrategy, OptResult, StartPoint};
use crate::seed;

/// Exponent mapping a level bandwidth (`~n^{-1/5}`) to a curvature
/// bandwidth (`~n^{-1/7}`).
pub const CURVATURE_EXPONENT: f64 = 5.0 / 7.0;
pub const DEFAULT_GRID_SIZE: usize = 10;
pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthGrid {
    values: Vec<f64>,
}

impl BandwidthGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("bandwidth grid is empty".into()));
        }
        if values.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
            return Err(Error::InvalidInput("bandwidths must be positive and finite".into()));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("bandwidth grid must be strictly increasing".into()));
        }
        Ok(Self { values })
    }

    /// `size` log-spaced values over `[0.5·n^{-1/6}·σ, 2·n^{-1/8}·σ]`, where
    /// `σ` is the standard deviation of the index.
    pub fn default_for(n: usize, index_sd: f64, size: usize) -> Result<Self> {
        if !(index_sd > 0.0) {
            return Err(Error::InvalidInput("index has zero spread".into()));
        }
        let n = n as f64;
        let lo = 0.5 * n.powf(-1.0 / 6.0) * index_sd;
        let hi = 2.0 * n.powf(-1.0 / 8.0) * index_sd;
        if size == 1 {
            return Self::new(vec![(lo * hi).sqrt()]);
        }
        let ratio = (hi / lo).ln() / (size - 1) as f64;
        Self::new((0..size).map(|k| lo * (ratio * k as f64).exp()).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CvMethod {
    Gcv,
    Kfold,
}

impl CvMethod {
    pub fn label(self) -> &'static str {
        match self {
            CvMethod::Gcv => "gcv",
            CvMethod::Kfold => "kfold",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectOptions {
    pub fit: FitOptions,
    pub folds: usize,
    pub seed: u64,
}

impl Default for SelectOptions {
    fn default() -> Self {
        Self {
            fit: FitOptions::default(),
            folds: DEFAULT_FOLDS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVReport {
    pub method: CvMethod,
    pub grid: Vec<f64>,
    /// Score per grid value; `None` where scoring failed.
    pub scores: Vec<Option<f64>>,
    pub chosen_index: usize,
    pub chosen_h: f64,
    /// `chosen_h·‖c‖` of the winning fit.
    pub chosen_h_scaled: f64,
    /// Standard deviation of the fitted index, the unit for the rescale.
    pub index_scale: f64,
    pub chosen_h_curvature: f64,
    pub fit: OptResult,
}

impl CVReport {
    pub fn chosen_score(&self) -> f64 {
        self.scores[self.chosen_index].expect("chosen score exists")
    }
}

/// `σ·(h/σ)^{5/7}`: the rescale applied to `h` measured in units of the
/// index standard deviation `σ`.
pub fn curvature_bandwidth(h: f64, index_scale: f64) -> f64 {
    index_scale * (h / index_scale).powf(CURVATURE_EXPONENT)
}

/// `[(1/n)‖(I − S)Y‖²] / [(1/n) tr(I − S)]²` with `S` the local quadratic
/// smoother at the spec's index values.
pub fn gcv_score(data: &Dataset, spec: &IndexModelSpec, h: f64) -> Result<f64> {
    let z = compute_index(data, spec)?;
    let s = smoother_matrix(&z, h)?;
    let n = data.n() as f64;
    let y = DVector::from_column_slice(data.y());
    let resid = &y - &s * &y;
    let trace = n - s.trace();
    if !(trace > 0.0) {
        return Err(Error::OverfitDegeneracy { trace });
    }
    Ok((resid.norm_squared() / n) / (trace / n).powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KFoldScore {
    pub score: f64,
    /// Held-out points with an empty prediction window.
    pub excluded: usize,
}

fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

/// Mean squared prediction error over `folds` held-out folds. Each fold
/// refits the coefficients on the remaining samples and predicts with the
/// Nadaraya–Watson smoother at bandwidth `h`.
pub fn kfold_score(
    data: &Dataset,
    strategy: &InitStrategy,
    h: f64,
    folds: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<KFoldScore> {
    let n = data.n();
    if folds < 2 || n < folds {
        return Err(Error::InvalidInput(format!("cannot split {n} samples into {folds} folds")));
    }
    let assignment = fold_assignment(n, folds, seed);
    let per_fold: Vec<Result<(f64, usize, usize)>> = (0..folds)
        .into_par_iter()
        .map(|k| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| assignment[i] == k);
            let train_data = data.subset(&train);
            let starts = strategy.starting_points(&train_data, h)?;
            let fit = fit_from_starts(&train_data, &starts, h, opts)?;
            let (unit, alpha) = unit_direction(&data.layout(), &fit.spec.search_vector())?;
            let z_all = data.linear_index(&unit, alpha);
            let z_train: Vec<f64> = train.iter().map(|&i| z_all[i]).collect();
            let (mut sse, mut used, mut excluded) = (0.0, 0, 0);
            for &i in &test {
                match nw_predict(&z_train, train_data.y(), z_all[i], h) {
                    Some(pred) => {
                        sse += (data.y()[i] - pred).powi(2);
                        used += 1;
                    }
                    None => excluded += 1,
                }
            }
            Ok((sse, used, excluded))
        })
        .collect();
    let (mut sse, mut used, mut excluded) = (0.0, 0, 0);
    for r in per_fold {
        let (s, u, e) = r?;
        sse += s;
        used += u;
        excluded += e;
    }
    if used == 0 {
        return Err(Error::DegenerateObjective);
    }
    Ok(KFoldScore {
        score: sse / used as f64,
        excluded,
    })
}

/// Standard deviation of the index under the strategy's pilot direction
/// (the equal-coefficient direction for random starts).
pub fn pilot_index_scale(data: &Dataset, strategy: &InitStrategy) -> Result<f64> {
    let pilot = match strategy {
        InitStrategy::Random(_) => InitStrategy::Equal,
        other => other.clone(),
    };
    let start = pilot.starting_points(data, 1.0)?.remove(0);
    index_scale(data, &start.vector)
}

pub(crate) fn index_scale(data: &Dataset, raw: &[f64]) -> Result<f64> {
    let (unit, alpha) = unit_direction(&data.layout(), raw)?;
    Ok(std_dev(&data.linear_index(&unit, alpha)))
}

/// Default grid for `strategy` on `data`.
pub fn default_grid(data: &Dataset, strategy: &InitStrategy) -> Result<BandwidthGrid> {
    BandwidthGrid::default_for(data.n(), pilot_index_scale(data, strategy)?, DEFAULT_GRID_SIZE)
}

/// Score every grid bandwidth, fitting the coefficients at each, and pick
/// the minimizer (ties go to the larger bandwidth).
///
/// Random candidates are ranked once at the grid mean and reused for every
/// bandwidth.
pub fn select_bandwidth(
    data: &Dataset,
    strategy: &InitStrategy,
    grid: &BandwidthGrid,
    method: CvMethod,
    opts: &SelectOptions,
) -> Result<CVReport> {
    let starts: Vec<StartPoint> = strategy.starting_points(data, grid.mean())?;
    let evaluated: Vec<(Option<f64>, Option<OptResult>)> = grid
        .values()
        .par_iter()
        .map(|&h| match method {
            CvMethod::Gcv => match fit_from_starts(data, &starts, h, &opts.fit) {
                Ok(fit) => match gcv_score(data, &fit.spec, h) {
                    Ok(score) if score.is_finite() => (Some(score), Some(fit)),
                    _ => (None, None),
                },
                Err(_) => (None, None),
            },
            CvMethod::Kfold => {
                let score = kfold_score(data, strategy, h, opts.folds, opts.seed, &opts.fit)
                    .ok()
                    .map(|s| s.score)
                    .filter(|s| s.is_finite());
                (score, None)
            }
        })
        .collect();

    let scores: Vec<Option<f64>> = evaluated.iter().map(|(s, _)| *s).collect();
    let chosen_index = argmin_prefer_larger(&scores).ok_or(Error::SelectionFailed)?;
    let chosen_h = grid.values()[chosen_index];
    let fit = match evaluated.into_iter().nth(chosen_index).and_then(|(_, f)| f) {
        Some(fit) => fit,
        None => fit_from_starts(data, &starts, chosen_h, &opts.fit)?,
    };
    let index_scale = index_scale(data, &fit.spec.search_vector())?;
    let chosen_h_scaled = fit.spec.bandwidth;
    Ok(CVReport {
        method,
        grid: grid.values().to_vec(),
        scores,
        chosen_index,
        chosen_h,
        chosen_h_scaled,
        index_scale,
        chosen_h_curvature: curvature_bandwidth(chosen_h_scaled, index_scale),
        fit,
    })
}

/// Index of the smallest score; equal scores resolve to the later (larger
/// bandwidth) entry.
fn argmin_prefer_larger(scores: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(s) = *s {
            if best.map_or(true, |(_, b)| s <= b) {
                best = Some((i, s));
            }
        }
    }
    best.map(|(i, _)| i)
}
