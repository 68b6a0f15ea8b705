//! Coefficient search: starting values and Nelder–Mead minimization of the
//! leave-one-out objective.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::model::{normalize_spec, objective_loo_mse, Dataset, IndexModelSpec};
use crate::seed;

/// Evaluations per search dimension when no budget is given.
pub const EVALS_PER_DIM: usize = 500;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomInit {
    pub candidate_count: usize,
    pub keep_best: usize,
    pub seed: u64,
}

impl Default for RandomInit {
    fn default() -> Self {
        Self {
            candidate_count: 1000,
            keep_best: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitStrategy {
    /// Start at a known coefficient vector (simulation ground truth).
    TrueValue { coeffs: Vec<f64> },
    /// Least squares under `g(s) = s`.
    Linear,
    /// All functional coefficients equal.
    Equal,
    Random(RandomInit),
}

impl InitStrategy {
    pub fn label(&self) -> &'static str {
        match self {
            InitStrategy::TrueValue { .. } => "true",
            InitStrategy::Linear => "linear",
            InitStrategy::Equal => "equal",
            InitStrategy::Random(_) => "random",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let InitStrategy::Random(cfg) = self {
            if cfg.keep_best == 0 || cfg.candidate_count < cfg.keep_best {
                return Err(Error::InvalidInput(format!(
                    "random init needs candidate_count >= keep_best >= 1, got {} and {}",
                    cfg.candidate_count, cfg.keep_best
                )));
            }
        }
        Ok(())
    }

    /// Starting points for this strategy. Random candidates are ranked by
    /// the objective at `h_ref`.
    pub fn starting_points(&self, data: &Dataset, h_ref: f64) -> Result<Vec<StartPoint>> {
        self.validate()?;
        let layout = data.layout();
        let with_alpha = |mut v: Vec<f64>| {
            if layout.scalar {
                v.push(0.0);
            }
            v
        };
        Ok(match self {
            InitStrategy::TrueValue { coeffs } => {
                let v = if coeffs.len() == layout.functional_dim() {
                    with_alpha(coeffs.clone())
                } else {
                    coeffs.clone()
                };
                layout.split(&v)?;
                vec![StartPoint::new("true", v)]
            }
            InitStrategy::Linear => vec![StartPoint::new("linear", init_linear(data)?)],
            InitStrategy::Equal => vec![StartPoint::new(
                "equal",
                with_alpha(init_equal(layout.functional_dim())),
            )],
            InitStrategy::Random(cfg) => init_random(data, h_ref, cfg)?
                .into_iter()
                .map(|c| StartPoint::new(format!("random#{} (score {:.6e})", c.index, c.score), c.vector))
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartPoint {
    pub label: String,
    pub vector: Vec<f64>,
}

impl StartPoint {
    fn new(label: impl Into<String>, vector: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            vector,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomCandidate {
    /// Position in the drawn pool.
    pub index: usize,
    pub vector: Vec<f64>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Maximum objective evaluations per run; `None` means 500 per dimension.
    pub budget: Option<usize>,
    pub tolerance: f64,
    /// Reference direction for the reported sign.
    pub reference: Option<Vec<f64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            budget: None,
            tolerance: DEFAULT_TOLERANCE,
            reference: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    /// Unit-norm, sign-canonical spec with bandwidth `h·‖c‖` of the terminal
    /// raw point.
    pub spec: IndexModelSpec,
    pub final_mse: f64,
    /// Samples with an empty leave-one-out window at the terminal point.
    pub excluded_count: usize,
    pub initial_mse: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub init_used: String,
    /// Terminal raw search vector.
    pub raw: Vec<f64>,
    /// Best objective value after each iteration.
    pub trace: Vec<f64>,
}

pub fn init_equal(dim: usize) -> Vec<f64> {
    vec![1.0 / (dim as f64).sqrt(); dim]
}

/// Least squares of `Y` on an intercept, the covariate coefficients and `W`;
/// the functional part is scaled to unit norm and `α` by the same factor.
pub fn init_linear(data: &Dataset) -> Result<Vec<f64>> {
    let layout = data.layout();
    let p = layout.functional_dim();
    let cols = 1 + layout.search_dim();
    let n = data.n();
    if n <= cols {
        return Err(Error::Underdetermined { samples: n, dim: cols });
    }
    let design = DMatrix::from_fn(n, cols, |i, k| match k {
        0 => 1.0,
        k if k <= p => data.design_row(i)[k - 1],
        _ => data.w().expect("scalar column implies W")[i],
    });
    let beta = least_squares(&design, data.y())?;
    let functional = &beta[1..=p];
    let norm = functional.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !(norm > 1e-300) {
        return Err(Error::Normalization);
    }
    Ok(beta[1..].iter().map(|c| c / norm).collect())
}

/// Draw `candidate_count` standard-normal search vectors and keep the
/// `keep_best` with the smallest objective at `h_ref`, ordered by
/// `(score, draw index)`.
pub fn init_random(data: &Dataset, h_ref: f64, cfg: &RandomInit) -> Result<Vec<RandomCandidate>> {
    InitStrategy::Random(*cfg).validate()?;
    let dim = data.layout().search_dim();
    let mut rng = seed::rng(cfg.seed);
    let pool: Vec<Vec<f64>> = (0..cfg.candidate_count)
        .map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let mut scored: Vec<RandomCandidate> = pool
        .into_par_iter()
        .enumerate()
        .map(|(index, vector)| {
            let score = objective_loo_mse(data, &vector, h_ref)
                .map(|r| r.mse)
                .unwrap_or(f64::INFINITY);
            RandomCandidate { index, vector, score }
        })
        .collect();
    if scored.iter().all(|c| !c.score.is_finite()) {
        return Err(Error::DegenerateObjective);
    }
    scored.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.index.cmp(&b.index)));
    scored.truncate(cfg.keep_best);
    Ok(scored)
}

/// Nelder–Mead from `init` on the raw search vector at bandwidth `h`.
pub fn minimize(data: &Dataset, init: &[f64], h: f64, opts: &FitOptions) -> Result<OptResult> {
    minimize_labeled(data, init, h, opts, "custom")
}

fn minimize_labeled(
    data: &Dataset,
    init: &[f64],
    h: f64,
    opts: &FitOptions,
    label: &str,
) -> Result<OptResult> {
    let layout = data.layout();
    layout.split(init)?;
    let objective = |x: &[f64]| {
        objective_loo_mse(data, x, h)
            .map(|r| r.mse)
            .unwrap_or(f64::INFINITY)
    };
    let initial_mse = objective(init);
    if !initial_mse.is_finite() {
        return Err(Error::NonFiniteInit);
    }
    let budget = opts.budget.unwrap_or(EVALS_PER_DIM * init.len());
    let outcome = nelder_mead(objective, init, initial_mse, budget, opts.tolerance);
    let excluded_count = objective_loo_mse(data, &outcome.x, h).map_or(data.n(), |r| r.excluded_count);
    let mut spec = normalize_spec(&layout, &outcome.x, h)?;
    spec.canonicalize_sign(opts.reference.as_deref());
    Ok(OptResult {
        spec,
        final_mse: outcome.value,
        excluded_count,
        initial_mse,
        iterations: outcome.iterations,
        evaluations: outcome.evaluations,
        converged: outcome.converged,
        init_used: label.to_string(),
        raw: outcome.x,
        trace: outcome.trace,
    })
}

/// Run the search from every start and keep the lowest final objective
/// among runs that use every sample, falling back to runs with exclusions
/// (ties to the earlier start).
pub fn fit_from_starts(
    data: &Dataset,
    starts: &[StartPoint],
    h: f64,
    opts: &FitOptions,
) -> Result<OptResult> {
    let runs: Vec<Result<OptResult>> = starts
        .par_iter()
        .map(|s| minimize_labeled(data, &s.vector, h, opts, &s.label))
        .collect();
    let mut best: Option<OptResult> = None;
    let mut first_err = None;
    for run in runs {
        match run {
            Ok(r) => {
                let key = |o: &OptResult| (o.excluded_count > 0, o.final_mse);
                if best.as_ref().map_or(true, |b| key(&r) < key(b)) {
                    best = Some(r);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.unwrap_or(Error::InvalidInput("no starting points".into())))
}

/// Choose starting points for `strategy` (random candidates ranked at `h`)
/// and minimize from each.
pub fn fit(data: &Dataset, strategy: &InitStrategy, h: f64, opts: &FitOptions) -> Result<OptResult> {
    let starts = strategy.starting_points(data, h)?;
    fit_from_starts(data, &starts, h, opts)
}

struct SimplexOutcome {
    x: Vec<f64>,
    value: f64,
    iterations: usize,
    evaluations: usize,
    converged: bool,
    trace: Vec<f64>,
}

/// Nelder–Mead with reflection 1, expansion 2, contraction ½ and shrink ½.
///
/// The initial simplex offsets every coordinate of `x0` by `0.1·max|x0|`.
/// Stops when the spread of simplex values drops below `tol` or after
/// `budget` evaluations.
fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    f0: f64,
    budget: usize,
    tol: f64,
) -> SimplexOutcome {
    let dim = x0.len();
    let scale = x0.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let step = if scale > 0.0 { 0.1 * scale } else { 0.1 };
    let mut evaluations = 1;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), f0));
    for k in 0..dim {
        if evaluations >= budget {
            break;
        }
        let mut x = x0.to_vec();
        x[k] += step;
        let v = eval(&x, &mut evaluations);
        simplex.push((x, v));
    }
    let order = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    order(&mut simplex);

    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    if simplex.len() < dim + 1 {
        // Budget exhausted while building the simplex.
        let (x, value) = simplex.swap_remove(0);
        return SimplexOutcome {
            x,
            value,
            iterations,
            evaluations,
            converged: false,
            trace,
        };
    }

    loop {
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        if worst - best <= tol {
            converged = true;
            break;
        }
        if evaluations >= budget {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            centroid.iter_mut().zip(x).for_each(|(c, v)| *c += v);
        }
        centroid.iter_mut().for_each(|c| *c /= dim as f64);
        let toward = |coef: f64, x: &[f64]| -> Vec<f64> {
            centroid
                .iter()
                .zip(x)
                .map(|(c, v)| c + coef * (v - c))
                .collect()
        };

        let reflected = toward(-1.0, &simplex[dim].0);
        let fr = eval(&reflected, &mut evaluations);
        let second_worst = simplex[dim - 1].1;

        if fr < best {
            let expanded = toward(-2.0, &simplex[dim].0);
            let fe = eval(&expanded, &mut evaluations);
            simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < second_worst {
            simplex[dim] = (reflected, fr);
        } else {
            let (contracted, fc, accept) = if fr < worst {
                let x = toward(0.5, &reflected);
                let v = eval(&x, &mut evaluations);
                let ok = v <= fr;
                (x, v, ok)
            } else {
                let x = toward(0.5, &simplex[dim].0);
                let v = eval(&x, &mut evaluations);
                let ok = v < worst;
                (x, v, ok)
            };
            if accept {
                simplex[dim] = (contracted, fc);
            } else {
                let anchor = simplex[0].0.clone();
                for (x, v) in simplex.iter_mut().skip(1) {
                    x.iter_mut()
                        .zip(&anchor)
                        .for_each(|(xi, ai)| *xi = ai + 0.5 * (*xi - ai));
                    *v = eval(x, &mut evaluations);
                }
            }
        }
        order(&mut simplex);
        trace.push(simplex[0].1);
    }

    let (x, value) = simplex.swap_remove(0);
    SimplexOutcome {
        x,
        value,
        iterations,
        evaluations,
        converged,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_examples() {
        assert_eq!(init_equal(4), vec![0.5; 4]);
        assert_eq!(init_equal(1), vec![1.0]);
        for d in 1..30 {
            let n: f64 = init_equal(d).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let f0 = rosen(&[-1.2, 1.0]);
        let out = nelder_mead(rosen, &[-1.2, 1.0], f0, 5000, 1e-14);
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-3 && (out.x[1] - 1.0).abs() < 1e-3, "{:?}", out.x);
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(out.value <= f0);
    }

    #[test]
    fn nelder_mead_respects_budget() {
        let sphere = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let x0 = vec![1.0; 5];
        let out = nelder_mead(sphere, &x0, 5.0, 40, 1e-12);
        assert!(!out.converged);
        assert!(out.evaluations <= 40 + 5 + 2);
        assert!(out.value <= 5.0);
    }

    #[test]
    fn invalid_random_config() {
        let cfg = RandomInit {
            candidate_count: 5,
            keep_best: 10,
            seed: 1,
        };
        assert!(InitStrategy::Random(cfg).validate().is_err());
        let cfg = RandomInit {
            candidate_count: 5,
            keep_best: 0,
            seed: 1,
        };
        assert!(InitStrategy::Random(cfg).validate().is_err());
    }
}
