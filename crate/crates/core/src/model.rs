//! Index model specification, datasets and the leave-one-out objective.
//!
//! The search vector handed to the optimizer is the raw stacked functional
//! coefficients, followed by `α` when a scalar covariate is present. The
//! objective scores the direction `c/‖c‖` at bandwidth `h`, which is the same
//! as scoring the raw index `Xc` at bandwidth `h‖c‖`; either way it does not
//! depend on `‖c‖`.

use serde::{Deserialize, Serialize};

use crate::basis::{dot, inner_product, BasisExpansion, FourierBasis};
use crate::error::{Error, Result};
use crate::locfit::nw_loo_all;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexModelSpec {
    pub beta_blocks: Vec<BasisExpansion>,
    pub alpha: Option<f64>,
    pub bandwidth: f64,
}

impl IndexModelSpec {
    /// Stacked functional coefficients.
    pub fn functional_coeffs(&self) -> Vec<f64> {
        self.beta_blocks
            .iter()
            .flat_map(|b| b.coeffs().iter().copied())
            .collect()
    }

    /// Functional coefficients followed by `α` if present.
    pub fn search_vector(&self) -> Vec<f64> {
        let mut v = self.functional_coeffs();
        v.extend(self.alpha);
        v
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout {
            coefficient_bases: self.beta_blocks.iter().map(|b| *b.basis()).collect(),
            scalar: self.alpha.is_some(),
        }
    }

    /// Flip the index direction (and `α`) so that the functional part has a
    /// nonnegative inner product with `reference`, or, without a reference,
    /// so that its first nonzero coefficient is positive.
    pub fn canonicalize_sign(&mut self, reference: Option<&[f64]>) {
        let coeffs = self.functional_coeffs();
        let score = match reference {
            Some(r) if r.len() == coeffs.len() && dot(r, &coeffs) != 0.0 => dot(r, &coeffs),
            _ => coeffs.iter().copied().find(|c| *c != 0.0).unwrap_or(0.0),
        };
        if score < 0.0 {
            let layout = self.layout();
            let flipped: Vec<f64> = coeffs.iter().map(|c| -c).collect();
            self.beta_blocks = layout.split_blocks(&flipped);
            self.alpha = self.alpha.map(|a| -a);
        }
    }
}

/// Shape of the search vector: one coefficient basis per functional block,
/// plus an optional trailing scalar coefficient.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub coefficient_bases: Vec<FourierBasis>,
    pub scalar: bool,
}

impl ParamLayout {
    pub fn functional_dim(&self) -> usize {
        self.coefficient_bases.iter().map(FourierBasis::dim).sum()
    }

    pub fn search_dim(&self) -> usize {
        self.functional_dim() + usize::from(self.scalar)
    }

    fn split_blocks(&self, functional: &[f64]) -> Vec<BasisExpansion> {
        let mut offset = 0;
        self.coefficient_bases
            .iter()
            .map(|basis| {
                let block = functional[offset..offset + basis.dim()].to_vec();
                offset += basis.dim();
                BasisExpansion::new(*basis, block).expect("block length matches basis")
            })
            .collect()
    }

    /// Split a search vector into (functional part, α).
    pub fn split<'a>(&self, raw: &'a [f64]) -> Result<(&'a [f64], Option<f64>)> {
        if raw.len() != self.search_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.search_dim(),
                found: raw.len(),
            });
        }
        let p = self.functional_dim();
        Ok((&raw[..p], self.scalar.then(|| raw[p])))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Covariate expansions indexed `[block][sample]`.
    blocks: Vec<Vec<BasisExpansion>>,
    coefficient_bases: Vec<FourierBasis>,
    /// Row-major `n × p` covariate coefficients on the coefficient bases.
    design: Vec<f64>,
    w: Option<Vec<f64>>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(blocks: Vec<Vec<BasisExpansion>>, w: Option<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if blocks.is_empty() {
            return Err(Error::InvalidInput("at least one functional block is required".into()));
        }
        let mut coefficient_bases = Vec::with_capacity(blocks.len());
        for block in &blocks {
            if block.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: block.len(),
                });
            }
            let basis = block
                .first()
                .map(|x| *x.basis())
                .ok_or_else(|| Error::InvalidInput("empty dataset".into()))?;
            if let Some(bad) = block.iter().find(|x| *x.basis() != basis) {
                return Err(Error::DimensionMismatch {
                    expected: basis.dim(),
                    found: bad.basis().dim(),
                });
            }
            coefficient_bases.push(basis.coefficient_basis()?);
        }
        if let Some(w) = &w {
            if w.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: w.len(),
                });
            }
        }
        let mut data = Self {
            blocks,
            coefficient_bases,
            design: Vec::new(),
            w,
            y,
        };
        data.design = data.build_design();
        Ok(data)
    }

    fn build_design(&self) -> Vec<f64> {
        let n = self.n();
        let p: usize = self.coefficient_bases.iter().map(FourierBasis::dim).sum();
        let mut design = Vec::with_capacity(n * p);
        for i in 0..n {
            for (block, basis) in self.blocks.iter().zip(&self.coefficient_bases) {
                design.extend_from_slice(block[i].restrict_to(basis).coeffs());
            }
        }
        design
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn w(&self) -> Option<&[f64]> {
        self.w.as_deref()
    }

    pub fn blocks(&self) -> &[Vec<BasisExpansion>] {
        &self.blocks
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout {
            coefficient_bases: self.coefficient_bases.clone(),
            scalar: self.w.is_some(),
        }
    }

    /// Covariate coefficients of sample `i` on the coefficient bases.
    pub fn design_row(&self, i: usize) -> &[f64] {
        let p = self.layout().functional_dim();
        &self.design[i * p..(i + 1) * p]
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let blocks = self
            .blocks
            .iter()
            .map(|b| indices.iter().map(|&i| b[i].clone()).collect())
            .collect();
        let w = self.w.as_ref().map(|w| indices.iter().map(|&i| w[i]).collect());
        let y = indices.iter().map(|&i| self.y[i]).collect();
        Dataset::new(blocks, w, y).expect("subset of a valid dataset is valid")
    }

    /// Same covariates with new responses.
    pub fn with_responses(&self, y: Vec<f64>) -> Result<Dataset> {
        if y.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: y.len(),
            });
        }
        let mut out = self.clone();
        out.y = y;
        Ok(out)
    }

    /// `αWᵢ + Σⱼ dᵢⱼ cⱼ` for stacked functional coefficients `c`.
    pub(crate) fn linear_index(&self, functional: &[f64], alpha: Option<f64>) -> Vec<f64> {
        let p = functional.len();
        let mut z: Vec<f64> = self.design.chunks_exact(p).map(|row| dot(row, functional)).collect();
        if let (Some(a), Some(w)) = (alpha, &self.w) {
            z.iter_mut().zip(w).for_each(|(zi, wi)| *zi += a * wi);
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport {
    pub mse: f64,
    pub excluded_count: usize,
    pub index_values: Vec<f64>,
}

/// Index values `zᵢ = αWᵢ + Σ_b ∫ X_{ib} β_b`.
pub fn compute_index(data: &Dataset, spec: &IndexModelSpec) -> Result<Vec<f64>> {
    let layout = data.layout();
    if spec.layout() != layout {
        return Err(Error::DimensionMismatch {
            expected: layout.search_dim(),
            found: spec.layout().search_dim(),
        });
    }
    let mut z = vec![0.0; data.n()];
    for (block, beta) in data.blocks.iter().zip(&spec.beta_blocks) {
        for (zi, x) in z.iter_mut().zip(block) {
            *zi += inner_product(&x.restrict_to(beta.basis()), beta)?;
        }
    }
    if let (Some(a), Some(w)) = (spec.alpha, &data.w) {
        z.iter_mut().zip(w).for_each(|(zi, wi)| *zi += a * wi);
    }
    Ok(z)
}

/// Divide the functional coefficients by `‖c‖` and multiply the bandwidth by
/// `‖c‖`; `α` is left as is.
pub fn normalize_spec(layout: &ParamLayout, raw: &[f64], h: f64) -> Result<IndexModelSpec> {
    let (functional, alpha) = layout.split(raw)?;
    let norm = dot(functional, functional).sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Normalization);
    }
    let unit: Vec<f64> = functional.iter().map(|c| c / norm).collect();
    Ok(IndexModelSpec {
        beta_blocks: layout.split_blocks(&unit),
        alpha,
        bandwidth: h * norm,
    })
}

/// Unit-norm direction of the functional part of `raw`, with `α`.
pub(crate) fn unit_direction(layout: &ParamLayout, raw: &[f64]) -> Result<(Vec<f64>, Option<f64>)> {
    let (functional, alpha) = layout.split(raw)?;
    let norm = dot(functional, functional).sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Normalization);
    }
    Ok((functional.iter().map(|c| c / norm).collect(), alpha))
}

/// Leave-one-out Nadaraya–Watson mean squared error of the direction in
/// `raw` at bandwidth `h`. Samples with an empty window are excluded and
/// counted.
pub fn objective_loo_mse(data: &Dataset, raw: &[f64], h: f64) -> Result<ObjectiveReport> {
    if data.n() < 4 {
        return Err(Error::InvalidInput(format!(
            "objective needs at least 4 samples, got {}",
            data.n()
        )));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidInput(format!("bandwidth must be positive, got {h}")));
    }
    let (unit, alpha) = unit_direction(&data.layout(), raw)?;
    let z = data.linear_index(&unit, alpha);
    let fitted = nw_loo_all(&z, &data.y, h);
    let (mut sum, mut used) = (0.0, 0usize);
    for (f, y) in fitted.iter().zip(&data.y) {
        if let Some(f) = f {
            sum += (y - f) * (y - f);
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::DegenerateObjective);
    }
    Ok(ObjectiveReport {
        mse: sum / used as f64,
        excluded_count: data.n() - used,
        index_values: z,
    })
}
