//! Orthonormal Fourier basis on `[0, 1]`.
//!
//! Functions are ordered `[1, √2 sin 2πt, √2 cos 2πt, √2 sin 4πt, √2 cos 4πt, …]`
//! and truncated to `dim` entries. Coefficient bases (for `β`) drop the
//! constant so that `∫β = 0`; covariate bases keep it.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One function of the Fourier family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FourierTerm {
    Constant,
    Sin(u32),
    Cos(u32),
}

impl FourierTerm {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            FourierTerm::Constant => 1.0,
            FourierTerm::Sin(k) => SQRT_2 * (2.0 * PI * k as f64 * t).sin(),
            FourierTerm::Cos(k) => SQRT_2 * (2.0 * PI * k as f64 * t).cos(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FourierBasis {
    dim: usize,
    include_constant: bool,
}

impl FourierBasis {
    pub fn new(dim: usize, include_constant: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("basis dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            include_constant,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn include_constant(&self) -> bool {
        self.include_constant
    }

    /// The constant-free basis spanning the same non-constant terms.
    ///
    /// A covariate basis of dimension `K` with a constant yields a
    /// coefficient basis of dimension `K - 1`.
    pub fn coefficient_basis(&self) -> Result<FourierBasis> {
        if !self.include_constant {
            return Ok(*self);
        }
        FourierBasis::new(self.dim - 1, false)
    }

    pub fn term(&self, j: usize) -> FourierTerm {
        debug_assert!(j < self.dim);
        let j = if self.include_constant {
            if j == 0 {
                return FourierTerm::Constant;
            }
            j - 1
        } else {
            j
        };
        let k = (j / 2 + 1) as u32;
        if j % 2 == 0 {
            FourierTerm::Sin(k)
        } else {
            FourierTerm::Cos(k)
        }
    }

    /// Position of `term` in this basis, if present.
    pub fn position(&self, term: FourierTerm) -> Option<usize> {
        let offset = usize::from(self.include_constant);
        let j = match term {
            FourierTerm::Constant => return self.include_constant.then_some(0),
            FourierTerm::Sin(k) if k >= 1 => offset + 2 * (k as usize - 1),
            FourierTerm::Cos(k) if k >= 1 => offset + 2 * (k as usize - 1) + 1,
            _ => return None,
        };
        (j < self.dim).then_some(j)
    }

    /// Values of every basis function at `t`, without a domain check.
    pub fn values_at(&self, t: f64) -> Vec<f64> {
        (0..self.dim).map(|j| self.term(j).eval(t)).collect()
    }

    pub fn zero(&self) -> BasisExpansion {
        BasisExpansion {
            basis: *self,
            coeffs: vec![0.0; self.dim],
        }
    }

    pub fn expansion(&self, coeffs: Vec<f64>) -> Result<BasisExpansion> {
        BasisExpansion::new(*self, coeffs)
    }
}

/// A function represented by its coefficients in a [`FourierBasis`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisExpansion {
    basis: FourierBasis,
    coeffs: Vec<f64>,
}

impl BasisExpansion {
    pub fn new(basis: FourierBasis, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.dim {
            return Err(Error::DimensionMismatch {
                expected: basis.dim,
                found: coeffs.len(),
            });
        }
        Ok(Self { basis, coeffs })
    }

    pub fn basis(&self) -> &FourierBasis {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain { t });
        }
        Ok(self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * self.basis.term(j).eval(t))
            .sum())
    }

    /// L2 norm of the represented function (Parseval).
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Coefficients of this function's component in `other`'s span.
    ///
    /// Terms of `other` missing here get zero; terms here missing from
    /// `other` are dropped. With orthonormal bases this is the orthogonal
    /// projection onto `other`.
    pub fn restrict_to(&self, other: &FourierBasis) -> BasisExpansion {
        let mut coeffs = vec![0.0; other.dim];
        for (j, c) in self.coeffs.iter().enumerate() {
            if let Some(k) = other.position(self.basis.term(j)) {
                coeffs[k] = *c;
            }
        }
        BasisExpansion {
            basis: *other,
            coeffs,
        }
    }
}

/// `∫₀¹ f g` computed from coefficients.
pub fn inner_product(f: &BasisExpansion, g: &BasisExpansion) -> Result<f64> {
    if f.basis != g.basis {
        return Err(Error::DimensionMismatch {
            expected: f.basis.dim,
            found: g.basis.dim,
        });
    }
    Ok(dot(&f.coeffs, &g.coeffs))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Project samples taken at `m` equally spaced points `t_i = i / (m - 1)`
/// onto `basis` with trapezoidal quadrature.
pub fn project_samples(values: &[f64], basis: &FourierBasis) -> Result<BasisExpansion> {
    let m = values.len();
    if m < basis.dim || m < 2 {
        return Err(Error::Underdetermined {
            samples: m,
            dim: basis.dim,
        });
    }
    let step = 1.0 / (m - 1) as f64;
    let mut coeffs = vec![0.0; basis.dim];
    for (i, v) in values.iter().enumerate() {
        let weight = if i == 0 || i == m - 1 { 0.5 * step } else { step };
        let t = i as f64 * step;
        for (j, c) in coeffs.iter_mut().enumerate() {
            *c += weight * v * basis.term(j).eval(t);
        }
    }
    Ok(BasisExpansion {
        basis: *basis,
        coeffs,
    })
}
