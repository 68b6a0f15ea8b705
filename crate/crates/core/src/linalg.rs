use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Ordinary least squares via SVD; rejects numerically rank-deficient designs.
pub(crate) fn least_squares(design: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    let (n, p) = design.shape();
    if n < p {
        return Err(Error::Underdetermined { samples: n, dim: p });
    }
    let svd = design.clone().svd(true, true);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if !(max > 0.0) || min <= max * 1e-10 {
        return Err(Error::RankDeficient);
    }
    let rhs = DVector::from_column_slice(y);
    let beta = svd.solve(&rhs, 0.0).map_err(|_| Error::RankDeficient)?;
    Ok(beta.iter().copied().collect())
}

pub(crate) fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

pub(crate) fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}
