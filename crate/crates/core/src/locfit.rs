//! Local quadratic kernel smoothing and the leave-one-out Nadaraya–Watson
//! estimator.
//!
//! At an evaluation point `u` the fit minimizes
//! `Σᵢ [Yᵢ − a − b(zᵢ − u) − c(zᵢ − u)²/2]² K((zᵢ − u)/h)` and reports
//! `(ĝ, ĝ′, ĝ″) = (a, b, c)`. Each estimate is linear in `Y`; the
//! coefficient rows are the smoother rows `S₀`, `S₁`, `S₂`.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{eval_sq, SmoothKernel};

/// Largest accepted condition number of the (scaled) local normal matrix.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalQuadFit {
    pub u: f64,
    pub a_hat: f64,
    pub b_hat: f64,
    pub c_hat: f64,
    pub effective_points: usize,
    pub smoother_row_0: Vec<f64>,
    pub smoother_row_1: Vec<f64>,
    pub smoother_row_2: Vec<f64>,
}

/// Solved local normal equations in scaled coordinates `s = (z − u)/scale`.
struct LocalSystem {
    /// (sample index, s, kernel weight) for every point with positive weight.
    window: Vec<(usize, f64, f64)>,
    inverse: Matrix3<f64>,
    scale: f64,
}

impl LocalSystem {
    fn build(z: &[f64], u: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidInput(format!("bandwidth must be positive, got {h}")));
        }
        let inv_h = 1.0 / h;
        let mut window = Vec::new();
        let mut spread = 0.0_f64;
        for (i, &zi) in z.iter().enumerate() {
            let d = zi - u;
            let s = d * inv_h;
            let w = eval_sq(s * s);
            if w > 0.0 {
                window.push((i, d, w));
                spread = spread.max(d.abs());
            }
        }
        let singular = |condition: f64, points: usize| Error::SingularFit {
            u,
            points,
            condition,
            row: None,
        };
        if window.len() < 3 || spread == 0.0 {
            return Err(singular(f64::INFINITY, window.len()));
        }
        // Scale by the occupied window's half-width.
        let scale = spread;
        let mut m = Matrix3::zeros();
        for entry in window.iter_mut() {
            let s = entry.1 / scale;
            entry.1 = s;
            let x = Vector3::new(1.0, s, 0.5 * s * s);
            m += entry.2 * x * x.transpose();
        }
        let eig = m.symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if condition > MAX_CONDITION {
            return Err(singular(condition, window.len()));
        }
        let inverse = m
            .try_inverse()
            .ok_or_else(|| singular(condition, window.len()))?;
        Ok(Self {
            window,
            inverse,
            scale,
        })
    }

    /// Map scaled coefficients back to `(g, g′, g″)`.
    fn unscale(&self, theta: Vector3<f64>) -> [f64; 3] {
        [
            theta[0],
            theta[1] / self.scale,
            theta[2] / (self.scale * self.scale),
        ]
    }

    fn estimate(&self, y: &[f64]) -> [f64; 3] {
        let mut rhs = Vector3::zeros();
        for &(i, s, w) in &self.window {
            rhs += (w * y[i]) * Vector3::new(1.0, s, 0.5 * s * s);
        }
        self.unscale(self.inverse * rhs)
    }
}

/// Local quadratic fit at `u` with full smoother rows.
pub fn local_quad_fit(z: &[f64], y: &[f64], u: f64, h: f64) -> Result<LocalQuadFit> {
    check_lengths(z, y)?;
    let sys = LocalSystem::build(z, u, h)?;
    let n = z.len();
    let mut rows = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let factors = [1.0, 1.0 / sys.scale, 1.0 / (sys.scale * sys.scale)];
    for &(i, s, w) in &sys.window {
        let coef = sys.inverse * Vector3::new(1.0, s, 0.5 * s * s);
        for k in 0..3 {
            rows[k][i] = coef[k] * w * factors[k];
        }
    }
    let apply = |row: &[f64]| -> f64 { row.iter().zip(y).map(|(r, v)| r * v).sum() };
    let [row0, row1, row2] = rows;
    Ok(LocalQuadFit {
        u,
        a_hat: apply(&row0),
        b_hat: apply(&row1),
        c_hat: apply(&row2),
        effective_points: sys.window.len(),
        smoother_row_0: row0,
        smoother_row_1: row1,
        smoother_row_2: row2,
    })
}

/// `(ĝ(u), ĝ′(u), ĝ″(u))` without materializing smoother rows.
pub fn local_quad_estimate(z: &[f64], y: &[f64], u: f64, h: f64) -> Result<[f64; 3]> {
    check_lengths(z, y)?;
    Ok(LocalSystem::build(z, u, h)?.estimate(y))
}

/// Leave-one-out Nadaraya–Watson value at sample `i`.
pub fn nw_estimate_loo(z: &[f64], y: &[f64], i: usize, h: f64) -> Result<f64> {
    check_lengths(z, y)?;
    if i >= z.len() {
        return Err(Error::InvalidInput(format!("sample index {i} out of range")));
    }
    let kernel = SmoothKernel;
    let (mut num, mut den) = (0.0, 0.0);
    for (j, (&zj, &yj)) in z.iter().zip(y).enumerate() {
        if j == i {
            continue;
        }
        let w = kernel.eval((z[i] - zj) / h);
        num += w * yj;
        den += w;
    }
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(Error::EmptyWindow { index: i })
    }
}

/// Leave-one-out Nadaraya–Watson values at every sample; `None` marks an
/// empty window.
///
/// Sorts the index once and visits each in-window pair a single time, so the
/// cost is `O(n log n + pairs)` instead of `O(n²)`.
pub fn nw_loo_all(z: &[f64], y: &[f64], h: f64) -> Vec<Option<f64>> {
    let n = z.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| z[a].total_cmp(&z[b]));
    let zs: Vec<f64> = order.iter().map(|&i| z[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let inv_h = 1.0 / h;
    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    for a in 0..n {
        let (za, ya) = (zs[a], ys[a]);
        for b in a + 1..n {
            let d = (zs[b] - za) * inv_h;
            if d >= 1.0 {
                break;
            }
            let w = eval_sq(d * d);
            num[a] += w * ys[b];
            den[a] += w;
            num[b] += w * ya;
            den[b] += w;
        }
    }
    let mut out = vec![None; n];
    for (pos, &i) in order.iter().enumerate() {
        if den[pos] > 0.0 {
            out[i] = Some(num[pos] / den[pos]);
        }
    }
    out
}

/// Nadaraya–Watson prediction at `u` from training pairs `(z, y)`.
pub fn nw_predict(z: &[f64], y: &[f64], u: f64, h: f64) -> Option<f64> {
    let inv_h = 1.0 / h;
    let (mut num, mut den) = (0.0, 0.0);
    for (&zj, &yj) in z.iter().zip(y) {
        let d = (u - zj) * inv_h;
        let w = eval_sq(d * d);
        num += w * yj;
        den += w;
    }
    (den > 0.0).then(|| num / den)
}

/// `n × n` matrix whose row `j` is `S₀` of the local fit at `u = z_j`.
pub fn smoother_matrix(z: &[f64], h: f64) -> Result<DMatrix<f64>> {
    let n = z.len();
    let mut s = DMatrix::zeros(n, n);
    for (j, &u) in z.iter().enumerate() {
        let sys = LocalSystem::build(z, u, h).map_err(|e| match e {
            Error::SingularFit {
                u,
                points,
                condition,
                ..
            } => Error::SingularFit {
                u,
                points,
                condition,
                row: Some(j),
            },
            other => other,
        })?;
        let first = sys.inverse.row(0).transpose();
        for &(i, s_i, w) in &sys.window {
            s[(j, i)] = first.dot(&Vector3::new(1.0, s_i, 0.5 * s_i * s_i)) * w;
        }
    }
    Ok(s)
}

fn check_lengths(z: &[f64], y: &[f64]) -> Result<()> {
    if z.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            found: y.len(),
        });
    }
    Ok(())
}
