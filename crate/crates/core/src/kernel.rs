//! The smoothing kernel `K(s) = (315/256)(1 − s²)⁴` on `[-1, 1]`.
//!
//! `(1 − s²)⁴` is the lowest power of the biweight family that is three
//! times continuously differentiable across the support boundary.

/// Normalizing constant: `∫₋₁¹ (1 − s²)⁴ ds = 256/315`.
pub const NORMALIZER: f64 = 315.0 / 256.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SmoothKernel;

impl SmoothKernel {
    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        let s2 = s * s;
        if s2 >= 1.0 {
            return 0.0;
        }
        let t = 1.0 - s2;
        let t2 = t * t;
        NORMALIZER * t2 * t2
    }

    /// `μ_p(K) = ∫₋₁¹ s^p K(s) ds`, exact.
    pub fn moment(&self, p: u32) -> f64 {
        if p % 2 == 1 {
            return 0.0;
        }
        // (1 − s²)⁴ = Σ_k C(4,k) (−1)^k s^{2k}
        const BINOM: [f64; 5] = [1.0, -4.0, 6.0, -4.0, 1.0];
        let half: f64 = BINOM
            .iter()
            .enumerate()
            .map(|(k, c)| c / f64::from(p + 2 * k as u32 + 1))
            .sum();
        2.0 * NORMALIZER * half
    }
}

/// Kernel evaluated at squared scaled distance `s²`; avoids a square root
/// on hot paths.
#[inline]
pub(crate) fn eval_sq(s2: f64) -> f64 {
    if s2 >= 1.0 {
        return 0.0;
    }
    let t = 1.0 - s2;
    let t2 = t * t;
    NORMALIZER * t2 * t2
}
